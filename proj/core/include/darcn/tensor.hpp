#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

#include "darcn/rng.hpp"

namespace darcn {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);
std::size_t shape_numel(const Shape& s);

class Tensor;

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  bool requires_grad = false;
  std::vector<double> grad;  // sized lazily, same length as data
  std::vector<Tensor> parents;
  std::function<void()> backprop;  // reads this->grad, accumulates into parents

  void ensure_grad();
};

// Dense row-major tensor with reverse-mode autodiff. Copies share storage;
// ops build a define-by-run graph that backward() traverses once per node.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double v);
  static Tensor zeros(const Shape& shape);
  static Tensor ones(const Shape& shape);
  static Tensor full(const Shape& shape, double v);
  static Tensor randn(const Shape& shape, Rng& rng, double stddev = 1.0);
  static Tensor uniform(const Shape& shape, Rng& rng, double lo, double hi);

  // Result tensor of an op: grad tracking derived from parents and grad mode.
  // The caller fills data and installs the backprop closure when tracked.
  static Tensor from_op(Shape shape, std::vector<Tensor> parents);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t dim(std::size_t i) const { return impl_->shape[i]; }
  std::size_t numel() const { return impl_->data.size(); }

  std::vector<double>& data() { return impl_->data; }
  const std::vector<double>& data() const { return impl_->data; }
  std::vector<double>& grad();
  const std::vector<double>& grad() const;
  bool grad_allocated() const { return !impl_->grad.empty(); }

  double item() const;  // requires numel() == 1
  double at(std::initializer_list<std::size_t> idx) const;
  double& at(std::initializer_list<std::size_t> idx);

  bool requires_grad() const { return impl_->requires_grad; }
  Tensor& set_requires_grad(bool v);
  bool is_leaf() const { return !impl_->backprop; }
  void zero_grad();

  // Reverse-mode sweep from a scalar. Repeated calls accumulate into leaves.
  void backward();

  TensorImpl* impl() const { return impl_.get(); }
  void set_backprop(std::function<void()> fn) { impl_->backprop = std::move(fn); }

 private:
  std::shared_ptr<TensorImpl> impl_;
};

// Ops invoked while a guard is alive record no graph (forward values only).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

bool grad_enabled();

}  // namespace darcn
