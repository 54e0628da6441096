#include "darcn/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include "darcn/errors.hpp"

namespace darcn {

namespace {
thread_local int g_no_grad_depth = 0;
}

bool grad_enabled() { return g_no_grad_depth == 0; }

NoGradGuard::NoGradGuard() { ++g_no_grad_depth; }
NoGradGuard::~NoGradGuard() { --g_no_grad_depth; }

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << ", ";
    os << s[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

void TensorImpl::ensure_grad() {
  if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
}

Tensor::Tensor(Shape shape, double fill) : impl_(std::make_shared<TensorImpl>()) {
  impl_->shape = std::move(shape);
  impl_->data.assign(shape_numel(impl_->shape), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> values) : impl_(std::make_shared<TensorImpl>()) {
  if (shape_numel(shape) != values.size())
    throw ShapeError("tensor init: shape " + shape_str(shape) + " wants " +
                     std::to_string(shape_numel(shape)) + " values, got " +
                     std::to_string(values.size()));
  impl_->shape = std::move(shape);
  impl_->data = std::move(values);
}

Tensor Tensor::scalar(double v) { return Tensor(Shape{1}, std::vector<double>{v}); }

Tensor Tensor::zeros(const Shape& shape) { return Tensor(shape, 0.0); }

Tensor Tensor::ones(const Shape& shape) { return Tensor(shape, 1.0); }

Tensor Tensor::full(const Shape& shape, double v) { return Tensor(shape, v); }

Tensor Tensor::randn(const Shape& shape, Rng& rng, double stddev) {
  Tensor t(shape);
  for (double& x : t.data()) x = rng.normal() * stddev;
  return t;
}

Tensor Tensor::uniform(const Shape& shape, Rng& rng, double lo, double hi) {
  Tensor t(shape);
  for (double& x : t.data()) x = rng.uniform(lo, hi);
  return t;
}

Tensor Tensor::from_op(Shape shape, std::vector<Tensor> parents) {
  Tensor t(std::move(shape));
  if (grad_enabled()) {
    bool track = false;
    for (const Tensor& p : parents)
      if (p.requires_grad()) track = true;
    if (track) {
      t.impl_->requires_grad = true;
      t.impl_->parents = std::move(parents);
    }
  }
  return t;
}

std::vector<double>& Tensor::grad() {
  impl_->ensure_grad();
  return impl_->grad;
}

const std::vector<double>& Tensor::grad() const {
  impl_->ensure_grad();
  return impl_->grad;
}

double Tensor::item() const {
  if (numel() != 1)
    throw ContractError("item(): tensor has " + std::to_string(numel()) + " elements, expected 1");
  return impl_->data[0];
}

static std::size_t flat_index(const Shape& shape, std::initializer_list<std::size_t> idx) {
  if (idx.size() != shape.size())
    throw ShapeError("index rank " + std::to_string(idx.size()) + " vs tensor rank " +
                     std::to_string(shape.size()));
  std::size_t flat = 0;
  std::size_t i = 0;
  for (std::size_t v : idx) {
    if (v >= shape[i])
      throw ShapeError("index " + std::to_string(v) + " out of range for axis " +
                       std::to_string(i) + " of " + shape_str(shape));
    flat = flat * shape[i] + v;
    ++i;
  }
  return flat;
}

double Tensor::at(std::initializer_list<std::size_t> idx) const {
  return impl_->data[flat_index(impl_->shape, idx)];
}

double& Tensor::at(std::initializer_list<std::size_t> idx) {
  return impl_->data[flat_index(impl_->shape, idx)];
}

Tensor& Tensor::set_requires_grad(bool v) {
  if (v && !is_leaf())
    throw ContractError("set_requires_grad: only leaf tensors can change grad tracking");
  impl_->requires_grad = v;
  return *this;
}

void Tensor::zero_grad() {
  if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

void Tensor::backward() {
  if (numel() != 1)
    throw ContractError("backward(): loss must be scalar, got shape " + shape_str(shape()));
  if (!requires_grad()) return;

  // Post-order DFS over parents; reversed, consumers run before producers.
  std::vector<TensorImpl*> order;
  std::unordered_set<TensorImpl*> seen;
  struct Frame {
    TensorImpl* node;
    std::size_t next_parent;
  };
  std::vector<Frame> stack;
  stack.push_back({impl_.get(), 0});
  seen.insert(impl_.get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      TensorImpl* p = f.node->parents[f.next_parent++].impl();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }

  // Interior grads restart at zero each sweep; leaf grads accumulate across
  // sweeps until zero_grad(). A freshly sized buffer is already zero.
  for (TensorImpl* n : order) {
    if (n->grad.size() != n->data.size())
      n->grad.assign(n->data.size(), 0.0);
    else if (n->backprop)
      std::fill(n->grad.begin(), n->grad.end(), 0.0);
  }
  impl_->ensure_grad();
  impl_->grad[0] = 1.0;

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backprop) (*it)->backprop();
  }
}

}  // namespace darcn
