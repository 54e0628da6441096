#pragma once

#include <string>
#include <vector>

#include "darcn/ops.hpp"
#include "darcn/rng.hpp"
#include "darcn/tensor.hpp"

namespace darcn {

// Named view into a module's tensors. Non-trainable entries (batch-norm
// running stats) are serialized but skipped by the optimizer.
struct NamedParam {
  std::string name;
  Tensor tensor;
  bool trainable = true;
};
using ParamList = std::vector<NamedParam>;

class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(std::size_t cin, std::size_t cout, std::size_t kt, std::size_t kf, std::size_t st,
         std::size_t sf, Pad2 pad, Rng& rng, bool bias = true, std::size_t dt = 1,
         std::size_t df = 1);

  Tensor forward(const Tensor& x) const;
  void collect(const std::string& prefix, ParamList& out);
  std::size_t param_count() const;

  Tensor w;  // [Cout, Cin, kT, kF]
  Tensor b;  // [Cout]; empty when bias disabled

 private:
  std::size_t st_ = 1, sf_ = 1, dt_ = 1, df_ = 1;
  Pad2 pad_{};
};

class Deconv2d {
 public:
  Deconv2d() = default;
  Deconv2d(std::size_t cin, std::size_t cout, std::size_t kt, std::size_t kf, std::size_t st,
           std::size_t sf, Pad2 trim, std::size_t extra_t, std::size_t extra_f, Rng& rng,
           bool bias = true);

  Tensor forward(const Tensor& x) const;
  void collect(const std::string& prefix, ParamList& out);
  std::size_t param_count() const;

  Tensor w;  // [Cin, Cout, kT, kF]
  Tensor b;

 private:
  std::size_t st_ = 1, sf_ = 1, extra_t_ = 0, extra_f_ = 0;
  Pad2 trim_{};
};

class BatchNorm2d {
 public:
  BatchNorm2d() = default;
  explicit BatchNorm2d(std::size_t channels);

  // Train mode updates running stats (first update adopts the batch stats,
  // later ones blend with momentum 0.9). Eval mode before any update or
  // checkpoint load is a contract error.
  Tensor forward(const Tensor& x, bool train);
  void collect(const std::string& prefix, ParamList& out);
  std::size_t param_count() const;
  bool has_stats() const;

  Tensor gamma, beta;
  Tensor running_mean, running_var;  // running_var < 0 marks "never updated"
};

// Pointwise gated recurrence over the stage axis: both inputs are full
// [B,C,T,F] maps and the output is a convex combination of h_hat and the
// candidate state.
class ConvGruCell {
 public:
  ConvGruCell() = default;
  ConvGruCell(std::size_t channels, Rng& rng);

  Tensor step(const Tensor& h_hat, const Tensor& h_prev) const;
  void collect(const std::string& prefix, ParamList& out);

  Conv2d wz, wr, wn;  // input kernels, with bias
  Conv2d uz, ur, un;  // state kernels, no bias
};

// Additive attention over a skip connection: 1x1 convs with batch norm after
// each, squeezed to a single-channel mask in (0,1) that scales q.
class AttentionGate {
 public:
  AttentionGate() = default;
  AttentionGate(std::size_t cp, std::size_t cq, Rng& rng);

  Tensor forward(const Tensor& p, const Tensor& q, bool train);
  void collect(const std::string& prefix, ParamList& out);

  std::size_t inter_channels = 0;
  Conv2d wp, wq, wr;
  BatchNorm2d bnp, bnq, bnr;
};

// Residual gated block over time: dilated causal convolutions on [B,C,T]
// (or [B,C,T,1]), out = x + proj(linear(x) * sigmoid(gate(x))).
class GluBlock {
 public:
  GluBlock() = default;
  GluBlock(std::size_t channels, std::size_t width, std::size_t kernel, std::size_t dilation,
           Rng& rng);

  Tensor forward(const Tensor& x) const;
  void collect(const std::string& prefix, ParamList& out);

  Conv2d lin, gate, proj;
};

}  // namespace darcn
