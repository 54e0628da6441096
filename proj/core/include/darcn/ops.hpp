#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "darcn/tensor.hpp"

namespace darcn {

// ---- elementwise binary (numpy-style right-aligned broadcasting) ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }

Shape broadcast_shape(const Shape& a, const Shape& b);

// ---- scalar forms ----
Tensor add_scalar(const Tensor& a, double c);
Tensor mul_scalar(const Tensor& a, double c);
Tensor rsub_scalar(double c, const Tensor& a);  // c - a

// ---- elementwise unary ----
Tensor sigmoid(const Tensor& x);
Tensor tanh_act(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor elu(const Tensor& x);       // alpha = 1
Tensor softplus(const Tensor& x);  // ln(1 + e^x), overflow-safe

// ---- reductions ----
Tensor sum(const Tensor& x);   // scalar
Tensor mean(const Tensor& x);  // scalar

// ---- layout ----
Tensor reshape(const Tensor& x, Shape target);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
// Half-open [lo, hi) per axis; ranges.size() must equal rank.
Tensor slice(const Tensor& x, const std::vector<std::pair<std::size_t, std::size_t>>& ranges);
Tensor permute(const Tensor& x, const std::vector<std::size_t>& order);

// ---- convolution ----
// Per-side padding; time axis precedes frequency axis.
struct Pad2 {
  std::size_t t_lo = 0, t_hi = 0, f_lo = 0, f_hi = 0;
};

// x: [B, Cin, T, F], w: [Cout, Cin, kT, kF], bias: [Cout] or undefined.
// Correlation convention (no kernel flip). Output length per axis:
//   floor((L + lo + hi - ((k-1)*dil + 1)) / stride) + 1.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, std::size_t stride_t,
              std::size_t stride_f, const Pad2& pad, std::size_t dil_t = 1, std::size_t dil_f = 1);

// Adjoint of conv2d. x: [B, Cin, T, F], w: [Cin, Cout, kT, kF]. `trim` plays
// the role conv padding plays, removing rows from the full scatter output;
// `extra_*` appends zero rows so a caller can hit a declared length:
//   out length = (L - 1) * stride + k - lo - hi + extra.
Tensor conv_transpose2d(const Tensor& x, const Tensor& w, const Tensor& bias, std::size_t stride_t,
                        std::size_t stride_f, const Pad2& trim, std::size_t extra_t = 0,
                        std::size_t extra_f = 0);

// ---- batch normalization ----
// x: [B, C, T, F]; gamma/beta: [C]. Train mode normalizes by per-channel batch
// statistics (biased variance) and moves running stats toward them:
//   running <- momentum * running + (1 - momentum) * batch.
// Eval mode normalizes by the provided running stats.
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  std::vector<double>& running_mean, std::vector<double>& running_var, bool train,
                  double momentum = 0.9, double eps = 1e-5);

}  // namespace darcn
