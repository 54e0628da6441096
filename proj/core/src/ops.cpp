#include "darcn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "darcn/errors.hpp"

namespace darcn {

namespace {

std::vector<std::size_t> strides_of(const Shape& s) {
  std::vector<std::size_t> st(s.size(), 1);
  for (std::size_t i = s.size(); i-- > 1;) st[i - 1] = st[i] * s[i];
  return st;
}

// Element strides of `in` aligned to the broadcast result `out`; 0 marks a
// broadcast axis.
std::vector<std::size_t> bcast_strides(const Shape& in, const Shape& out) {
  std::vector<std::size_t> st(out.size(), 0);
  auto in_st = strides_of(in);
  std::size_t off = out.size() - in.size();
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (in[i] == out[off + i]) {
      st[off + i] = in_st[i];
    } else if (in[i] == 1) {
      st[off + i] = 0;
    } else {
      throw ShapeError("broadcast: " + shape_str(in) + " vs " + shape_str(out));
    }
  }
  return st;
}

// Walks every index of `shape`, advancing registered flat offsets.
class Odometer {
 public:
  Odometer(const Shape& shape, std::vector<const std::vector<std::size_t>*> strides)
      : shape_(shape), strides_(std::move(strides)), idx_(shape.size(), 0),
        off_(strides_.size(), 0) {}

  std::size_t off(std::size_t which) const { return off_[which]; }

  bool advance() {
    for (std::size_t ax = shape_.size(); ax-- > 0;) {
      ++idx_[ax];
      for (std::size_t s = 0; s < strides_.size(); ++s) off_[s] += (*strides_[s])[ax];
      if (idx_[ax] < shape_[ax]) return true;
      for (std::size_t s = 0; s < strides_.size(); ++s) off_[s] -= (*strides_[s])[ax] * shape_[ax];
      idx_[ax] = 0;
    }
    return false;
  }

 private:
  const Shape& shape_;
  std::vector<const std::vector<std::size_t>*> strides_;
  std::vector<std::size_t> idx_;
  std::vector<std::size_t> off_;
};

enum class BinKind { Add, Sub, Mul };

Tensor binary_op(const Tensor& a, const Tensor& b, BinKind kind) {
  Shape out_shape = broadcast_shape(a.shape(), b.shape());
  Tensor out = Tensor::from_op(out_shape, {a, b});
  const std::size_t n = out.numel();
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* po = out.data().data();

  const bool same = a.shape() == b.shape();
  if (same) {
    switch (kind) {
      case BinKind::Add:
        for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] + pb[i];
        break;
      case BinKind::Sub:
        for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] - pb[i];
        break;
      case BinKind::Mul:
        for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] * pb[i];
        break;
    }
  } else {
    auto sa = bcast_strides(a.shape(), out_shape);
    auto sb = bcast_strides(b.shape(), out_shape);
    Odometer od(out_shape, {&sa, &sb});
    std::size_t i = 0;
    do {
      double va = pa[od.off(0)];
      double vb = pb[od.off(1)];
      po[i++] = kind == BinKind::Add ? va + vb : kind == BinKind::Sub ? va - vb : va * vb;
    } while (od.advance());
  }

  if (out.requires_grad()) {
    TensorImpl* oi = out.impl();
    TensorImpl* ai = a.impl();
    TensorImpl* bi = b.impl();
    Shape os = out_shape;
    out.set_backprop([oi, ai, bi, os, kind, same]() {
      const double* g = oi->grad.data();
      const std::size_t n = oi->data.size();
      if (same) {
        if (kind != BinKind::Mul) {
          if (ai->requires_grad) {
            double* ga = ai->grad.data();
            for (std::size_t i = 0; i < n; ++i) ga[i] += g[i];
          }
          if (bi->requires_grad) {
            double* gb = bi->grad.data();
            if (kind == BinKind::Add)
              for (std::size_t i = 0; i < n; ++i) gb[i] += g[i];
            else
              for (std::size_t i = 0; i < n; ++i) gb[i] -= g[i];
          }
        } else {
          const double* pa = ai->data.data();
          const double* pb = bi->data.data();
          if (ai->requires_grad) {
            double* ga = ai->grad.data();
            for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * pb[i];
          }
          if (bi->requires_grad) {
            double* gb = bi->grad.data();
            for (std::size_t i = 0; i < n; ++i) gb[i] += g[i] * pa[i];
          }
        }
        return;
      }
      auto sa = bcast_strides(ai->shape, os);
      auto sb = bcast_strides(bi->shape, os);
      Odometer od(os, {&sa, &sb});
      const double* pa = ai->data.data();
      const double* pb = bi->data.data();
      std::size_t i = 0;
      do {
        double gi = g[i++];
        switch (kind) {
          case BinKind::Add:
            if (ai->requires_grad) ai->grad[od.off(0)] += gi;
            if (bi->requires_grad) bi->grad[od.off(1)] += gi;
            break;
          case BinKind::Sub:
            if (ai->requires_grad) ai->grad[od.off(0)] += gi;
            if (bi->requires_grad) bi->grad[od.off(1)] -= gi;
            break;
          case BinKind::Mul:
            if (ai->requires_grad) ai->grad[od.off(0)] += gi * pb[od.off(1)];
            if (bi->requires_grad) bi->grad[od.off(1)] += gi * pa[od.off(0)];
            break;
        }
      } while (od.advance());
    });
  }
  return out;
}

}  // namespace

Shape broadcast_shape(const Shape& a, const Shape& b) {
  const std::size_t r = std::max(a.size(), b.size());
  Shape out(r, 1);
  for (std::size_t i = 0; i < r; ++i) {
    std::size_t da = i < r - a.size() ? 1 : a[i - (r - a.size())];
    std::size_t db = i < r - b.size() ? 1 : b[i - (r - b.size())];
    if (da == db || db == 1) {
      out[i] = da;
    } else if (da == 1) {
      out[i] = db;
    } else {
      throw ShapeError("incompatible shapes " + shape_str(a) + " and " + shape_str(b));
    }
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinKind::Add); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinKind::Sub); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinKind::Mul); }

namespace {

template <typename F>
Tensor scalar_op(const Tensor& a, F&& fwd, double dout_da) {
  Tensor out = Tensor::from_op(a.shape(), {a});
  const double* pa = a.data().data();
  double* po = out.data().data();
  for (std::size_t i = 0; i < a.numel(); ++i) po[i] = fwd(pa[i]);
  if (out.requires_grad()) {
    TensorImpl* oi = out.impl();
    TensorImpl* ai = a.impl();
    out.set_backprop([oi, ai, dout_da]() {
      if (!ai->requires_grad) return;
      for (std::size_t i = 0; i < oi->data.size(); ++i) ai->grad[i] += dout_da * oi->grad[i];
    });
  }
  return out;
}

}  // namespace

Tensor add_scalar(const Tensor& a, double c) {
  return scalar_op(a, [c](double v) { return v + c; }, 1.0);
}

Tensor mul_scalar(const Tensor& a, double c) {
  return scalar_op(a, [c](double v) { return v * c; }, c);
}

Tensor rsub_scalar(double c, const Tensor& a) {
  return scalar_op(a, [c](double v) { return c - v; }, -1.0);
}

namespace {

enum class UnKind { Sigmoid, Tanh, Relu, Elu, Softplus };

double un_fwd(UnKind k, double v) {
  switch (k) {
    case UnKind::Sigmoid:
      return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    case UnKind::Tanh:
      return std::tanh(v);
    case UnKind::Relu:
      return v > 0.0 ? v : 0.0;
    case UnKind::Elu:
      return v > 0.0 ? v : std::expm1(v);
    case UnKind::Softplus:
      return std::max(v, 0.0) + std::log1p(std::exp(-std::fabs(v)));
  }
  return 0.0;
}

// Derivative expressed through the forward output where cheap.
double un_bwd(UnKind k, double v, double y) {
  switch (k) {
    case UnKind::Sigmoid:
      return y * (1.0 - y);
    case UnKind::Tanh:
      return 1.0 - y * y;
    case UnKind::Relu:
      return v > 0.0 ? 1.0 : 0.0;
    case UnKind::Elu:
      return v > 0.0 ? 1.0 : y + 1.0;
    case UnKind::Softplus:
      return un_fwd(UnKind::Sigmoid, v);
  }
  return 0.0;
}

Tensor unary_op(const Tensor& a, UnKind kind) {
  Tensor out = Tensor::from_op(a.shape(), {a});
  const double* pa = a.data().data();
  double* po = out.data().data();
  for (std::size_t i = 0; i < a.numel(); ++i) po[i] = un_fwd(kind, pa[i]);
  if (out.requires_grad()) {
    TensorImpl* oi = out.impl();
    TensorImpl* ai = a.impl();
    out.set_backprop([oi, ai, kind]() {
      if (!ai->requires_grad) return;
      const double* g = oi->grad.data();
      const double* pv = ai->data.data();
      const double* py = oi->data.data();
      double* ga = ai->grad.data();
      for (std::size_t i = 0; i < oi->data.size(); ++i)
        ga[i] += g[i] * un_bwd(kind, pv[i], py[i]);
    });
  }
  return out;
}

}  // namespace

Tensor sigmoid(const Tensor& x) { return unary_op(x, UnKind::Sigmoid); }
Tensor tanh_act(const Tensor& x) { return unary_op(x, UnKind::Tanh); }
Tensor relu(const Tensor& x) { return unary_op(x, UnKind::Relu); }
Tensor elu(const Tensor& x) { return unary_op(x, UnKind::Elu); }
Tensor softplus(const Tensor& x) { return unary_op(x, UnKind::Softplus); }

namespace {

Tensor reduce_op(const Tensor& x, bool take_mean) {
  Tensor out = Tensor::from_op({1}, {x});
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  const double scale = take_mean ? 1.0 / static_cast<double>(x.numel()) : 1.0;
  out.data()[0] = acc * scale;
  if (out.requires_grad()) {
    TensorImpl* oi = out.impl();
    TensorImpl* xi = x.impl();
    out.set_backprop([oi, xi, scale]() {
      if (!xi->requires_grad) return;
      const double g = oi->grad[0] * scale;
      for (double& gv : xi->grad) gv += g;
    });
  }
  return out;
}

}  // namespace

Tensor sum(const Tensor& x) { return reduce_op(x, false); }
Tensor mean(const Tensor& x) { return reduce_op(x, true); }

Tensor reshape(const Tensor& x, Shape target) {
  if (shape_numel(target) != x.numel())
    throw ShapeError("reshape: " + shape_str(x.shape()) + " to " + shape_str(target) +
                     " changes element count");
  Tensor out = Tensor::from_op(std::move(target), {x});
  out.data() = x.data();
  if (out.requires_grad()) {
    TensorImpl* oi = out.impl();
    TensorImpl* xi = x.impl();
    out.set_backprop([oi, xi]() {
      if (!xi->requires_grad) return;
      for (std::size_t i = 0; i < oi->grad.size(); ++i) xi->grad[i] += oi->grad[i];
    });
  }
  return out;
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ContractError("concat: no inputs");
  const Shape& first = parts[0].shape();
  if (axis >= first.size())
    throw ShapeError("concat: axis " + std::to_string(axis) + " out of range for " +
                     shape_str(first));
  Shape out_shape = first;
  std::size_t axis_total = 0;
  for (const Tensor& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != first.size())
      throw ShapeError("concat: rank mismatch " + shape_str(first) + " vs " + shape_str(s));
    for (std::size_t i = 0; i < s.size(); ++i)
      if (i != axis && s[i] != first[i])
        throw ShapeError("concat: shapes " + shape_str(first) + " and " + shape_str(s) +
                         " differ off axis " + std::to_string(axis));
    axis_total += s[axis];
  }
  out_shape[axis] = axis_total;

  Tensor out = Tensor::from_op(out_shape, parts);
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= first[i];
  for (std::size_t i = axis + 1; i < first.size(); ++i) inner *= first[i];

  double* po = out.data().data();
  const std::size_t out_block = axis_total * inner;
  std::size_t woff = 0;
  for (const Tensor& p : parts) {
    const std::size_t block = p.shape()[axis] * inner;
    const double* pp = p.data().data();
    for (std::size_t o = 0; o < outer; ++o)
      std::memcpy(po + o * out_block + woff, pp + o * block, block * sizeof(double));
    woff += block;
  }

  if (out.requires_grad()) {
    TensorImpl* oi = out.impl();
    std::vector<TensorImpl*> pis;
    for (const Tensor& p : parts) pis.push_back(p.impl());
    out.set_backprop([oi, pis, outer, inner, out_block, axis]() {
      std::size_t woff2 = 0;
      for (TensorImpl* pi : pis) {
        const std::size_t block = pi->shape[axis] * inner;
        if (pi->requires_grad) {
          for (std::size_t o = 0; o < outer; ++o) {
            const double* g = oi->grad.data() + o * out_block + woff2;
            double* gp = pi->grad.data() + o * block;
            for (std::size_t i = 0; i < block; ++i) gp[i] += g[i];
          }
        }
        woff2 += block;
      }
    });
  }
  return out;
}

Tensor slice(const Tensor& x, const std::vector<std::pair<std::size_t, std::size_t>>& ranges) {
  const Shape& s = x.shape();
  if (ranges.size() != s.size())
    throw ShapeError("slice: " + std::to_string(ranges.size()) + " ranges for rank " +
                     std::to_string(s.size()));
  Shape out_shape(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    auto [lo, hi] = ranges[i];
    if (lo >= hi || hi > s[i])
      throw ShapeError("slice: bad range [" + std::to_string(lo) + ", " + std::to_string(hi) +
                       ") on axis " + std::to_string(i) + " of " + shape_str(s));
    out_shape[i] = hi - lo;
  }

  Tensor out = Tensor::from_op(out_shape, {x});
  auto in_st = strides_of(s);
  std::size_t base = 0;
  for (std::size_t i = 0; i < s.size(); ++i) base += ranges[i].first * in_st[i];

  Odometer od(out_shape, {&in_st});
  double* po = out.data().data();
  const double* px = x.data().data();
  std::size_t i = 0;
  do {
    po[i++] = px[base + od.off(0)];
  } while (od.advance());

  if (out.requires_grad()) {
    TensorImpl* oi = out.impl();
    TensorImpl* xi = x.impl();
    Shape os = out_shape;
    out.set_backprop([oi, xi, os, in_st, base]() {
      if (!xi->requires_grad) return;
      Odometer od2(os, {&in_st});
      std::size_t j = 0;
      do {
        xi->grad[base + od2.off(0)] += oi->grad[j++];
      } while (od2.advance());
    });
  }
  return out;
}

Tensor permute(const Tensor& x, const std::vector<std::size_t>& order) {
  const Shape& s = x.shape();
  if (order.size() != s.size())
    throw ShapeError("permute: order size " + std::to_string(order.size()) + " for rank " +
                     std::to_string(s.size()));
  std::vector<bool> used(s.size(), false);
  Shape out_shape(s.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (order[i] >= s.size() || used[order[i]])
      throw ShapeError("permute: invalid axis order");
    used[order[i]] = true;
    out_shape[i] = s[order[i]];
  }

  Tensor out = Tensor::from_op(out_shape, {x});
  auto in_st = strides_of(s);
  std::vector<std::size_t> walk(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) walk[i] = in_st[order[i]];

  Odometer od(out_shape, {&walk});
  double* po = out.data().data();
  const double* px = x.data().data();
  std::size_t i = 0;
  do {
    po[i++] = px[od.off(0)];
  } while (od.advance());

  if (out.requires_grad()) {
    TensorImpl* oi = out.impl();
    TensorImpl* xi = x.impl();
    Shape os = out_shape;
    out.set_backprop([oi, xi, os, walk]() {
      if (!xi->requires_grad) return;
      Odometer od2(os, {&walk});
      std::size_t j = 0;
      do {
        xi->grad[od2.off(0)] += oi->grad[j++];
      } while (od2.advance());
    });
  }
  return out;
}

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  std::vector<double>& running_mean, std::vector<double>& running_var, bool train,
                  double momentum, double eps) {
  if (x.rank() != 4)
    throw ShapeError("batch_norm: expected [B, C, T, F] input, got " + shape_str(x.shape()));
  const std::size_t B = x.dim(0), C = x.dim(1), T = x.dim(2), F = x.dim(3);
  if (gamma.numel() != C || beta.numel() != C)
    throw ShapeError("batch_norm: gamma/beta length " + std::to_string(gamma.numel()) + "/" +
                     std::to_string(beta.numel()) + " vs " + std::to_string(C) + " channels");
  if (running_mean.size() != C || running_var.size() != C)
    throw ContractError("batch_norm: running stats not sized for " + std::to_string(C) +
                        " channels");

  const std::size_t plane = T * F;
  const std::size_t per_c = B * plane;
  std::vector<double> use_mean(C), use_inv_std(C);

  const double* px = x.data().data();
  if (train) {
    for (std::size_t c = 0; c < C; ++c) {
      double m = 0.0;
      for (std::size_t b = 0; b < B; ++b) {
        const double* row = px + (b * C + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) m += row[i];
      }
      m /= static_cast<double>(per_c);
      double v = 0.0;
      for (std::size_t b = 0; b < B; ++b) {
        const double* row = px + (b * C + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          const double d = row[i] - m;
          v += d * d;
        }
      }
      v /= static_cast<double>(per_c);
      use_mean[c] = m;
      use_inv_std[c] = 1.0 / std::sqrt(v + eps);
      running_mean[c] = momentum * running_mean[c] + (1.0 - momentum) * m;
      running_var[c] = momentum * running_var[c] + (1.0 - momentum) * v;
    }
  } else {
    for (std::size_t c = 0; c < C; ++c) {
      use_mean[c] = running_mean[c];
      use_inv_std[c] = 1.0 / std::sqrt(running_var[c] + eps);
    }
  }

  Tensor out = Tensor::from_op(x.shape(), {x, gamma, beta});
  double* po = out.data().data();
  const double* pg = gamma.data().data();
  const double* pb = beta.data().data();
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c) {
      const double m = use_mean[c], is = use_inv_std[c], g = pg[c], bb = pb[c];
      const double* row = px + (b * C + c) * plane;
      double* orow = po + (b * C + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) orow[i] = g * (row[i] - m) * is + bb;
    }

  if (out.requires_grad()) {
    TensorImpl* oi = out.impl();
    TensorImpl* xi = x.impl();
    TensorImpl* gi = gamma.impl();
    TensorImpl* bi = beta.impl();
    out.set_backprop([oi, xi, gi, bi, use_mean, use_inv_std, B, C, plane, per_c, train]() {
      const double* g = oi->grad.data();
      const double* px2 = xi->data.data();
      const double* pg2 = gi->data.data();
      for (std::size_t c = 0; c < C; ++c) {
        const double m = use_mean[c], is = use_inv_std[c];
        double sum_g = 0.0, sum_gx = 0.0;
        for (std::size_t b = 0; b < B; ++b) {
          const std::size_t base = (b * C + c) * plane;
          for (std::size_t i = 0; i < plane; ++i) {
            const double gv = g[base + i];
            sum_g += gv;
            sum_gx += gv * (px2[base + i] - m) * is;
          }
        }
        if (gi->requires_grad) gi->grad[c] += sum_gx;
        if (bi->requires_grad) bi->grad[c] += sum_g;
        if (xi->requires_grad) {
          const double scale = pg2[c] * is;
          if (train) {
            const double mg = sum_g / static_cast<double>(per_c);
            const double mgx = sum_gx / static_cast<double>(per_c);
            for (std::size_t b = 0; b < B; ++b) {
              const std::size_t base = (b * C + c) * plane;
              for (std::size_t i = 0; i < plane; ++i) {
                const double xh = (px2[base + i] - m) * is;
                xi->grad[base + i] += scale * (g[base + i] - mg - xh * mgx);
              }
            }
          } else {
            for (std::size_t b = 0; b < B; ++b) {
              const std::size_t base = (b * C + c) * plane;
              for (std::size_t i = 0; i < plane; ++i) xi->grad[base + i] += scale * g[base + i];
            }
          }
        }
      }
    });
  }
  return out;
}

}  // namespace darcn
