#include <Eigen/Core>
#include <algorithm>
#include <cstdint>
#include <vector>

#include "darcn/errors.hpp"
#include "darcn/ops.hpp"

namespace darcn {

namespace {

using ll = long long;
using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatRM>;
using CMapRM = Eigen::Map<const MatRM>;

std::size_t conv_out_len(std::size_t L, std::size_t lo, std::size_t hi, std::size_t k,
                         std::size_t stride, std::size_t dil, const char* axis) {
  const ll eff = static_cast<ll>(k - 1) * static_cast<ll>(dil) + 1;
  const ll padded = static_cast<ll>(L + lo + hi);
  if (padded < eff)
    throw ShapeError(std::string("conv2d: effective kernel ") + std::to_string(eff) +
                     " exceeds padded " + axis + " length " + std::to_string(padded));
  return static_cast<std::size_t>((padded - eff) / static_cast<ll>(stride)) + 1;
}

ll floor_div(ll a, ll b) {
  ll q = a / b;
  if ((a % b) != 0 && ((a < 0) != (b < 0))) --q;
  return q;
}

// Grid rows `g` for which s = g * stride + koff lies in [0, S).
void valid_range(ll koff, std::size_t stride, std::size_t S, std::size_t G, std::size_t& g_lo,
                 std::size_t& g_hi) {
  const ll s = static_cast<ll>(stride);
  ll lo = koff < 0 ? (-koff + s - 1) / s : 0;
  ll hi = floor_div(static_cast<ll>(S) - 1 - koff, s) + 1;
  hi = std::min<ll>(hi, static_cast<ll>(G));
  g_lo = static_cast<std::size_t>(std::max<ll>(lo, 0));
  g_hi = static_cast<std::size_t>(std::max<ll>(hi, lo));
}

// Column geometry shared by both conv directions: column (c,kt,kf) x (gt,gf)
// addresses source element [c, gt*st + kt*dt + off_t, gf*sf + kf*df + off_f].
struct ConvGeom {
  std::size_t C, S_t, S_f;  // source map
  std::size_t G_t, G_f;     // column grid
  std::size_t kT, kF;
  std::size_t st, sf, dt, df;
  ll off_t, off_f;

  std::size_t rows() const { return C * kT * kF; }
  std::size_t cols() const { return G_t * G_f; }
};

void im2col(const ConvGeom& g, const double* src, double* col) {
  std::fill(col, col + g.rows() * g.cols(), 0.0);
  for (std::size_t c = 0; c < g.C; ++c) {
    const double* cbase = src + c * g.S_t * g.S_f;
    for (std::size_t kt = 0; kt < g.kT; ++kt) {
      const ll t_off = static_cast<ll>(kt * g.dt) + g.off_t;
      std::size_t gt_lo, gt_hi;
      valid_range(t_off, g.st, g.S_t, g.G_t, gt_lo, gt_hi);
      for (std::size_t kf = 0; kf < g.kF; ++kf) {
        const ll f_off = static_cast<ll>(kf * g.df) + g.off_f;
        std::size_t gf_lo, gf_hi;
        valid_range(f_off, g.sf, g.S_f, g.G_f, gf_lo, gf_hi);
        double* row = col + ((c * g.kT + kt) * g.kF + kf) * g.cols();
        if (g.st * g.S_f == 1 && g.G_f == 1 && gf_hi - gf_lo == 1) {
          // pure time-axis column, one contiguous run
          std::copy(cbase + static_cast<std::size_t>(static_cast<ll>(gt_lo) + t_off),
                    cbase + static_cast<std::size_t>(static_cast<ll>(gt_hi) + t_off), row + gt_lo);
          continue;
        }
        for (std::size_t gt = gt_lo; gt < gt_hi; ++gt) {
          const std::size_t s_t = static_cast<std::size_t>(static_cast<ll>(gt * g.st) + t_off);
          const double* sr =
              cbase + s_t * g.S_f + static_cast<std::size_t>(static_cast<ll>(gf_lo * g.sf) + f_off);
          double* cr = row + gt * g.G_f + gf_lo;
          if (g.sf == 1) {
            std::copy(sr, sr + (gf_hi - gf_lo), cr);
          } else {
            for (std::size_t gf = gf_lo; gf < gf_hi; ++gf, sr += g.sf) *cr++ = *sr;
          }
        }
      }
    }
  }
}

// Adds column entries back into a source-shaped accumulator. Positions that
// fall outside the source were zero-filled by im2col and are skipped here, so
// the two functions are adjoint.
void col2im(const ConvGeom& g, const double* col, double* dst) {
  for (std::size_t c = 0; c < g.C; ++c) {
    double* cbase = dst + c * g.S_t * g.S_f;
    for (std::size_t kt = 0; kt < g.kT; ++kt) {
      const ll t_off = static_cast<ll>(kt * g.dt) + g.off_t;
      std::size_t gt_lo, gt_hi;
      valid_range(t_off, g.st, g.S_t, g.G_t, gt_lo, gt_hi);
      for (std::size_t kf = 0; kf < g.kF; ++kf) {
        const ll f_off = static_cast<ll>(kf * g.df) + g.off_f;
        std::size_t gf_lo, gf_hi;
        valid_range(f_off, g.sf, g.S_f, g.G_f, gf_lo, gf_hi);
        const double* row = col + ((c * g.kT + kt) * g.kF + kf) * g.cols();
        if (g.st * g.S_f == 1 && g.G_f == 1 && gf_hi - gf_lo == 1) {
          double* dr = cbase + static_cast<std::size_t>(static_cast<ll>(gt_lo) + t_off);
          const double* cr = row + gt_lo;
          const std::size_t n = gt_hi - gt_lo;
          for (std::size_t i = 0; i < n; ++i) dr[i] += cr[i];
          continue;
        }
        for (std::size_t gt = gt_lo; gt < gt_hi; ++gt) {
          const std::size_t s_t = static_cast<std::size_t>(static_cast<ll>(gt * g.st) + t_off);
          double* dr =
              cbase + s_t * g.S_f + static_cast<std::size_t>(static_cast<ll>(gf_lo * g.sf) + f_off);
          const double* cr = row + gt * g.G_f + gf_lo;
          for (std::size_t gf = gf_lo; gf < gf_hi; ++gf, dr += g.sf) *dr += *cr++;
        }
      }
    }
  }
}

void add_bias_plane(double* po, const double* pb, std::size_t B, std::size_t Co, std::size_t N) {
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t co = 0; co < Co; ++co) {
      double* orow = po + (b * Co + co) * N;
      std::fill(orow, orow + N, pb[co]);
    }
}

void bias_backward(const double* g, double* gb, std::size_t B, std::size_t Co, std::size_t N) {
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t co = 0; co < Co; ++co) {
      const double* grow = g + (b * Co + co) * N;
      double acc = 0.0;
      for (std::size_t i = 0; i < N; ++i) acc += grow[i];
      gb[co] += acc;
    }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, std::size_t stride_t,
              std::size_t stride_f, const Pad2& pad, std::size_t dil_t, std::size_t dil_f) {
  if (x.rank() != 4 || w.rank() != 4)
    throw ShapeError("conv2d: x " + shape_str(x.shape()) + " and w " + shape_str(w.shape()) +
                     " must be rank 4");
  const std::size_t B = x.dim(0), Ci = x.dim(1), T = x.dim(2), F = x.dim(3);
  const std::size_t Co = w.dim(0), kT = w.dim(2), kF = w.dim(3);
  if (w.dim(1) != Ci)
    throw ShapeError("conv2d: input channels " + std::to_string(Ci) + " vs kernel " +
                     shape_str(w.shape()));
  if (bias.defined() && bias.numel() != Co)
    throw ShapeError("conv2d: bias length " + std::to_string(bias.numel()) + " vs " +
                     std::to_string(Co) + " output channels");
  if (stride_t == 0 || stride_f == 0 || dil_t == 0 || dil_f == 0)
    throw ConfigError("conv2d: stride and dilation must be positive");

  const std::size_t To = conv_out_len(T, pad.t_lo, pad.t_hi, kT, stride_t, dil_t, "time");
  const std::size_t Fo = conv_out_len(F, pad.f_lo, pad.f_hi, kF, stride_f, dil_f, "frequency");

  std::vector<Tensor> parents{x, w};
  if (bias.defined()) parents.push_back(bias);
  Tensor out = Tensor::from_op({B, Co, To, Fo}, std::move(parents));

  const ConvGeom geom{Ci,       T,        F,     To,    Fo,    kT, kF,
                      stride_t, stride_f, dil_t, dil_f, -static_cast<ll>(pad.t_lo),
                      -static_cast<ll>(pad.f_lo)};

  // a 1x1 kernel at unit stride reads x as its own column matrix
  const bool pointwise = kT == 1 && kF == 1 && stride_t == 1 && stride_f == 1 && dil_t == 1 &&
                         dil_f == 1 && pad.t_lo == 0 && pad.t_hi == 0 && pad.f_lo == 0 &&
                         pad.f_hi == 0;

  const std::size_t CKK = geom.rows(), N = geom.cols();
  const double* px = x.data().data();
  const double* pw = w.data().data();
  double* po = out.data().data();

  if (bias.defined()) add_bias_plane(po, bias.data().data(), B, Co, N);

  std::vector<double> col(pointwise ? 0 : CKK * N);
  CMapRM Wm(pw, static_cast<Eigen::Index>(Co), static_cast<Eigen::Index>(CKK));
  for (std::size_t b = 0; b < B; ++b) {
    const double* colp = px + b * Ci * T * F;
    if (!pointwise) {
      im2col(geom, colp, col.data());
      colp = col.data();
    }
    CMapRM Cm(colp, static_cast<Eigen::Index>(CKK), static_cast<Eigen::Index>(N));
    MapRM Om(po + b * Co * N, static_cast<Eigen::Index>(Co), static_cast<Eigen::Index>(N));
    if (bias.defined())
      Om.noalias() += Wm * Cm;
    else
      Om.noalias() = Wm * Cm;
  }

  if (out.requires_grad()) {
    TensorImpl* oi = out.impl();
    TensorImpl* xi = x.impl();
    TensorImpl* wi = w.impl();
    TensorImpl* bi = bias.defined() ? bias.impl() : nullptr;
    out.set_backprop([oi, xi, wi, bi, geom, pointwise, B, Ci, Co, T, F]() {
      const std::size_t CKK2 = geom.rows(), N2 = geom.cols();
      const double* g = oi->grad.data();
      const double* px2 = xi->data.data();
      const double* pw2 = wi->data.data();

      if (bi && bi->requires_grad) bias_backward(g, bi->grad.data(), B, Co, N2);

      std::vector<double> col(pointwise ? 0 : CKK2 * N2);
      std::vector<double> tmp(!pointwise && xi->requires_grad ? CKK2 * N2 : 0);
      CMapRM Wm(pw2, static_cast<Eigen::Index>(Co), static_cast<Eigen::Index>(CKK2));
      for (std::size_t b = 0; b < B; ++b) {
        CMapRM Gm(g + b * Co * N2, static_cast<Eigen::Index>(Co), static_cast<Eigen::Index>(N2));
        if (wi->requires_grad) {
          const double* colp = px2 + b * Ci * T * F;
          if (!pointwise) {
            im2col(geom, colp, col.data());
            colp = col.data();
          }
          CMapRM Cm(colp, static_cast<Eigen::Index>(CKK2), static_cast<Eigen::Index>(N2));
          MapRM gWm(wi->grad.data(), static_cast<Eigen::Index>(Co),
                    static_cast<Eigen::Index>(CKK2));
          gWm.noalias() += Gm * Cm.transpose();
        }
        if (xi->requires_grad) {
          if (pointwise) {
            MapRM dXm(xi->grad.data() + b * Ci * T * F, static_cast<Eigen::Index>(CKK2),
                      static_cast<Eigen::Index>(N2));
            dXm.noalias() += Wm.transpose() * Gm;
          } else {
            MapRM Tm(tmp.data(), static_cast<Eigen::Index>(CKK2), static_cast<Eigen::Index>(N2));
            Tm.noalias() = Wm.transpose() * Gm;
            col2im(geom, tmp.data(), xi->grad.data() + b * Ci * T * F);
          }
        }
      }
    });
  }
  return out;
}

Tensor conv_transpose2d(const Tensor& x, const Tensor& w, const Tensor& bias, std::size_t stride_t,
                        std::size_t stride_f, const Pad2& trim, std::size_t extra_t,
                        std::size_t extra_f) {
  if (x.rank() != 4 || w.rank() != 4)
    throw ShapeError("conv_transpose2d: x " + shape_str(x.shape()) + " and w " +
                     shape_str(w.shape()) + " must be rank 4");
  const std::size_t B = x.dim(0), Ci = x.dim(1), Ti = x.dim(2), Fi = x.dim(3);
  const std::size_t Co = w.dim(1), kT = w.dim(2), kF = w.dim(3);
  if (w.dim(0) != Ci)
    throw ShapeError("conv_transpose2d: input channels " + std::to_string(Ci) + " vs kernel " +
                     shape_str(w.shape()));
  if (bias.defined() && bias.numel() != Co)
    throw ShapeError("conv_transpose2d: bias length " + std::to_string(bias.numel()) + " vs " +
                     std::to_string(Co) + " output channels");
  if (stride_t == 0 || stride_f == 0)
    throw ConfigError("conv_transpose2d: stride must be positive");

  const ll To_ll = static_cast<ll>(Ti - 1) * static_cast<ll>(stride_t) + static_cast<ll>(kT) -
                   static_cast<ll>(trim.t_lo + trim.t_hi) + static_cast<ll>(extra_t);
  const ll Fo_ll = static_cast<ll>(Fi - 1) * static_cast<ll>(stride_f) + static_cast<ll>(kF) -
                   static_cast<ll>(trim.f_lo + trim.f_hi) + static_cast<ll>(extra_f);
  if (To_ll < 1 || Fo_ll < 1)
    throw ShapeError("conv_transpose2d: trims leave no output for input " + shape_str(x.shape()));
  const std::size_t To = static_cast<std::size_t>(To_ll);
  const std::size_t Fo = static_cast<std::size_t>(Fo_ll);

  std::vector<Tensor> parents{x, w};
  if (bias.defined()) parents.push_back(bias);
  Tensor out = Tensor::from_op({B, Co, To, Fo}, std::move(parents));

  // Source map is the output plane; the column grid walks the input.
  const ConvGeom geom{Co,       To,       Fo, Ti, Fi, kT, kF,
                      stride_t, stride_f, 1,  1,  -static_cast<ll>(trim.t_lo),
                      -static_cast<ll>(trim.f_lo)};

  const std::size_t CKK = geom.rows(), M = geom.cols();  // M = Ti*Fi
  const double* px = x.data().data();
  const double* pw = w.data().data();
  double* po = out.data().data();

  if (bias.defined())
    add_bias_plane(po, bias.data().data(), B, Co, To * Fo);
  else
    std::fill(po, po + B * Co * To * Fo, 0.0);

  std::vector<double> tmp(CKK * M);
  CMapRM Wm(pw, static_cast<Eigen::Index>(Ci), static_cast<Eigen::Index>(CKK));
  for (std::size_t b = 0; b < B; ++b) {
    CMapRM Xm(px + b * Ci * M, static_cast<Eigen::Index>(Ci), static_cast<Eigen::Index>(M));
    MapRM Tm(tmp.data(), static_cast<Eigen::Index>(CKK), static_cast<Eigen::Index>(M));
    Tm.noalias() = Wm.transpose() * Xm;
    col2im(geom, tmp.data(), po + b * Co * To * Fo);
  }

  if (out.requires_grad()) {
    TensorImpl* oi = out.impl();
    TensorImpl* xi = x.impl();
    TensorImpl* wi = w.impl();
    TensorImpl* bi = bias.defined() ? bias.impl() : nullptr;
    out.set_backprop([oi, xi, wi, bi, geom, B, Ci, Co, To, Fo]() {
      const std::size_t CKK2 = geom.rows(), M2 = geom.cols();
      const double* g = oi->grad.data();
      const double* px2 = xi->data.data();
      const double* pw2 = wi->data.data();

      if (bi && bi->requires_grad) bias_backward(g, bi->grad.data(), B, Co, To * Fo);

      std::vector<double> colg(CKK2 * M2);
      CMapRM Wm(pw2, static_cast<Eigen::Index>(Ci), static_cast<Eigen::Index>(CKK2));
      for (std::size_t b = 0; b < B; ++b) {
        im2col(geom, g + b * Co * To * Fo, colg.data());
        CMapRM Gm(colg.data(), static_cast<Eigen::Index>(CKK2), static_cast<Eigen::Index>(M2));
        if (xi->requires_grad) {
          MapRM dXm(xi->grad.data() + b * Ci * M2, static_cast<Eigen::Index>(Ci),
                    static_cast<Eigen::Index>(M2));
          dXm.noalias() += Wm * Gm;
        }
        if (wi->requires_grad) {
          CMapRM Xm(px2 + b * Ci * M2, static_cast<Eigen::Index>(Ci),
                    static_cast<Eigen::Index>(M2));
          MapRM gWm(wi->grad.data(), static_cast<Eigen::Index>(Ci),
                    static_cast<Eigen::Index>(CKK2));
          gWm.noalias() += Xm * Gm.transpose();
        }
      }
    });
  }
  return out;
}

}  // namespace darcn
