#include "darcn/layers.hpp"

#include <cmath>

#include "darcn/errors.hpp"

namespace darcn {

namespace {

Tensor xavier(const Shape& shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t = Tensor::uniform(shape, rng, -a, a);
  t.set_requires_grad(true);
  return t;
}

Tensor zero_param(const Shape& shape) {
  Tensor t = Tensor::zeros(shape);
  t.set_requires_grad(true);
  return t;
}

}  // namespace

Conv2d::Conv2d(std::size_t cin, std::size_t cout, std::size_t kt, std::size_t kf, std::size_t st,
               std::size_t sf, Pad2 pad, Rng& rng, bool bias, std::size_t dt, std::size_t df)
    : st_(st), sf_(sf), dt_(dt), df_(df), pad_(pad) {
  w = xavier({cout, cin, kt, kf}, cin * kt * kf, cout * kt * kf, rng);
  if (bias) b = zero_param({cout});
}

Tensor Conv2d::forward(const Tensor& x) const {
  return conv2d(x, w, b, st_, sf_, pad_, dt_, df_);
}

void Conv2d::collect(const std::string& prefix, ParamList& out) {
  out.push_back({prefix + ".w", w, true});
  if (b.defined()) out.push_back({prefix + ".b", b, true});
}

std::size_t Conv2d::param_count() const {
  return w.numel() + (b.defined() ? b.numel() : 0);
}

Deconv2d::Deconv2d(std::size_t cin, std::size_t cout, std::size_t kt, std::size_t kf,
                   std::size_t st, std::size_t sf, Pad2 trim, std::size_t extra_t,
                   std::size_t extra_f, Rng& rng, bool bias)
    : st_(st), sf_(sf), extra_t_(extra_t), extra_f_(extra_f), trim_(trim) {
  w = xavier({cin, cout, kt, kf}, cin * kt * kf, cout * kt * kf, rng);
  if (bias) b = zero_param({cout});
}

Tensor Deconv2d::forward(const Tensor& x) const {
  return conv_transpose2d(x, w, b, st_, sf_, trim_, extra_t_, extra_f_);
}

void Deconv2d::collect(const std::string& prefix, ParamList& out) {
  out.push_back({prefix + ".w", w, true});
  if (b.defined()) out.push_back({prefix + ".b", b, true});
}

std::size_t Deconv2d::param_count() const {
  return w.numel() + (b.defined() ? b.numel() : 0);
}

BatchNorm2d::BatchNorm2d(std::size_t channels) {
  gamma = Tensor::ones({channels});
  gamma.set_requires_grad(true);
  beta = zero_param({channels});
  running_mean = Tensor::zeros({channels});
  running_var = Tensor::full({channels}, -1.0);
}

bool BatchNorm2d::has_stats() const {
  return running_var.defined() && !running_var.data().empty() && running_var.data()[0] >= 0.0;
}

Tensor BatchNorm2d::forward(const Tensor& x, bool train) {
  if (!train && !has_stats())
    throw ContractError("batch norm: eval mode requested before any statistics were recorded");
  const double momentum = (train && !has_stats()) ? 0.0 : 0.9;
  return batch_norm(x, gamma, beta, running_mean.data(), running_var.data(), train, momentum);
}

void BatchNorm2d::collect(const std::string& prefix, ParamList& out) {
  out.push_back({prefix + ".gamma", gamma, true});
  out.push_back({prefix + ".beta", beta, true});
  out.push_back({prefix + ".running_mean", running_mean, false});
  out.push_back({prefix + ".running_var", running_var, false});
}

std::size_t BatchNorm2d::param_count() const { return gamma.numel() + beta.numel(); }

ConvGruCell::ConvGruCell(std::size_t channels, Rng& rng) {
  const Pad2 none{};
  wz = Conv2d(channels, channels, 1, 1, 1, 1, none, rng, true);
  wr = Conv2d(channels, channels, 1, 1, 1, 1, none, rng, true);
  wn = Conv2d(channels, channels, 1, 1, 1, 1, none, rng, true);
  uz = Conv2d(channels, channels, 1, 1, 1, 1, none, rng, false);
  ur = Conv2d(channels, channels, 1, 1, 1, 1, none, rng, false);
  un = Conv2d(channels, channels, 1, 1, 1, 1, none, rng, false);
}

Tensor ConvGruCell::step(const Tensor& h_hat, const Tensor& h_prev) const {
  if (h_hat.shape() != h_prev.shape())
    throw ShapeError("conv gru: candidate " + shape_str(h_hat.shape()) + " vs state " +
                     shape_str(h_prev.shape()));
  Tensor z = sigmoid(add(wz.forward(h_hat), uz.forward(h_prev)));
  Tensor r = sigmoid(add(wr.forward(h_hat), ur.forward(h_prev)));
  Tensor n = tanh_act(add(wn.forward(h_hat), un.forward(mul(r, h_prev))));
  return add(mul(rsub_scalar(1.0, z), h_hat), mul(z, n));
}

void ConvGruCell::collect(const std::string& prefix, ParamList& out) {
  wz.collect(prefix + ".wz", out);
  wr.collect(prefix + ".wr", out);
  wn.collect(prefix + ".wn", out);
  uz.collect(prefix + ".uz", out);
  ur.collect(prefix + ".ur", out);
  un.collect(prefix + ".un", out);
}

AttentionGate::AttentionGate(std::size_t cp, std::size_t cq, Rng& rng) {
  inter_channels = std::max<std::size_t>(cq / 2, 4);
  const Pad2 none{};
  wp = Conv2d(cp, inter_channels, 1, 1, 1, 1, none, rng, true);
  wq = Conv2d(cq, inter_channels, 1, 1, 1, 1, none, rng, true);
  wr = Conv2d(inter_channels, 1, 1, 1, 1, 1, none, rng, true);
  bnp = BatchNorm2d(inter_channels);
  bnq = BatchNorm2d(inter_channels);
  bnr = BatchNorm2d(1);
}

Tensor AttentionGate::forward(const Tensor& p, const Tensor& q, bool train) {
  if (p.dim(2) != q.dim(2) || p.dim(3) != q.dim(3))
    throw ShapeError("attention gate: p " + shape_str(p.shape()) + " vs q " +
                     shape_str(q.shape()) + " spatial mismatch");
  Tensor a = relu(add(bnp.forward(wp.forward(p), train), bnq.forward(wq.forward(q), train)));
  Tensor g = sigmoid(bnr.forward(wr.forward(a), train));
  return mul(q, g);
}

void AttentionGate::collect(const std::string& prefix, ParamList& out) {
  wp.collect(prefix + ".wp", out);
  wq.collect(prefix + ".wq", out);
  wr.collect(prefix + ".wr", out);
  bnp.collect(prefix + ".bnp", out);
  bnq.collect(prefix + ".bnq", out);
  bnr.collect(prefix + ".bnr", out);
}

GluBlock::GluBlock(std::size_t channels, std::size_t width, std::size_t kernel,
                   std::size_t dilation, Rng& rng) {
  if (kernel == 0 || dilation == 0) throw ConfigError("glu block: kernel and dilation must be >= 1");
  const Pad2 causal{(kernel - 1) * dilation, 0, 0, 0};
  lin = Conv2d(channels, width, kernel, 1, 1, 1, causal, rng, true, dilation, 1);
  gate = Conv2d(channels, width, kernel, 1, 1, 1, causal, rng, true, dilation, 1);
  proj = Conv2d(width, channels, 1, 1, 1, 1, Pad2{}, rng, true);
}

Tensor GluBlock::forward(const Tensor& x) const {
  Tensor in = x;
  const bool rank3 = x.rank() == 3;
  if (rank3) in = reshape(x, {x.dim(0), x.dim(1), x.dim(2), 1});
  Tensor h = mul(lin.forward(in), sigmoid(gate.forward(in)));
  Tensor out = add(in, proj.forward(h));
  if (rank3) out = reshape(out, x.shape());
  return out;
}

void GluBlock::collect(const std::string& prefix, ParamList& out) {
  lin.collect(prefix + ".lin", out);
  gate.collect(prefix + ".gate", out);
  proj.collect(prefix + ".proj", out);
}

}  // namespace darcn
