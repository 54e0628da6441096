#include "darcn/model.hpp"

#include <algorithm>
#include <map>

#include "darcn/checkpoint.hpp"
#include "darcn/errors.hpp"

namespace darcn {

namespace {

// Per-side frequency padding that maps l_in to l_out under (kernel, stride).
Pad2 enc_pad(std::size_t l_in, std::size_t l_out, std::size_t kt, std::size_t kf,
             std::size_t sf) {
  const long long total =
      (static_cast<long long>(l_out) - 1) * static_cast<long long>(sf) +
      static_cast<long long>(kf) - static_cast<long long>(l_in);
  if (total < 0 || total > 2 * static_cast<long long>(kf - 1))
    throw ConfigError("arch: no valid padding maps width " + std::to_string(l_in) + " to " +
                      std::to_string(l_out) + " with kernel " + std::to_string(kf) +
                      " stride " + std::to_string(sf));
  const std::size_t lo = static_cast<std::size_t>(total) / 2;
  const std::size_t hi = static_cast<std::size_t>(total) - lo;
  return Pad2{kt - 1, 0, lo, hi};
}

struct DecShape {
  Pad2 trim;
  std::size_t extra_t = 0, extra_f = 0;
};

// Trim/expansion that maps l_in back up to l_out; time axis drops its one
// trailing sample to stay causal.
DecShape dec_shape(std::size_t l_in, std::size_t l_out, std::size_t kt, std::size_t kf,
                   std::size_t sf) {
  DecShape d;
  d.trim.t_lo = 0;
  d.trim.t_hi = kt - 1;
  const long long natural =
      (static_cast<long long>(l_in) - 1) * static_cast<long long>(sf) + static_cast<long long>(kf);
  const long long t = natural - static_cast<long long>(l_out);
  if (t >= 0) {
    d.trim.f_lo = static_cast<std::size_t>(t) / 2;
    d.trim.f_hi = static_cast<std::size_t>(t) - d.trim.f_lo;
  } else {
    d.extra_f = static_cast<std::size_t>(-t);
  }
  return d;
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError("arch: " + msg);
}

}  // namespace

ArchConfig ArchConfig::paper() { return ArchConfig{}; }

ArchConfig ArchConfig::tiny() {
  ArchConfig c;
  c.feature_len = 17;
  c.agm_enc_ch = {2, 4, 4, 8, 8};
  c.agm_dec_ch = {8, 8, 4, 4};
  c.nrm_enc_ch = {2, 2, 4, 4, 8, 8};
  c.nrm_dec_ch = {8, 4, 4, 2, 2, 1};
  c.f_chain = {17, 9, 5, 3, 2, 1, 1};
  c.glu_width = 4;
  c.bottleneck = 8;
  return c;
}

ArchConfig ArchConfig::from_preset(const std::string& name) {
  if (name == "paper") return paper();
  if (name == "tiny") return tiny();
  throw ConfigError("unknown preset '" + name + "' (expected paper or tiny)");
}

ArchConfig ArchConfig::for_feature_len(std::size_t f) {
  if (f == paper().feature_len) return paper();
  if (f == tiny().feature_len) return tiny();
  throw ContractError("no preset has feature length " + std::to_string(f));
}

StftConfig ArchConfig::stft() const {
  StftConfig s;
  s.fft_size = (feature_len - 1) * 2;
  s.win_length = s.fft_size;
  s.hop = s.fft_size / 2;
  return s;
}

void ArchConfig::validate() const {
  require(stages >= 1, "stage count must be >= 1");
  require(feature_len >= 2 && feature_len % 2 == 1, "feature length must be odd and >= 2");
  require(!f_chain.empty() && f_chain.front() == feature_len,
          "frequency chain must start at the feature length");
  require(f_chain.size() == nrm_enc_ch.size() + 1, "frequency chain must cover every encoder layer");
  require(agm_enc_ch.size() + 1 == nrm_enc_ch.size(),
          "generator encoder must be one layer shorter than the reduction encoder");
  require(agm_dec_ch.size() + 1 == agm_enc_ch.size(),
          "generator decoder must be one layer shorter than its encoder");
  require(nrm_dec_ch.size() == nrm_enc_ch.size(), "reduction decoder must mirror its encoder");
  require(nrm_dec_ch.back() == 1, "reduction decoder must end in one channel");
  require(bottleneck == nrm_enc_ch.back() * f_chain.back(),
          "bottleneck width must equal last encoder channels times last width");
  require(glu_dilations.size() == glu_count, "one dilation per glu block");
  require(kt >= 1 && kf >= 1 && st == 1 && sf >= 1, "unsupported kernel/stride");
  for (std::size_t i = 0; i + 1 < f_chain.size(); ++i)
    enc_pad(f_chain[i], f_chain[i + 1], kt, kf, sf);  // throws when inconsistent
}

DarcnModel::DarcnModel(const ArchConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  const auto& f = cfg_.f_chain;
  const std::size_t aE = cfg_.agm_enc_ch.size();
  const std::size_t aD = cfg_.agm_dec_ch.size();
  const std::size_t nE = cfg_.nrm_enc_ch.size();
  const std::size_t nD = cfg_.nrm_dec_ch.size();
  const std::size_t G = aD + 1;  // gated encoder layers

  for (std::size_t i = 0; i < aE; ++i) {
    const std::size_t cin = i == 0 ? 2 : cfg_.agm_enc_ch[i - 1];
    agm_enc_.emplace_back(cin, cfg_.agm_enc_ch[i], cfg_.kt, cfg_.kf, cfg_.st, cfg_.sf,
                          enc_pad(f[i], f[i + 1], cfg_.kt, cfg_.kf, cfg_.sf), rng);
    agm_enc_bn_.emplace_back(cfg_.agm_enc_ch[i]);
  }
  for (std::size_t j = 0; j < aD; ++j) {
    const std::size_t cin =
        j == 0 ? cfg_.agm_enc_ch[aE - 1] : cfg_.agm_dec_ch[j - 1] + cfg_.agm_enc_ch[aE - 1 - j];
    const DecShape ds = dec_shape(f[aE - j], f[aE - 1 - j], cfg_.kt, cfg_.kf, cfg_.sf);
    agm_dec_.emplace_back(cin, cfg_.agm_dec_ch[j], cfg_.kt, cfg_.kf, cfg_.st, cfg_.sf, ds.trim,
                          ds.extra_t, ds.extra_f, rng);
    agm_dec_bn_.emplace_back(cfg_.agm_dec_ch[j]);
  }
  for (std::size_t k = 0; k < G; ++k) {
    const std::size_t cin = k == 0 ? cfg_.agm_enc_ch[aE - 1] : cfg_.agm_dec_ch[k - 1];
    const std::size_t cout = cfg_.nrm_enc_ch[G - 1 - k];
    heads_.emplace_back(cin, cout, 1, 1, 1, 1, Pad2{}, rng);
  }

  const std::size_t cs = cfg_.nrm_enc_ch[0];
  srnn_conv_ = Conv2d(2, cs, cfg_.kt, cfg_.kf, 1, 1,
                      Pad2{cfg_.kt - 1, 0, (cfg_.kf - 1) / 2, cfg_.kf / 2}, rng);
  srnn_bn_ = BatchNorm2d(cs);
  gru_ = ConvGruCell(cs, rng);

  for (std::size_t i = 0; i < nE; ++i) {
    const std::size_t cin = i == 0 ? cs : cfg_.nrm_enc_ch[i - 1];
    nrm_enc_.emplace_back(cin, cfg_.nrm_enc_ch[i], cfg_.kt, cfg_.kf, cfg_.st, cfg_.sf,
                          enc_pad(f[i], f[i + 1], cfg_.kt, cfg_.kf, cfg_.sf), rng);
    nrm_enc_bn_.emplace_back(cfg_.nrm_enc_ch[i]);
  }
  for (std::size_t g = 0; g < cfg_.glu_count; ++g)
    glus_.emplace_back(cfg_.bottleneck, cfg_.glu_width, cfg_.glu_kernel, cfg_.glu_dilations[g],
                       rng);
  for (std::size_t j = 0; j < nD; ++j) {
    const std::size_t cin = j == 0 ? cfg_.nrm_enc_ch[nE - 1] * 2
                                   : cfg_.nrm_dec_ch[j - 1] + cfg_.nrm_enc_ch[nE - 1 - j];
    const DecShape ds = dec_shape(f[nE - j], f[nE - 1 - j], cfg_.kt, cfg_.kf, cfg_.sf);
    nrm_dec_.emplace_back(cin, cfg_.nrm_dec_ch[j], cfg_.kt, cfg_.kf, cfg_.st, cfg_.sf, ds.trim,
                          ds.extra_t, ds.extra_f, rng);
    if (j + 1 < nD) nrm_dec_bn_.emplace_back(cfg_.nrm_dec_ch[j]);
  }
  for (std::size_t k = 0; k < G; ++k)
    ags_.emplace_back(cfg_.nrm_dec_ch[k], cfg_.nrm_enc_ch[nE - 2 - k], rng);
  out_conv_ = Conv2d(cfg_.nrm_dec_ch[nD - 1], 1, 1, 1, 1, 1, Pad2{}, rng);
}

std::vector<Tensor> DarcnModel::agm_forward(const Tensor& x2, bool train) {
  const std::size_t aE = agm_enc_.size();
  std::vector<Tensor> skips;
  Tensor e = x2;
  for (std::size_t i = 0; i < aE; ++i) {
    e = elu(agm_enc_bn_[i].forward(agm_enc_[i].forward(e), train));
    skips.push_back(e);
  }
  std::vector<Tensor> maps;
  maps.push_back(sigmoid(heads_[0].forward(skips[aE - 1])));
  Tensor d = skips[aE - 1];
  for (std::size_t j = 0; j < agm_dec_.size(); ++j) {
    Tensor in = j == 0 ? d : concat({d, skips[aE - 1 - j]}, 1);
    d = elu(agm_dec_bn_[j].forward(agm_dec_[j].forward(in), train));
    maps.push_back(sigmoid(heads_[j + 1].forward(d)));
  }
  std::reverse(maps.begin(), maps.end());  // index k now gates encoder layer k+1
  if (force_unit_gates)
    for (Tensor& m : maps) m = Tensor::ones(m.shape());
  return maps;
}

DarcnModel::NrmOut DarcnModel::nrm_forward(const Tensor& x2, const std::vector<Tensor>& gates,
                                           const Tensor& state, bool train) {
  const std::size_t nE = nrm_enc_.size();
  const std::size_t nD = nrm_dec_.size();
  const std::size_t G = ags_.size();

  Tensor h_hat = elu(srnn_bn_.forward(srnn_conv_.forward(x2), train));
  Tensor h = gru_.step(h_hat, state);

  std::vector<Tensor> gated(G);
  Tensor e = h;
  Tensor e_last;
  for (std::size_t i = 0; i < nE; ++i) {
    e = elu(nrm_enc_bn_[i].forward(nrm_enc_[i].forward(e), train));
    if (i < G) {
      gated[i] = mul(e, gates[i]);
      e = gated[i];
    } else {
      e_last = e;
    }
  }

  const std::size_t B = e_last.dim(0), C = e_last.dim(1), T = e_last.dim(2), F = e_last.dim(3);
  Tensor flat = reshape(permute(e_last, {0, 2, 1, 3}), {B, T, C * F});
  Shape bshape = flat.shape();
  Tensor g = reshape(permute(flat, {0, 2, 1}), {B, C * F, T, 1});
  for (const GluBlock& glu : glus_) g = glu.forward(g);
  Tensor u = permute(reshape(permute(reshape(g, {B, C * F, T}), {0, 2, 1}), {B, T, C, F}),
                     {0, 2, 1, 3});

  Tensor d;
  for (std::size_t j = 0; j < nD; ++j) {
    Tensor in;
    if (j == 0) {
      in = concat({u, e_last}, 1);
    } else {
      Tensor skip = ags_[j - 1].forward(d, gated[G - j], train);
      in = concat({d, skip}, 1);
    }
    d = nrm_dec_[j].forward(in);
    if (j + 1 < nD) d = elu(nrm_dec_bn_[j].forward(d, train));
  }
  NrmOut out;
  out.estimate = softplus(out_conv_.forward(d));
  out.state = h;
  out.bottleneck_shape = std::move(bshape);
  return out;
}

std::vector<StageTrace> DarcnModel::forward(const Tensor& input, std::size_t stages, bool train) {
  if (stages < 1) throw ConfigError("forward: stage count must be >= 1");
  Tensor mag, est;
  if (input.rank() == 3) {
    mag = reshape(input, {input.dim(0), 1, input.dim(1), input.dim(2)});
    est = mag;
  } else if (input.rank() == 4 && input.dim(3) == 2) {
    Tensor ch = permute(input, {0, 3, 1, 2});  // [B,2,T,F]
    const std::size_t B = ch.dim(0), T = ch.dim(2), F = ch.dim(3);
    mag = slice(ch, {{0, B}, {0, 1}, {0, T}, {0, F}});
    est = slice(ch, {{0, B}, {1, 2}, {0, T}, {0, F}});
  } else {
    throw ShapeError("forward: expected [B,T,F] or [B,T,F,2], got " + shape_str(input.shape()));
  }
  if (mag.dim(3) != cfg_.feature_len)
    throw ContractError("forward: feature length " + std::to_string(mag.dim(3)) +
                        " does not match configured " + std::to_string(cfg_.feature_len));

  const std::size_t B = mag.dim(0), T = mag.dim(2), F = mag.dim(3);
  Tensor h = Tensor::zeros({B, cfg_.nrm_enc_ch[0], T, F});

  std::vector<StageTrace> traces;
  for (std::size_t s = 0; s < stages; ++s) {
    Tensor x2 = concat({mag, est}, 1);
    std::vector<Tensor> gates = agm_forward(x2, train);
    NrmOut o = nrm_forward(x2, gates, h, train);
    if (o.state.shape() != h.shape())
      throw ContractError("forward: recurrent state changed shape between stages");
    h = o.state;
    est = o.estimate;
    StageTrace tr;
    tr.estimate = reshape(est, {B, T, F});
    tr.attention = std::move(gates);
    tr.bottleneck_shape = std::move(o.bottleneck_shape);
    traces.push_back(std::move(tr));
  }
  return traces;
}

Tensor DarcnModel::accumulated_loss(std::vector<StageTrace>& traces, const Tensor& target,
                                    const Tensor& mask) {
  if (traces.empty()) throw ContractError("loss: no stage traces");
  const Shape& es = traces.front().estimate.shape();
  if (target.shape() != es)
    throw ShapeError("loss: target " + shape_str(target.shape()) + " vs estimate " +
                     shape_str(es));
  double denom = 0.0;
  Tensor mask3;
  if (mask.defined()) {
    if (mask.rank() != 2 || mask.dim(0) != es[0] || mask.dim(1) != es[1])
      throw ShapeError("loss: mask " + shape_str(mask.shape()) + " vs estimate " + shape_str(es));
    for (double v : mask.data()) denom += v;
    denom *= static_cast<double>(es[2]);
    if (denom <= 0.0) throw ContractError("loss: mask selects no frames");
    mask3 = reshape(mask, {es[0], es[1], 1});
  }

  Tensor total;
  for (StageTrace& tr : traces) {
    Tensor diff = sub(tr.estimate, target);
    Tensor sq = mul(diff, diff);
    Tensor d = mask.defined() ? mul_scalar(sum(mul(sq, mask3)), 1.0 / denom) : mean(sq);
    tr.stage_loss = d.item();
    total = total.defined() ? add(total, d) : d;
  }
  return total;
}

ParamList DarcnModel::parameters() {
  ParamList out;
  for (std::size_t i = 0; i < agm_enc_.size(); ++i) {
    agm_enc_[i].collect("agm.enc" + std::to_string(i + 1), out);
    agm_enc_bn_[i].collect("agm.enc" + std::to_string(i + 1) + ".bn", out);
  }
  for (std::size_t j = 0; j < agm_dec_.size(); ++j) {
    agm_dec_[j].collect("agm.dec" + std::to_string(j + 1), out);
    agm_dec_bn_[j].collect("agm.dec" + std::to_string(j + 1) + ".bn", out);
  }
  for (std::size_t k = 0; k < heads_.size(); ++k)
    heads_[k].collect("agm.gate" + std::to_string(k + 1), out);
  srnn_conv_.collect("nrm.srnn.conv", out);
  srnn_bn_.collect("nrm.srnn.bn", out);
  gru_.collect("nrm.srnn.gru", out);
  for (std::size_t i = 0; i < nrm_enc_.size(); ++i) {
    nrm_enc_[i].collect("nrm.enc" + std::to_string(i + 1), out);
    nrm_enc_bn_[i].collect("nrm.enc" + std::to_string(i + 1) + ".bn", out);
  }
  for (std::size_t g = 0; g < glus_.size(); ++g)
    glus_[g].collect("nrm.glu" + std::to_string(g + 1), out);
  for (std::size_t j = 0; j < nrm_dec_.size(); ++j) {
    nrm_dec_[j].collect("nrm.dec" + std::to_string(j + 1), out);
    if (j < nrm_dec_bn_.size())
      nrm_dec_bn_[j].collect("nrm.dec" + std::to_string(j + 1) + ".bn", out);
  }
  for (std::size_t k = 0; k < ags_.size(); ++k)
    ags_[k].collect("nrm.ag" + std::to_string(k + 1), out);
  out_conv_.collect("nrm.out", out);
  return out;
}

ParamList DarcnModel::trainable_parameters() {
  ParamList all = parameters();
  ParamList out;
  for (NamedParam& p : all)
    if (p.trainable) out.push_back(std::move(p));
  return out;
}

std::vector<LayerCount> DarcnModel::count_parameters(std::size_t* total) {
  ParamList all = parameters();
  std::vector<LayerCount> rows;
  std::size_t sum = 0;
  for (const NamedParam& p : all) {
    if (!p.trainable) continue;
    const std::string layer = p.name.substr(0, p.name.rfind('.'));
    if (rows.empty() || rows.back().name != layer) rows.push_back({layer, 0});
    rows.back().count += p.tensor.numel();
    sum += p.tensor.numel();
  }
  if (total) *total = sum;
  return rows;
}

LoadedModel load_model_checkpoint(const std::string& path) {
  Checkpoint c = load_checkpoint(path);
  LoadedModel lm;
  lm.arch = ArchConfig::for_feature_len(
      static_cast<std::size_t>(find_scalar(c, "cfg.feature_len")));
  lm.arch.stages = static_cast<std::size_t>(find_scalar(c, "cfg.stages"));
  Rng rng(0);
  lm.model = std::make_unique<DarcnModel>(lm.arch, rng);
  ParamList params = lm.model->parameters();
  restore_params(params, c);
  return lm;
}

std::vector<double> enhance_samples(DarcnModel& model, const std::vector<double>& x) {
  const ArchConfig& arch = model.config();
  const StftConfig sc = arch.stft();
  const Spectrogram noisy = stft(x, sc);
  const MagnitudeSpectrogram mag = magnitude(noisy);

  Tensor input = Tensor::zeros({1, mag.frames, mag.bins});
  input.data() = mag.v;
  NoGradGuard ng;
  auto traces = model.forward(input, arch.stages, false);
  const Tensor& est = traces.back().estimate;

  MagnitudeSpectrogram emag(mag.frames, mag.bins);
  emag.v = est.data();
  return istft(compose(emag, noisy), sc, x.size());
}

}  // namespace darcn
