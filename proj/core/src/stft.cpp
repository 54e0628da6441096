#include "darcn/stft.hpp"

#include <algorithm>
#include <cmath>

#include "darcn/errors.hpp"

namespace darcn {

void StftConfig::validate() const {
  if (fft_size == 0 || fft_size % 2 != 0)
    throw ConfigError("stft: fft_size must be positive and even, got " + std::to_string(fft_size));
  if (win_length == 0 || win_length > fft_size)
    throw ConfigError("stft: win_length " + std::to_string(win_length) +
                      " must be in [1, fft_size " + std::to_string(fft_size) + "]");
  if (hop == 0 || hop > win_length)
    throw ConfigError("stft: hop " + std::to_string(hop) + " must be in [1, win_length " +
                      std::to_string(win_length) + "]");
  if (sample_rate == 0) throw ConfigError("stft: sample_rate must be positive");
}

std::vector<double> hamming_periodic(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.54 - 0.46 * std::cos(2.0 * M_PI * static_cast<double>(i) / static_cast<double>(n));
  return w;
}

Spectrogram stft(const std::vector<double>& x, const StftConfig& cfg) {
  cfg.validate();
  if (x.empty()) throw InputError("stft: empty waveform");

  std::vector<double> padded;
  const std::vector<double>* src = &x;
  if (x.size() < cfg.win_length) {
    padded = x;
    padded.resize(cfg.win_length, 0.0);
    src = &padded;
  }
  const std::size_t T = 1 + (src->size() - cfg.win_length) / cfg.hop;
  const std::vector<double> win = hamming_periodic(cfg.win_length);

  Spectrogram out(T, cfg.bins());
  std::vector<double> frame(cfg.fft_size);
  for (std::size_t t = 0; t < T; ++t) {
    const double* seg = src->data() + t * cfg.hop;
    for (std::size_t i = 0; i < cfg.win_length; ++i) frame[i] = seg[i] * win[i];
    std::fill(frame.begin() + cfg.win_length, frame.end(), 0.0);
    const std::vector<cplx> half = rfft(frame);
    std::copy(half.begin(), half.end(), out.v.begin() + t * out.bins);
  }
  return out;
}

std::vector<double> istft(const Spectrogram& s, const StftConfig& cfg, std::size_t target_len) {
  cfg.validate();
  if (s.frames == 0 || s.bins != cfg.bins())
    throw ContractError("istft: spectrogram " + std::to_string(s.frames) + "x" +
                        std::to_string(s.bins) + " does not match config bins " +
                        std::to_string(cfg.bins()));

  const std::size_t natural = (s.frames - 1) * cfg.hop + cfg.win_length;
  const std::vector<double> win = hamming_periodic(cfg.win_length);

  std::vector<double> acc(natural, 0.0);
  std::vector<double> norm(natural, 0.0);
  std::vector<cplx> half(s.bins);
  for (std::size_t t = 0; t < s.frames; ++t) {
    std::copy(s.v.begin() + t * s.bins, s.v.begin() + (t + 1) * s.bins, half.begin());
    const std::vector<double> frame = irfft(half, cfg.fft_size);
    const std::size_t base = t * cfg.hop;
    for (std::size_t i = 0; i < cfg.win_length; ++i) {
      acc[base + i] += frame[i] * win[i];
      norm[base + i] += win[i] * win[i];
    }
  }
  for (std::size_t i = 0; i < natural; ++i) acc[i] = norm[i] > 1e-12 ? acc[i] / norm[i] : 0.0;

  if (target_len != 0) acc.resize(target_len, 0.0);
  return acc;
}

MagnitudeSpectrogram magnitude(const Spectrogram& s) {
  MagnitudeSpectrogram m(s.frames, s.bins);
  for (std::size_t i = 0; i < s.v.size(); ++i) m.v[i] = std::abs(s.v[i]);
  return m;
}

Spectrogram compose(const MagnitudeSpectrogram& mag, const Spectrogram& phase_src) {
  if (mag.frames != phase_src.frames || mag.bins != phase_src.bins)
    throw ShapeError("compose: magnitude " + std::to_string(mag.frames) + "x" +
                     std::to_string(mag.bins) + " vs phase source " +
                     std::to_string(phase_src.frames) + "x" + std::to_string(phase_src.bins));
  Spectrogram out(mag.frames, mag.bins);
  for (std::size_t i = 0; i < out.v.size(); ++i) {
    const double a = std::abs(phase_src.v[i]);
    const cplx phasor = a > 0.0 ? phase_src.v[i] / a : cplx(1.0, 0.0);
    out.v[i] = mag.v[i] * phasor;
  }
  return out;
}

std::size_t covered_length(std::size_t frames, const StftConfig& cfg) {
  return frames == 0 ? 0 : (frames - 1) * cfg.hop + cfg.win_length;
}

MixResult mix_at_snr(const std::vector<double>& clean, const std::vector<double>& noise,
                     double snr_db) {
  if (clean.empty()) throw InputError("mix_at_snr: empty clean signal");
  if (noise.size() < clean.size())
    throw ContractError("mix_at_snr: noise length " + std::to_string(noise.size()) +
                        " shorter than clean length " + std::to_string(clean.size()));
  double ps = 0.0, pd = 0.0;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    ps += clean[i] * clean[i];
    pd += noise[i] * noise[i];
  }
  ps /= static_cast<double>(clean.size());
  pd /= static_cast<double>(clean.size());
  if (ps <= 0.0) throw InputError("mix_at_snr: clean signal has zero power");
  if (pd <= 0.0) throw InputError("mix_at_snr: noise segment has zero power");

  MixResult r;
  r.alpha = std::sqrt(ps / (pd * std::pow(10.0, snr_db / 10.0)));
  r.mixture.resize(clean.size());
  for (std::size_t i = 0; i < clean.size(); ++i) r.mixture[i] = clean[i] + r.alpha * noise[i];
  return r;
}

}  // namespace darcn
