#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "darcn/fft.hpp"

namespace darcn {

struct StftConfig {
  std::size_t sample_rate = 16000;
  std::size_t fft_size = 320;    // 20 ms at 16 kHz
  std::size_t win_length = 320;
  std::size_t hop = 160;         // 10 ms

  std::size_t bins() const { return fft_size / 2 + 1; }
  void validate() const;  // throws ConfigError on inconsistent values
};

// Periodic form: w[i] = 0.54 - 0.46 cos(2 pi i / n).
std::vector<double> hamming_periodic(std::size_t n);

// Row-major [frames][bins].
struct Spectrogram {
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::vector<cplx> v;

  Spectrogram() = default;
  Spectrogram(std::size_t t, std::size_t f) : frames(t), bins(f), v(t * f) {}
  cplx& at(std::size_t t, std::size_t f) { return v[t * bins + f]; }
  const cplx& at(std::size_t t, std::size_t f) const { return v[t * bins + f]; }
};

struct MagnitudeSpectrogram {
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::vector<double> v;

  MagnitudeSpectrogram() = default;
  MagnitudeSpectrogram(std::size_t t, std::size_t f) : frames(t), bins(f), v(t * f) {}
  double& at(std::size_t t, std::size_t f) { return v[t * bins + f]; }
  const double& at(std::size_t t, std::size_t f) const { return v[t * bins + f]; }
};

// Frames = 1 + floor((len - win) / hop), no centering; input shorter than one
// window is zero-padded up to it. Empty input is an error.
Spectrogram stft(const std::vector<double>& x, const StftConfig& cfg);

// Weighted overlap-add with per-sample squared-window normalization.
// target_len == 0 keeps the natural length (frames - 1) * hop + win.
std::vector<double> istft(const Spectrogram& s, const StftConfig& cfg, std::size_t target_len = 0);

MagnitudeSpectrogram magnitude(const Spectrogram& s);

// mag paired with the phase of phase_src; zero-magnitude source bins
// contribute a unit phasor.
Spectrogram compose(const MagnitudeSpectrogram& mag, const Spectrogram& phase_src);

// Samples covered by full analysis frames; metrics comparisons stop here.
std::size_t covered_length(std::size_t frames, const StftConfig& cfg);

// alpha scaling the noise so that 10 log10(P_s / (alpha^2 P_d)) == snr_db,
// powers averaged over the whole utterance.
struct MixResult {
  std::vector<double> mixture;
  double alpha = 0.0;
};
MixResult mix_at_snr(const std::vector<double>& clean, const std::vector<double>& noise,
                     double snr_db);

}  // namespace darcn
