#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "darcn/errors.hpp"
#include "darcn/rng.hpp"
#include "darcn/stft.hpp"

using namespace darcn;

namespace {

std::vector<double> random_wave(std::size_t n, Rng& rng) {
  std::vector<double> x(n);
  for (double& v : x) v = 0.3 * rng.normal();
  return x;
}

double snr_db_of(const std::vector<double>& ref, const std::vector<double>& est) {
  REQUIRE(ref.size() == est.size());
  double p = 0.0, e = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    p += ref[i] * ref[i];
    double d = ref[i] - est[i];
    e += d * d;
  }
  if (e == 0.0) return 300.0;
  return 10.0 * std::log10(p / e);
}

}  // namespace

TEST_CASE("periodic hamming endpoints") {
  std::vector<double> w = hamming_periodic(320);
  REQUIRE(w.size() == 320);
  CHECK(w[0] == doctest::Approx(0.08).epsilon(1e-12));
  CHECK(w[160] == doctest::Approx(1.0).epsilon(1e-12));
  // Periodic form: w[i] mirrors w[n - i] away from the endpoints.
  for (std::size_t i = 1; i < 320; ++i) CHECK(w[i] == doctest::Approx(w[320 - i]).epsilon(1e-12));
}

TEST_CASE("frame count and shapes") {
  StftConfig cfg;
  CHECK(cfg.bins() == 161);
  Rng rng(7);
  std::vector<double> x = random_wave(16000, rng);
  Spectrogram spec = stft(x, cfg);
  CHECK(spec.frames == 1 + (16000 - 320) / 160);
  CHECK(spec.bins == 161);

  // Shorter than one window: zero-padded to a single frame.
  Spectrogram one = stft(std::vector<double>(100, 0.5), cfg);
  CHECK(one.frames == 1);

  CHECK_THROWS_AS(stft(std::vector<double>{}, cfg), InputError);

  StftConfig bad;
  bad.hop = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("tone concentrates in the matching bin") {
  StftConfig cfg;
  std::vector<double> x(16000);
  for (std::size_t i = 0; i < x.size(); ++i)
    x[i] = std::sin(2.0 * M_PI * 1000.0 * double(i) / double(cfg.sample_rate));
  MagnitudeSpectrogram mag = magnitude(stft(x, cfg));
  for (std::size_t t = 1; t + 1 < mag.frames; ++t) {
    std::size_t peak = 0;
    for (std::size_t k = 1; k < mag.bins; ++k)
      if (mag.at(t, k) > mag.at(t, peak)) peak = k;
    CHECK(peak == 20);  // 1 kHz at 16 kHz / 320 bins
  }
}

TEST_CASE("per-frame energy matches windowed time-domain energy") {
  StftConfig cfg;
  Rng rng(8);
  std::vector<double> x = random_wave(4000, rng);
  std::vector<double> w = hamming_periodic(cfg.win_length);
  Spectrogram spec = stft(x, cfg);
  for (std::size_t t = 0; t < spec.frames; ++t) {
    double td = 0.0;
    for (std::size_t i = 0; i < cfg.win_length; ++i) {
      double v = x[t * cfg.hop + i] * w[i];
      td += v * v;
    }
    // One-sided spectrum: interior bins count twice.
    double fd = 0.0;
    for (std::size_t k = 0; k < spec.bins; ++k) {
      double m2 = std::norm(spec.at(t, k));
      fd += (k == 0 || k == spec.bins - 1) ? m2 : 2.0 * m2;
    }
    fd /= double(cfg.fft_size);
    CHECK(std::fabs(td - fd) <= 1e-10 * std::max(1.0, td));
  }
}

TEST_CASE("round trip reconstructs the waveform") {
  StftConfig cfg;
  Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    std::size_t n = 3200 + 160 * std::size_t(rng.below(20)) + std::size_t(rng.below(37));
    std::vector<double> x = random_wave(n, rng);
    Spectrogram spec = stft(x, cfg);
    std::vector<double> back = istft(spec, cfg, x.size());
    REQUIRE(back.size() == x.size());
    // Samples past the last full analysis window carry no frame data.
    std::size_t covered = std::min(covered_length(spec.frames, cfg), x.size());
    std::vector<double> ref(x.begin(), x.begin() + covered);
    std::vector<double> est(back.begin(), back.begin() + covered);
    CHECK(snr_db_of(ref, est) >= 60.0);
  }
}

TEST_CASE("round trip is exact at the edges for unmodified spectra") {
  StftConfig cfg;
  Rng rng(12);
  std::vector<double> x = random_wave(1600, rng);
  std::vector<double> back = istft(stft(x, cfg), cfg, x.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::fabs(back[i] - x[i]));
  CHECK(worst <= 1e-10);
}

TEST_CASE("compose rebuilds the exact spectrogram from magnitude and phase") {
  StftConfig cfg;
  Rng rng(10);
  std::vector<double> x = random_wave(2000, rng);
  Spectrogram spec = stft(x, cfg);
  Spectrogram again = compose(magnitude(spec), spec);
  for (std::size_t i = 0; i < spec.v.size(); ++i) CHECK(std::abs(again.v[i] - spec.v[i]) <= 1e-12);
}

TEST_CASE("compose with zero-magnitude reference uses a unit phasor") {
  StftConfig cfg;
  Spectrogram ref(1, cfg.bins());
  MagnitudeSpectrogram mag(1, cfg.bins());
  for (double& m : mag.v) m = 2.5;
  Spectrogram out = compose(mag, ref);
  CHECK(out.v[3].real() == doctest::Approx(2.5));
  CHECK(out.v[3].imag() == 0.0);

  MagnitudeSpectrogram wrong(2, cfg.bins());
  CHECK_THROWS_AS(compose(wrong, ref), ShapeError);
}

TEST_CASE("mix_at_snr hits the requested ratio") {
  Rng rng(11);
  std::vector<double> s = random_wave(8000, rng);
  std::vector<double> d = random_wave(12000, rng);

  SUBCASE("equal-power signals at 0 dB keep unit noise gain") {
    double ps = 0.0, pd = 0.0;
    for (double v : s) ps += v * v;
    for (std::size_t i = 0; i < s.size(); ++i) pd += d[i] * d[i];
    std::vector<double> d2(d.begin(), d.begin() + s.size());
    double g = std::sqrt(ps / pd);
    for (double& v : d2) v *= g;
    MixResult m = mix_at_snr(s, d2, 0.0);
    CHECK(m.alpha == doctest::Approx(1.0).epsilon(1e-12));
  }

  SUBCASE("achieved snr matches the request") {
    for (double target : {-5.0, 0.0, 5.0, 10.0}) {
      MixResult m = mix_at_snr(s, d, target);
      double ps = 0.0, pn = 0.0;
      for (std::size_t i = 0; i < s.size(); ++i) {
        ps += s[i] * s[i];
        double n = m.mixture[i] - s[i];
        pn += n * n;
      }
      double achieved = 10.0 * std::log10(ps / pn);
      CHECK(std::fabs(achieved - target) <= 1e-9);
    }
  }

  SUBCASE("infinite snr returns the clean signal") {
    MixResult m = mix_at_snr(s, d, std::numeric_limits<double>::infinity());
    CHECK(m.alpha == 0.0);
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(m.mixture[i] == s[i]);
  }

  SUBCASE("noise shorter than clean is rejected") {
    std::vector<double> shortd(s.size() - 1, 0.1);
    CHECK_THROWS_AS(mix_at_snr(s, shortd, 0.0), ContractError);
  }

  SUBCASE("silent inputs are rejected") {
    std::vector<double> z(8000, 0.0);
    CHECK_THROWS_AS(mix_at_snr(z, d, 0.0), InputError);
    CHECK_THROWS_AS(mix_at_snr(s, std::vector<double>(12000, 0.0), 0.0), InputError);
  }
}
