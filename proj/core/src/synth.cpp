#include "darcn/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>

#include "darcn/audio.hpp"
#include "darcn/data.hpp"
#include "darcn/errors.hpp"

namespace darcn {

namespace {

constexpr double kTau = 6.283185307179586476925286766559;

double rms(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s / std::max<std::size_t>(v.size(), 1));
}

void normalize_rms(std::vector<double>& v, double target) {
  const double r = rms(v);
  if (r < 1e-12) return;
  double g = target / r;
  double peak = 0.0;
  for (double x : v) peak = std::max(peak, std::abs(x) * g);
  if (peak > 0.99) g *= 0.99 / peak;
  for (double& x : v) x *= g;
}

// Smooth value wandering inside [lo, hi]: a couple of incommensurate slow
// sinusoids around a fixed center.
struct Wander {
  double center, span, r1, r2, p1, p2;

  Wander(Rng& rng, double lo, double hi, double rate_lo, double rate_hi) {
    const double margin = 0.25 * (hi - lo);
    center = rng.uniform(lo + margin, hi - margin);
    span = rng.uniform(0.3, 1.0) * margin;
    r1 = rng.uniform(rate_lo, rate_hi);
    r2 = rng.uniform(rate_lo, rate_hi) * 1.77;
    p1 = rng.uniform(0.0, kTau);
    p2 = rng.uniform(0.0, kTau);
  }

  double at(double t) const {
    return center + span * (0.6 * std::sin(kTau * r1 * t + p1) + 0.4 * std::sin(kTau * r2 * t + p2));
  }
};

// Alternating speak/pause schedule with raised-cosine ramps; utterances open
// on a spoken stretch so very short clips stay voiced.
struct WordGate {
  std::vector<double> edges;  // segment boundaries in seconds, first is spoken
  double floor, ramp;

  WordGate(Rng& rng, double total_seconds, double floor_level) : floor(floor_level), ramp(0.025) {
    double t = rng.uniform(0.35, 0.7);
    edges.push_back(t);
    while (t < total_seconds) {
      t += rng.uniform(0.10, 0.24);
      edges.push_back(t);  // pause end
      t += rng.uniform(0.25, 0.6);
      edges.push_back(t);  // word end
    }
  }

  double at(double t) const {
    bool spoken = true;
    double prev = 0.0;
    double w = 0.0;
    for (double e : edges) {
      if (t < e) {
        if (spoken) w = std::clamp(std::min(t - prev, e - t) / ramp, 0.0, 1.0);
        break;
      }
      prev = e;
      spoken = !spoken;
    }
    const double s = w * w * (3.0 - 2.0 * w);
    return floor + (1.0 - floor) * s;
  }
};

struct VoiceShape {
  double form_lo1, form_hi1, form_lo2, form_hi2, form_lo3, form_hi3;
  double top_hz;     // highest harmonic kept
  double amp3;       // third formant weight
  double gate_floor;
};

VoiceShape speech_shape() { return {320.0, 820.0, 950.0, 2200.0, 2350.0, 3150.0, 5000.0, 0.4, 0.02}; }

// Murmur register for background talkers: low formants, dull spectrum.
VoiceShape murmur_shape() { return {220.0, 620.0, 700.0, 1400.0, 1500.0, 2100.0, 2600.0, 0.15, 0.04}; }

std::vector<double> voiced_source(Rng& rng, std::size_t len, std::size_t sr, double f0_lo,
                                  double f0_hi, const VoiceShape& shape) {
  Wander f0(rng, f0_lo, f0_hi, 0.2, 1.3);
  Wander form1(rng, shape.form_lo1, shape.form_hi1, 0.3, 1.1);
  Wander form2(rng, shape.form_lo2, shape.form_hi2, 0.3, 1.1);
  Wander form3(rng, shape.form_lo3, shape.form_hi3, 0.2, 0.8);
  const double bw1 = rng.uniform(90.0, 160.0);
  const double bw2 = rng.uniform(120.0, 220.0);
  const double bw3 = rng.uniform(150.0, 280.0);
  const double syllable_rate = rng.uniform(2.5, 5.0);
  const double syllable_phase = rng.uniform(0.0, kTau);
  WordGate words(rng, static_cast<double>(len) / static_cast<double>(sr), shape.gate_floor);

  const double f0_min = f0.center - f0.span;
  const std::size_t harmonics =
      std::max<std::size_t>(3, static_cast<std::size_t>(shape.top_hz / std::max(f0_min, 60.0)));
  std::vector<double> phase(harmonics);
  for (double& p : phase) p = rng.uniform(0.0, kTau);

  std::vector<double> out(len, 0.0);
  const double dt = 1.0 / static_cast<double>(sr);
  for (std::size_t i = 0; i < len; ++i) {
    const double t = static_cast<double>(i) * dt;
    const double f = f0.at(t);
    const double c1 = form1.at(t), c2 = form2.at(t), c3 = form3.at(t);
    double s = 0.0;
    for (std::size_t k = 0; k < harmonics; ++k) {
      const double hf = f * static_cast<double>(k + 1);
      if (hf > shape.top_hz) break;
      phase[k] += kTau * hf * dt;
      const double d1 = (hf - c1) / bw1, d2 = (hf - c2) / bw2, d3 = (hf - c3) / bw3;
      const double w = std::exp(-d1 * d1) + 0.7 * std::exp(-d2 * d2) +
                       shape.amp3 * std::exp(-d3 * d3) + 0.04;
      s += w / static_cast<double>(k + 1) * std::sin(phase[k]);
    }
    const double lfo = 0.5 + 0.5 * std::sin(kTau * syllable_rate * t + syllable_phase);
    double env = (0.06 + 0.94 * lfo * lfo) * words.at(t);
    const double edge = 0.03 * static_cast<double>(sr);
    if (static_cast<double>(i) < edge) env *= static_cast<double>(i) / edge;
    if (static_cast<double>(len - 1 - i) < edge) env *= static_cast<double>(len - 1 - i) / edge;
    out[i] = s * env;
  }
  return out;
}

std::vector<double> pink_noise(Rng& rng, std::size_t len) {
  std::vector<double> out(len);
  double b0 = 0.0, b1 = 0.0, b2 = 0.0;
  for (std::size_t i = 0; i < len; ++i) {
    const double w = rng.normal();
    b0 = 0.99886 * b0 + w * 0.0555179;
    b1 = 0.99332 * b1 + w * 0.0750759;
    b2 = 0.96900 * b2 + w * 0.1538520;
    out[i] = b0 + b1 + b2 + w * 0.1848;
  }
  return out;
}

std::vector<double> brown_noise(Rng& rng, std::size_t len) {
  std::vector<double> out(len);
  double b = 0.0;
  for (std::size_t i = 0; i < len; ++i) {
    b = 0.998 * b + 0.06 * rng.normal();
    out[i] = b;
  }
  return out;
}

std::vector<double> babble_noise(Rng& rng, std::size_t len, std::size_t sr, std::size_t voices,
                                 double f0_lo, double f0_hi) {
  std::vector<double> out(len, 0.0);
  for (std::size_t v = 0; v < voices; ++v) {
    Rng vr = rng.fork(v + 1);
    std::vector<double> one = voiced_source(vr, len, sr, f0_lo, f0_hi, murmur_shape());
    for (std::size_t i = 0; i < len; ++i) out[i] += one[i];
  }
  return out;
}

std::vector<double> hum_noise(Rng& rng, std::size_t len, std::size_t sr, double fundamental,
                              double decay) {
  std::vector<double> out(len, 0.0);
  const double dt = 1.0 / static_cast<double>(sr);
  const std::size_t harmonics = 8;
  std::vector<double> phase(harmonics), amp(harmonics);
  for (std::size_t k = 0; k < harmonics; ++k) {
    phase[k] = rng.uniform(0.0, kTau);
    amp[k] = std::pow(1.0 / static_cast<double>(k + 1), decay) * rng.uniform(0.7, 1.0);
  }
  Wander sway(rng, 0.996, 1.004, 0.05, 0.3);
  for (std::size_t i = 0; i < len; ++i) {
    const double t = static_cast<double>(i) * dt;
    const double f = fundamental * sway.at(t);
    double s = 0.0;
    for (std::size_t k = 0; k < harmonics; ++k) {
      phase[k] += kTau * f * static_cast<double>(k + 1) * dt;
      s += amp[k] * std::sin(phase[k]);
    }
    out[i] = s + 0.012 * rng.normal();
  }
  return out;
}

std::vector<double> machine_noise(Rng& rng, std::size_t len, std::size_t sr, double center_hz,
                                  double mod_rate, double whine_hz) {
  // two-pole resonator driven by white noise, amplitude chopped by a rounded
  // square wave, plus a steady whine
  const double r = 0.985;
  const double w0 = kTau * center_hz / static_cast<double>(sr);
  const double a1 = -2.0 * r * std::cos(w0);
  const double a2 = r * r;
  double y1 = 0.0, y2 = 0.0;
  double whine_phase = rng.uniform(0.0, kTau);
  const double mod_phase = rng.uniform(0.0, kTau);
  std::vector<double> out(len);
  for (std::size_t i = 0; i < len; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(sr);
    const double y = rng.normal() - a1 * y1 - a2 * y2;
    y2 = y1;
    y1 = y;
    const double sq = std::tanh(4.0 * std::sin(kTau * mod_rate * t + mod_phase));
    const double env = 0.62 + 0.38 * sq;
    whine_phase += kTau * whine_hz / static_cast<double>(sr);
    out[i] = 0.12 * y * env + 0.35 * std::sin(whine_phase);
  }
  return out;
}

std::string index_name(const std::string& split, std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%s_%03zu.wav", split.c_str(), i);
  return buf;
}

}  // namespace

const std::vector<NoiseKind>& noise_kinds() {
  static const std::vector<NoiseKind> kinds = {
      {"white", true},      {"pink", true},      {"babble_a", true}, {"babble_b", true},
      {"hum_a", true},      {"hum_b", true},     {"machine_a", true}, {"machine_b", true},
      {"brown", false},     {"babble_c", false}, {"hum_c", false},    {"machine_c", false},
  };
  return kinds;
}

std::vector<double> make_clean_utterance(Rng& rng, std::size_t len, std::size_t sample_rate) {
  if (len == 0) throw ContractError("synth: empty utterance requested");
  std::vector<double> out = voiced_source(rng, len, sample_rate, 85.0, 290.0, speech_shape());
  double peak = 0.0;
  for (double v : out) peak = std::max(peak, std::abs(v));
  if (peak < 1e-12) throw NumericError("synth: degenerate utterance");
  const double target = rng.uniform(0.35, 0.8);
  for (double& v : out) v *= target / peak;
  return out;
}

std::vector<double> make_noise(const std::string& kind, Rng& rng, std::size_t len,
                               std::size_t sample_rate) {
  std::vector<double> out;
  if (kind == "white") {
    out.resize(len);
    for (double& v : out) v = rng.normal();
  } else if (kind == "pink") {
    out = pink_noise(rng, len);
  } else if (kind == "brown") {
    out = brown_noise(rng, len);
  } else if (kind == "babble_a") {
    out = babble_noise(rng, len, sample_rate, 3, 95.0, 240.0);
  } else if (kind == "babble_b") {
    out = babble_noise(rng, len, sample_rate, 4, 110.0, 280.0);
  } else if (kind == "babble_c") {
    out = babble_noise(rng, len, sample_rate, 5, 85.0, 200.0);
  } else if (kind == "hum_a") {
    out = hum_noise(rng, len, sample_rate, 50.0, 1.1);
  } else if (kind == "hum_b") {
    out = hum_noise(rng, len, sample_rate, 60.0, 1.3);
  } else if (kind == "hum_c") {
    out = hum_noise(rng, len, sample_rate, 100.0, 1.7);
  } else if (kind == "machine_a") {
    out = machine_noise(rng, len, sample_rate, 5200.0, 6.0, 5800.0);
  } else if (kind == "machine_b") {
    out = machine_noise(rng, len, sample_rate, 6300.0, 3.5, 6900.0);
  } else if (kind == "machine_c") {
    out = machine_noise(rng, len, sample_rate, 7200.0, 9.0, 7700.0);
  } else {
    throw InputError("synth: unknown noise kind '" + kind + "'");
  }
  normalize_rms(out, 0.12);
  return out;
}

void synthesize_corpus(const SynthSpec& spec) {
  if (spec.min_seconds <= 0.0 || spec.max_seconds < spec.min_seconds)
    throw ConfigError("synth: bad duration range");
  if (spec.noise_seconds < spec.max_seconds + 0.5)
    throw ConfigError("synth: noise files must comfortably exceed the longest utterance");

  namespace fs = std::filesystem;
  const fs::path root(spec.out_dir);
  fs::create_directories(root / "clean");
  fs::create_directories(root / "noise");

  Rng master(spec.seed);

  std::vector<std::string> seen, unseen;
  std::map<std::string, bool> kind_map;
  for (const NoiseKind& k : noise_kinds()) {
    kind_map[k.name] = k.seen;
    (k.seen ? seen : unseen).push_back(k.name);
  }
  write_kinds((root / "kinds.tsv").string(), kind_map);

  const std::size_t noise_len =
      static_cast<std::size_t>(spec.noise_seconds * static_cast<double>(spec.sample_rate));
  {
    std::size_t label = 1000;
    for (const NoiseKind& k : noise_kinds()) {
      Rng nr = master.fork(label++);
      Waveform w;
      w.sample_rate = spec.sample_rate;
      w.samples = make_noise(k.name, nr, noise_len, spec.sample_rate);
      write_wav((root / "noise" / (k.name + ".wav")).string(), w);
    }
  }

  const std::vector<double> snr_grid = [] {
    std::vector<double> g;
    for (int s = -5; s <= 10; ++s) g.push_back(static_cast<double>(s));
    return g;
  }();
  const std::vector<double> test_snrs = {-5.0, 0.0, 5.0, 10.0};

  std::size_t label = 1;
  auto make_split = [&](const std::string& split, std::size_t count) {
    Manifest m;
    for (std::size_t i = 0; i < count; ++i) {
      Rng ur = master.fork(label++);
      const double secs = ur.uniform(spec.min_seconds, spec.max_seconds);
      const std::size_t len =
          static_cast<std::size_t>(secs * static_cast<double>(spec.sample_rate));
      Waveform w;
      w.sample_rate = spec.sample_rate;
      w.samples = make_clean_utterance(ur, len, spec.sample_rate);
      const std::string rel = "clean/" + index_name(split, i);
      write_wav((root / rel).string(), w);

      if (split == "test") {
        for (double snr : test_snrs) {
          for (int grp = 0; grp < 2; ++grp) {
            const auto& pool = grp == 0 ? seen : unseen;
            ManifestRecord r;
            r.clean_path = rel;
            r.noise_path = "noise/" + pool[ur.below(pool.size())] + ".wav";
            r.offset_samples = static_cast<std::size_t>(ur.below(noise_len - len));
            r.snr_db = snr;
            r.split = split;
            m.push_back(r);
          }
        }
      } else {
        ManifestRecord r;
        r.clean_path = rel;
        r.noise_path = "noise/" + seen[ur.below(seen.size())] + ".wav";
        r.offset_samples = static_cast<std::size_t>(ur.below(noise_len - len));
        r.snr_db = snr_grid[ur.below(snr_grid.size())];
        r.split = split;
        m.push_back(r);
      }
    }
    write_manifest((root / (split + ".tsv")).string(), m);
  };

  make_split("train", spec.train_count);
  make_split("val", spec.val_count);
  make_split("test", spec.test_count);
}

}  // namespace darcn
