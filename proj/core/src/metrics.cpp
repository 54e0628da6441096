#include "darcn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "darcn/errors.hpp"

namespace darcn {

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b, std::size_t lo,
           std::size_t hi) {
  double s = 0.0;
  for (std::size_t i = lo; i < hi; ++i) s += a[i] * b[i];
  return s;
}

double si_ratio_db(const double* est, const double* ref, std::size_t n, double lo_cap,
                   double hi_cap) {
  double rr = 0.0, er = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    rr += ref[i] * ref[i];
    er += est[i] * ref[i];
  }
  const double alpha = er / rr;
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = alpha * ref[i];
    const double r = est[i] - t;
    num += t * t;
    den += r * r;
  }
  if (num <= 0.0) return lo_cap;
  if (den <= 0.0) return hi_cap;
  const double v = 10.0 * std::log10(num / den);
  return std::clamp(v, lo_cap, hi_cap);
}

}  // namespace

double si_sdr(const std::vector<double>& est, const std::vector<double>& ref) {
  if (est.size() != ref.size())
    throw ShapeError("si_sdr: estimate has " + std::to_string(est.size()) +
                     " samples, reference " + std::to_string(ref.size()));
  if (ref.empty()) throw InputError("si_sdr: empty signals");
  const double rr = dot(ref, ref, 0, ref.size());
  if (rr <= 0.0) throw InputError("si_sdr: reference is silent");
  return si_ratio_db(est.data(), ref.data(), ref.size(), -100.0, 100.0);
}

std::optional<double> seg_snr(const std::vector<double>& est, const std::vector<double>& ref,
                              std::size_t frame, std::size_t hop) {
  if (est.size() != ref.size()) throw ShapeError("seg_snr: length mismatch");
  if (frame == 0 || hop == 0) throw ConfigError("seg_snr: frame and hop must be positive");
  if (ref.size() < frame) return std::nullopt;
  const double active_rms = 0.01;  // -40 dBFS
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t start = 0; start + frame <= ref.size(); start += hop) {
    double rr = 0.0;
    for (std::size_t i = start; i < start + frame; ++i) rr += ref[i] * ref[i];
    const double rms = std::sqrt(rr / static_cast<double>(frame));
    if (rms <= active_rms) continue;
    sum += si_ratio_db(est.data() + start, ref.data() + start, frame, -10.0, 35.0);
    ++count;
  }
  if (count == 0) return std::nullopt;
  return sum / static_cast<double>(count);
}

double magnitude_mse(const MagnitudeSpectrogram& a, const MagnitudeSpectrogram& b) {
  if (a.frames != b.frames || a.bins != b.bins)
    throw ShapeError("magnitude_mse: spectrogram shapes differ");
  if (a.v.empty()) throw InputError("magnitude_mse: empty spectrograms");
  double s = 0.0;
  for (std::size_t i = 0; i < a.v.size(); ++i) {
    const double d = a.v[i] - b.v[i];
    s += d * d;
  }
  return s / static_cast<double>(a.v.size());
}

namespace {

std::string kind_of(const std::string& noise_path) {
  return std::filesystem::path(noise_path).stem().string();
}

std::vector<double> interior(const std::vector<double>& x, std::size_t lo, std::size_t hi) {
  return std::vector<double>(x.begin() + static_cast<long>(lo), x.begin() + static_cast<long>(hi));
}

struct Accum {
  double noisy = 0.0, enhanced = 0.0;
  std::size_t n = 0;
  void add(double a, double b) {
    noisy += a;
    enhanced += b;
    ++n;
  }
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed << v;
  return os.str();
}

}  // namespace

const EvalRow* EvalReport::find(const std::string& kind, double snr_db,
                                const std::string& metric) const {
  for (const EvalRow& r : rows) {
    if (r.noise_kind != kind || r.metric != metric) continue;
    const bool pooled = std::isnan(r.snr_db) && std::isnan(snr_db);
    if (pooled || r.snr_db == snr_db) return &r;
  }
  return nullptr;
}

EvalReport evaluate_manifest(const std::string& root, const Manifest& manifest,
                             const std::map<std::string, bool>& kinds, const Enhancer& enhance,
                             const StftConfig& cfg, std::size_t threads) {
  if (manifest.empty()) throw InputError("evaluate: empty manifest");
  cfg.validate();
  if (threads == 0) threads = 1;

  EvalReport report;
  report.utterances.resize(manifest.size());
  std::vector<std::string> errors(manifest.size());

  auto worker = [&](std::size_t begin, std::size_t step) {
    for (std::size_t i = begin; i < manifest.size(); i += step) {
      try {
        const ManifestRecord& rec = manifest[i];
        Utterance u = realize(root, rec);
        std::vector<double> enhanced = enhance(u.mixture);
        if (enhanced.size() != u.mixture.size())
          throw ContractError("evaluate: enhancer changed the sample count");

        const std::size_t frames =
            u.mixture.size() < cfg.win_length
                ? 1
                : 1 + (u.mixture.size() - cfg.win_length) / cfg.hop;
        const std::size_t covered = covered_length(frames, cfg);
        const std::size_t lo = cfg.win_length;
        if (covered < lo + cfg.win_length)
          throw InputError("evaluate: utterance too short for the interior region");
        const std::size_t hi = covered - cfg.win_length;

        const std::vector<double> ref = interior(u.clean, lo, hi);
        const std::vector<double> mix = interior(u.mixture, lo, hi);
        const std::vector<double> enh = interior(enhanced, lo, hi);

        UtteranceEval& e = report.utterances[i];
        e.index = i;
        e.clean_path = rec.clean_path;
        e.kind = kind_of(rec.noise_path);
        const auto it = kinds.find(e.kind);
        if (it == kinds.end())
          throw InputError("evaluate: kind '" + e.kind + "' missing from the kind table");
        e.seen = it->second;
        e.snr_db = rec.snr_db;
        e.split = rec.split;
        e.si_sdr_noisy = si_sdr(mix, ref);
        e.si_sdr_enhanced = si_sdr(enh, ref);
        e.seg_noisy = seg_snr(mix, ref);
        e.seg_enhanced = seg_snr(enh, ref);
        e.mse_noisy = magnitude_mse(magnitude(stft(mix, cfg)), magnitude(stft(ref, cfg)));
        e.mse_enhanced = magnitude_mse(magnitude(stft(enh, cfg)), magnitude(stft(ref, cfg)));
      } catch (const std::exception& ex) {
        errors[i] = ex.what();
      }
    }
  };

  if (threads == 1) {
    worker(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker, t, threads);
    for (std::thread& t : pool) t.join();
  }
  for (std::size_t i = 0; i < errors.size(); ++i)
    if (!errors[i].empty())
      throw InputError("evaluate: record " + std::to_string(i) + ": " + errors[i]);

  // aggregate by kind x level, then by pool x level, then pooled overall
  struct Key {
    std::string split, kind;
    double snr;
    std::string metric;
    bool operator<(const Key& o) const {
      if (split != o.split) return split < o.split;
      if (kind != o.kind) return kind < o.kind;
      const double a = std::isnan(snr) ? 1e9 : snr;
      const double b = std::isnan(o.snr) ? 1e9 : o.snr;
      if (a != b) return a < b;
      return metric < o.metric;
    }
  };
  std::map<Key, Accum> acc;
  const double pooled = std::numeric_limits<double>::quiet_NaN();
  for (const UtteranceEval& e : report.utterances) {
    std::vector<std::string> groups = {e.kind, e.seen ? "seen" : "unseen", "all"};
    for (const std::string& g : groups) {
      for (double level : {e.snr_db, pooled}) {
        acc[{e.split, g, level, "si_sdr"}].add(e.si_sdr_noisy, e.si_sdr_enhanced);
        if (e.seg_noisy && e.seg_enhanced)
          acc[{e.split, g, level, "seg_snr"}].add(*e.seg_noisy, *e.seg_enhanced);
        acc[{e.split, g, level, "mag_mse"}].add(e.mse_noisy, e.mse_enhanced);
      }
    }
  }
  for (const auto& [key, a] : acc) {
    EvalRow row;
    row.split = key.split;
    row.noise_kind = key.kind;
    row.snr_db = key.snr;
    row.metric = key.metric;
    row.noisy_value = a.noisy / static_cast<double>(a.n);
    row.enhanced_value = a.enhanced / static_cast<double>(a.n);
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::string EvalReport::tsv() const {
  std::ostringstream os;
  os << "split\tnoise_kind\tsnr_db\tmetric\tnoisy_value\tenhanced_value\tdelta\n";
  for (const EvalRow& r : rows) {
    os << r.split << '\t' << r.noise_kind << '\t';
    if (std::isnan(r.snr_db))
      os << "all";
    else
      os << r.snr_db;
    os << '\t' << r.metric << '\t' << fmt(r.noisy_value) << '\t' << fmt(r.enhanced_value) << '\t'
       << fmt(r.enhanced_value - r.noisy_value) << '\n';
  }
  return os.str();
}

std::string EvalReport::json() const {
  nlohmann::json j;
  j["note"] =
      "perceptual metrics (PESQ, STOI) are not included: no reference implementation ships "
      "with this tool";
  j["utterances"] = nlohmann::json::array();
  for (const UtteranceEval& e : utterances) {
    nlohmann::json u;
    u["index"] = e.index;
    u["clean_path"] = e.clean_path;
    u["noise_kind"] = e.kind;
    u["pool"] = e.seen ? "seen" : "unseen";
    u["snr_db"] = e.snr_db;
    u["split"] = e.split;
    u["si_sdr"] = {{"noisy", e.si_sdr_noisy}, {"enhanced", e.si_sdr_enhanced}};
    if (e.seg_noisy && e.seg_enhanced)
      u["seg_snr"] = {{"noisy", *e.seg_noisy}, {"enhanced", *e.seg_enhanced}};
    else
      u["seg_snr"] = nullptr;
    u["mag_mse"] = {{"noisy", e.mse_noisy}, {"enhanced", e.mse_enhanced}};
    j["utterances"].push_back(std::move(u));
  }
  j["aggregates"] = nlohmann::json::array();
  for (const EvalRow& r : rows) {
    nlohmann::json a;
    a["split"] = r.split;
    a["noise_kind"] = r.noise_kind;
    if (std::isnan(r.snr_db))
      a["snr_db"] = nullptr;
    else
      a["snr_db"] = r.snr_db;
    a["metric"] = r.metric;
    a["noisy_value"] = r.noisy_value;
    a["enhanced_value"] = r.enhanced_value;
    a["delta"] = r.enhanced_value - r.noisy_value;
    j["aggregates"].push_back(std::move(a));
  }
  return j.dump(2);
}

}  // namespace darcn
