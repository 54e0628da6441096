#include "darcn/data.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "darcn/audio.hpp"
#include "darcn/errors.hpp"

namespace darcn {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

double parse_double(const std::string& s, const std::string& ctx) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw InputError("manifest: bad number '" + s + "' in " + ctx);
  }
}

std::string format_snr(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

Manifest read_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InputError("manifest: cannot open '" + path + "'");
  Manifest out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cols = split_tabs(line);
    if (cols.size() != 5)
      throw InputError("manifest: line " + std::to_string(lineno) + " of '" + path + "' has " +
                       std::to_string(cols.size()) + " columns, expected 5");
    ManifestRecord r;
    r.clean_path = cols[0];
    r.noise_path = cols[1];
    const double off = parse_double(cols[2], "offset column");
    if (off < 0.0 || off != std::floor(off))
      throw InputError("manifest: offset must be a nonnegative integer, got '" + cols[2] + "'");
    r.offset_samples = static_cast<std::size_t>(off);
    r.snr_db = parse_double(cols[3], "snr column");
    r.split = cols[4];
    out.push_back(std::move(r));
  }
  return out;
}

void write_manifest(const std::string& path, const Manifest& records) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw InputError("manifest: cannot open '" + path + "' for writing");
  for (const ManifestRecord& r : records)
    f << r.clean_path << '\t' << r.noise_path << '\t' << r.offset_samples << '\t'
      << format_snr(r.snr_db) << '\t' << r.split << '\n';
  if (!f) throw InputError("manifest: short write to '" + path + "'");
}

std::map<std::string, bool> read_kinds(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InputError("kinds: cannot open '" + path + "'");
  std::map<std::string, bool> out;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto cols = split_tabs(line);
    if (cols.size() != 2 || (cols[1] != "seen" && cols[1] != "unseen"))
      throw InputError("kinds: bad line '" + line + "' in '" + path + "'");
    out[cols[0]] = cols[1] == "seen";
  }
  return out;
}

void write_kinds(const std::string& path, const std::map<std::string, bool>& kinds) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw InputError("kinds: cannot open '" + path + "' for writing");
  for (const auto& [name, seen] : kinds) f << name << '\t' << (seen ? "seen" : "unseen") << '\n';
}

Utterance realize(const std::string& root, const ManifestRecord& rec) {
  namespace fs = std::filesystem;
  const Waveform clean = read_wav((fs::path(root) / rec.clean_path).string());
  const Waveform noise = read_wav((fs::path(root) / rec.noise_path).string());
  if (rec.offset_samples + clean.samples.size() > noise.samples.size())
    throw ContractError("realize: noise window [" + std::to_string(rec.offset_samples) + ", " +
                        std::to_string(rec.offset_samples + clean.samples.size()) +
                        ") runs past the end of '" + rec.noise_path + "'");
  std::vector<double> window(noise.samples.begin() + static_cast<long>(rec.offset_samples),
                             noise.samples.begin() +
                                 static_cast<long>(rec.offset_samples + clean.samples.size()));
  MixResult mix = mix_at_snr(clean.samples, window, rec.snr_db);
  Utterance u;
  u.mixture = std::move(mix.mixture);
  u.clean = clean.samples;
  u.alpha = mix.alpha;
  return u;
}

FeaturePair features_for(const Utterance& u, const StftConfig& cfg) {
  const MagnitudeSpectrogram noisy = magnitude(stft(u.mixture, cfg));
  const MagnitudeSpectrogram clean = magnitude(stft(u.clean, cfg));
  if (noisy.frames != clean.frames || noisy.bins != clean.bins)
    throw ContractError("features: mixture and clean disagree on frame count");
  FeaturePair fp;
  fp.frames = noisy.frames;
  fp.bins = noisy.bins;
  fp.noisy = noisy.v;
  fp.clean = clean.v;
  return fp;
}

Batch make_batch(const std::vector<FeaturePair>& items, const std::vector<std::size_t>& order) {
  if (order.empty()) throw ContractError("batch: empty selection");
  std::size_t bins = 0, tmax = 0;
  for (std::size_t idx : order) {
    if (idx >= items.size()) throw ContractError("batch: index out of range");
    const FeaturePair& fp = items[idx];
    if (bins == 0) bins = fp.bins;
    if (fp.bins != bins) throw ContractError("batch: inconsistent feature widths");
    tmax = std::max(tmax, fp.frames);
  }
  const std::size_t b = order.size();
  Tensor input = Tensor::zeros({b, tmax, bins});
  Tensor target = Tensor::zeros({b, tmax, bins});
  Tensor mask = Tensor::zeros({b, tmax});
  Batch out;
  for (std::size_t i = 0; i < b; ++i) {
    const FeaturePair& fp = items[order[i]];
    std::copy(fp.noisy.begin(), fp.noisy.end(), input.data().begin() + i * tmax * bins);
    std::copy(fp.clean.begin(), fp.clean.end(), target.data().begin() + i * tmax * bins);
    std::fill_n(mask.data().begin() + i * tmax, fp.frames, 1.0);
    out.lengths.push_back(fp.frames);
  }
  out.input = std::move(input);
  out.target = std::move(target);
  out.mask = std::move(mask);
  return out;
}

std::vector<std::vector<std::size_t>> batch_plan(std::size_t count, std::size_t batch_size,
                                                 Rng& rng) {
  if (batch_size == 0) throw ConfigError("batch: size must be positive");
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> plan;
  for (std::size_t start = 0; start < count; start += batch_size) {
    const std::size_t end = std::min(count, start + batch_size);
    plan.emplace_back(order.begin() + static_cast<long>(start),
                      order.begin() + static_cast<long>(end));
  }
  return plan;
}

}  // namespace darcn
