#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "darcn/audio.hpp"
#include "darcn/data.hpp"
#include "darcn/errors.hpp"
#include "darcn/stft.hpp"
#include "darcn/synth.hpp"

using namespace darcn;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::path("/tmp") / ("darcn_data_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

SynthSpec small_spec(const std::string& dir, std::uint64_t seed) {
  SynthSpec s;
  s.out_dir = dir;
  s.seed = seed;
  s.train_count = 3;
  s.val_count = 2;
  s.test_count = 2;
  s.min_seconds = 0.3;
  s.max_seconds = 0.5;
  s.noise_seconds = 1.2;
  return s;
}

}  // namespace

TEST_CASE("manifest files round trip") {
  TempDir td("manifest");
  Manifest m;
  m.push_back({"clean/train_000.wav", "noise/white.wav", 123, -5.0, "train"});
  m.push_back({"clean/val_001.wav", "noise/hum_a.wav", 0, 10.0, "val"});
  const std::string path = (td.path / "m.tsv").string();
  write_manifest(path, m);
  Manifest r = read_manifest(path);
  REQUIRE(r.size() == 2);
  CHECK(r[0].clean_path == m[0].clean_path);
  CHECK(r[0].noise_path == m[0].noise_path);
  CHECK(r[0].offset_samples == 123);
  CHECK(r[0].snr_db == -5.0);
  CHECK(r[0].split == "train");
  CHECK(r[1].snr_db == 10.0);
}

TEST_CASE("manifest parsing rejects malformed rows") {
  TempDir td("manifest_bad");
  const std::string path = (td.path / "m.tsv").string();
  auto write_line = [&](const std::string& line) {
    std::ofstream f(path, std::ios::trunc);
    f << line << "\n";
  };
  write_line("a\tb\t0\t0");
  CHECK_THROWS_AS(read_manifest(path), InputError);
  write_line("a\tb\tx\t0\ttrain");
  CHECK_THROWS_AS(read_manifest(path), InputError);
  write_line("a\tb\t-3\t0\ttrain");
  CHECK_THROWS_AS(read_manifest(path), InputError);
  write_line("a\tb\t1.5\t0\ttrain");
  CHECK_THROWS_AS(read_manifest(path), InputError);
  CHECK_THROWS_AS(read_manifest((td.path / "missing.tsv").string()), InputError);
}

TEST_CASE("kind metadata round trips") {
  TempDir td("kinds");
  const std::string path = (td.path / "kinds.tsv").string();
  std::map<std::string, bool> kinds = {{"white", true}, {"brown", false}, {"hum_a", true}};
  write_kinds(path, kinds);
  CHECK(read_kinds(path) == kinds);
  std::ofstream(path, std::ios::trunc) << "white\tmaybe\n";
  CHECK_THROWS_AS(read_kinds(path), InputError);
}

TEST_CASE("batch plan covers every item once with a short tail") {
  Rng rng(9);
  auto plan = batch_plan(10, 4, rng);
  REQUIRE(plan.size() == 3);
  CHECK(plan[0].size() == 4);
  CHECK(plan[1].size() == 4);
  CHECK(plan[2].size() == 2);
  std::set<std::size_t> all;
  for (const auto& chunk : plan)
    for (std::size_t i : chunk) all.insert(i);
  CHECK(all.size() == 10);

  Rng r2(9);
  CHECK(batch_plan(10, 4, r2) == plan);  // same seed, same order
  Rng r3(10);
  CHECK(batch_plan(10, 4, r3) != plan);
}

TEST_CASE("batches pad to the longest item and mask the padding") {
  std::vector<FeaturePair> items(2);
  items[0].frames = 50;
  items[0].bins = 3;
  items[0].noisy.assign(150, 2.0);
  items[0].clean.assign(150, 1.0);
  items[1].frames = 30;
  items[1].bins = 3;
  items[1].noisy.assign(90, 4.0);
  items[1].clean.assign(90, 3.0);

  Batch b = make_batch(items, {0, 1});
  CHECK(b.input.shape() == Shape{2, 50, 3});
  CHECK(b.target.shape() == Shape{2, 50, 3});
  CHECK(b.mask.shape() == Shape{2, 50});
  CHECK(b.lengths == std::vector<std::size_t>{50, 30});
  double row0 = 0.0, row1 = 0.0;
  for (std::size_t t = 0; t < 50; ++t) {
    row0 += b.mask.at({0, t});
    row1 += b.mask.at({1, t});
  }
  CHECK(row0 == 50.0);
  CHECK(row1 == 30.0);
  CHECK(b.input.at({1, 29, 2}) == 4.0);
  CHECK(b.input.at({1, 30, 0}) == 0.0);  // padded region
  CHECK(b.target.at({1, 45, 1}) == 0.0);

  CHECK_THROWS_AS(make_batch(items, {}), ContractError);
  CHECK_THROWS_AS(make_batch(items, {5}), ContractError);
}

TEST_CASE("generated corpus is complete and reproducible") {
  TempDir a("corpus_a"), b("corpus_b");
  synthesize_corpus(small_spec(a.path.string(), 42));
  synthesize_corpus(small_spec(b.path.string(), 42));

  for (const char* split : {"train", "val", "test"})
    CHECK(fs::exists(a.path / (std::string(split) + ".tsv")));
  CHECK(fs::exists(a.path / "kinds.tsv"));
  for (const NoiseKind& k : noise_kinds())
    CHECK(fs::exists(a.path / "noise" / (k.name + ".wav")));

  // same seed, same bytes
  for (const char* rel : {"train.tsv", "val.tsv", "test.tsv", "kinds.tsv"})
    CHECK(slurp(a.path / rel) == slurp(b.path / rel));
  CHECK(slurp(a.path / "clean" / "train_000.wav") == slurp(b.path / "clean" / "train_000.wav"));
  CHECK(slurp(a.path / "noise" / "machine_b.wav") == slurp(b.path / "noise" / "machine_b.wav"));

  // a different seed moves the audio
  TempDir c("corpus_c");
  synthesize_corpus(small_spec(c.path.string(), 43));
  CHECK(slurp(a.path / "clean" / "train_000.wav") != slurp(c.path / "clean" / "train_000.wav"));

  const Manifest train = read_manifest((a.path / "train.tsv").string());
  const Manifest test = read_manifest((a.path / "test.tsv").string());
  CHECK(train.size() == 3);
  CHECK(test.size() == 2 * 4 * 2);  // utterances x snrs x {seen,unseen}

  const auto kinds = read_kinds((a.path / "kinds.tsv").string());
  std::size_t seen_count = 0;
  for (const auto& [name, seen] : kinds) seen_count += seen ? 1 : 0;
  CHECK(kinds.size() == 12);
  CHECK(seen_count == 8);

  // train mixes draw only from the seen pool
  for (const ManifestRecord& r : train) {
    const std::string kind =
        fs::path(r.noise_path).stem().string();
    REQUIRE(kinds.count(kind) == 1);
    CHECK(kinds.at(kind));
    CHECK(r.snr_db >= -5.0);
    CHECK(r.snr_db <= 10.0);
  }

  // every record's noise window fits inside its noise file
  auto check_windows = [&](const Manifest& m) {
    for (const ManifestRecord& r : m) {
      const Waveform clean = read_wav((a.path / r.clean_path).string());
      const Waveform noise = read_wav((a.path / r.noise_path).string());
      CHECK(r.offset_samples + clean.samples.size() <= noise.samples.size());
    }
  };
  check_windows(train);
  check_windows(test);

  // test covers both pools at every listed level
  std::set<double> snrs;
  bool any_seen = false, any_unseen = false;
  for (const ManifestRecord& r : test) {
    snrs.insert(r.snr_db);
    const std::string kind = fs::path(r.noise_path).stem().string();
    (kinds.at(kind) ? any_seen : any_unseen) = true;
  }
  CHECK(snrs == std::set<double>{-5.0, 0.0, 5.0, 10.0});
  CHECK(any_seen);
  CHECK(any_unseen);
}

TEST_CASE("realized mixtures hit the requested ratio") {
  TempDir td("realize");
  synthesize_corpus(small_spec(td.path.string(), 7));
  const Manifest m = read_manifest((td.path / "train.tsv").string());
  REQUIRE(!m.empty());
  for (const ManifestRecord& r : m) {
    Utterance u = realize(td.path.string(), r);
    REQUIRE(u.mixture.size() == u.clean.size());
    const Waveform noise = read_wav((td.path / r.noise_path).string());
    double ps = 0.0, pn = 0.0;
    for (std::size_t i = 0; i < u.clean.size(); ++i) {
      ps += u.clean[i] * u.clean[i];
      const double n = u.alpha * noise.samples[r.offset_samples + i];
      pn += n * n;
      CHECK(u.mixture[i] == doctest::Approx(u.clean[i] + n).epsilon(1e-12));
    }
    const double achieved = 10.0 * std::log10(ps / pn);
    CHECK(achieved == doctest::Approx(r.snr_db).epsilon(1e-9));
  }

  ManifestRecord bad = m[0];
  bad.offset_samples = 1u << 30;
  CHECK_THROWS_AS(realize(td.path.string(), bad), ContractError);
}

TEST_CASE("feature extraction matches the front end frame rule") {
  TempDir td("features");
  synthesize_corpus(small_spec(td.path.string(), 11));
  const Manifest m = read_manifest((td.path / "val.tsv").string());
  StftConfig cfg;
  cfg.fft_size = 320;
  cfg.win_length = 320;
  cfg.hop = 160;
  Utterance u = realize(td.path.string(), m[0]);
  FeaturePair fp = features_for(u, cfg);
  CHECK(fp.bins == 161);
  CHECK(fp.frames == 1 + (u.mixture.size() - cfg.win_length) / cfg.hop);
  CHECK(fp.noisy.size() == fp.frames * fp.bins);
  for (double v : fp.noisy) CHECK(v >= 0.0);
}

TEST_CASE("white noise is flat across the band") {
  Rng rng(13);
  std::vector<double> w = make_noise("white", rng, 64000, 16000);
  StftConfig cfg;
  cfg.fft_size = 320;
  cfg.win_length = 320;
  cfg.hop = 160;
  MagnitudeSpectrogram mag = magnitude(stft(w, cfg));
  std::vector<double> band_power;
  for (std::size_t f = 2; f <= 140; ++f) {  // 100 Hz to 7 kHz at 50 Hz per bin
    double p = 0.0;
    for (std::size_t t = 0; t < mag.frames; ++t) p += mag.at(t, f) * mag.at(t, f);
    band_power.push_back(p / static_cast<double>(mag.frames));
  }
  double mean = 0.0;
  for (double p : band_power) mean += p;
  mean /= static_cast<double>(band_power.size());
  for (double p : band_power) CHECK(std::abs(10.0 * std::log10(p / mean)) < 2.0);
}

TEST_CASE("every noise kind synthesizes and unknown names are refused") {
  for (const NoiseKind& k : noise_kinds()) {
    Rng rng(17);
    std::vector<double> n = make_noise(k.name, rng, 8000, 16000);
    CHECK(n.size() == 8000);
    double peak = 0.0, power = 0.0;
    for (double v : n) {
      peak = std::max(peak, std::abs(v));
      power += v * v;
    }
    INFO("kind ", k.name);
    CHECK(peak <= 0.99);
    CHECK(power > 0.0);
  }
  Rng rng(18);
  CHECK_THROWS_AS(make_noise("purple", rng, 100, 16000), InputError);
}
