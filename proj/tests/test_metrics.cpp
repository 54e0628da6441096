#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "darcn/errors.hpp"
#include "darcn/metrics.hpp"
#include "darcn/rng.hpp"
#include "darcn/synth.hpp"

using namespace darcn;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::path("/tmp") / ("darcn_metrics_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::vector<double> sine(std::size_t n, double freq, double rate, double amp) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i)
    v[i] = amp * std::sin(2.0 * M_PI * freq * static_cast<double>(i) / rate);
  return v;
}

}  // namespace

TEST_CASE("si_sdr saturates on a perfect estimate and ignores scale") {
  std::vector<double> s = sine(1000, 440.0, 16000.0, 0.5);
  CHECK(si_sdr(s, s) == 100.0);
  std::vector<double> half = s;
  for (double& v : half) v *= 0.5;
  CHECK(si_sdr(half, s) == 100.0);
  std::vector<double> neg = s;
  for (double& v : neg) v *= -3.0;
  CHECK(si_sdr(neg, s) == 100.0);
}

TEST_CASE("si_sdr is zero for an orthogonal equal power residual") {
  std::vector<double> ref = {1.0, 0.0, 1.0, 0.0};
  std::vector<double> est = {1.0, 1.0, 1.0, -1.0};  // ref + orthogonal noise of equal power
  CHECK(si_sdr(est, ref) == doctest::Approx(0.0).epsilon(1e-12));

  std::vector<double> est2 = {1.0, 0.5, 1.0, -0.5};  // noise power a quarter of the signal
  CHECK(si_sdr(est2, ref) == doctest::Approx(10.0 * std::log10(4.0)).epsilon(1e-12));
}

TEST_CASE("si_sdr input contracts") {
  std::vector<double> s = {1.0, 2.0};
  std::vector<double> zero = {0.0, 0.0};
  CHECK_THROWS_AS(si_sdr(s, zero), InputError);
  CHECK_THROWS_AS(si_sdr(std::vector<double>{}, std::vector<double>{}), InputError);
  CHECK_THROWS_AS(si_sdr(s, std::vector<double>{1.0}), ShapeError);
  CHECK(si_sdr(zero, s) == -100.0);  // nothing of the target captured
  std::vector<double> orth = {2.0, -1.0};
  CHECK(si_sdr(orth, s) == -100.0);
}

TEST_CASE("seg_snr clamps per frame") {
  std::vector<double> ref = sine(960, 500.0, 16000.0, 0.4);
  CHECK(seg_snr(ref, ref).value() == doctest::Approx(35.0).epsilon(1e-12));
  std::vector<double> zero(ref.size(), 0.0);
  CHECK(seg_snr(zero, ref).value() == doctest::Approx(-10.0).epsilon(1e-12));
}

TEST_CASE("seg_snr averages hand built frames") {
  // two disjoint frames of four samples; the first is reproduced exactly
  // (clamped to 35), the second gets orthogonal equal-power noise (0)
  std::vector<double> ref = {1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0};
  std::vector<double> est = {1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 1.0, -1.0};
  auto v = seg_snr(est, ref, 4, 4);
  REQUIRE(v.has_value());
  CHECK(*v == doctest::Approx(17.5).epsilon(1e-12));
}

TEST_CASE("seg_snr skips quiet frames and can be undefined") {
  // loud frame then near-silence: only the loud frame counts
  std::vector<double> ref = {0.5, -0.5, 0.5, -0.5, 1e-4, -1e-4, 1e-4, -1e-4};
  std::vector<double> est = ref;
  est[5] += 1.0;  // damage only the quiet frame
  auto v = seg_snr(est, ref, 4, 4);
  REQUIRE(v.has_value());
  CHECK(*v == doctest::Approx(35.0).epsilon(1e-12));

  std::vector<double> quiet(640, 1e-4);
  CHECK(!seg_snr(quiet, quiet).has_value());
  std::vector<double> tiny = {1.0, 2.0};
  CHECK(!seg_snr(tiny, tiny).has_value());  // shorter than one frame
}

TEST_CASE("magnitude mse") {
  MagnitudeSpectrogram a(2, 3), b(2, 3);
  for (std::size_t i = 0; i < 6; ++i) {
    a.v[i] = static_cast<double>(i);
    b.v[i] = static_cast<double>(i);
  }
  CHECK(magnitude_mse(a, b) == 0.0);
  b.v[0] += 3.0;
  CHECK(magnitude_mse(a, b) == doctest::Approx(9.0 / 6.0).epsilon(1e-12));
  MagnitudeSpectrogram c(3, 2);
  CHECK_THROWS_AS(magnitude_mse(a, c), ShapeError);
}

TEST_CASE("identity enhancement scores exactly like the mixture") {
  TempDir td("identity");
  SynthSpec spec;
  spec.out_dir = td.path.string();
  spec.seed = 3;
  spec.train_count = 0;
  spec.val_count = 0;
  spec.test_count = 3;
  spec.min_seconds = 1.0;
  spec.max_seconds = 1.3;
  spec.noise_seconds = 2.5;
  synthesize_corpus(spec);

  const Manifest m = read_manifest((td.path / "test.tsv").string());
  const auto kinds = read_kinds((td.path / "kinds.tsv").string());
  StftConfig cfg;
  cfg.fft_size = 320;
  cfg.win_length = 320;
  cfg.hop = 160;
  auto identity = [](const std::vector<double>& x) { return x; };
  EvalReport r = evaluate_manifest(td.path.string(), m, kinds, identity, cfg, 1);

  REQUIRE(r.utterances.size() == m.size());
  for (const UtteranceEval& e : r.utterances) {
    CHECK(e.si_sdr_enhanced == doctest::Approx(e.si_sdr_noisy).epsilon(1e-9));
    REQUIRE(e.seg_noisy.has_value());
    CHECK(*e.seg_enhanced == doctest::Approx(*e.seg_noisy).epsilon(1e-9));
    CHECK(e.mse_enhanced == doctest::Approx(e.mse_noisy).epsilon(1e-9));
    // mixing at a finite level must cost fidelity
    CHECK(e.si_sdr_noisy < 30.0);
  }
  for (const EvalRow& row : r.rows)
    CHECK(row.enhanced_value == doctest::Approx(row.noisy_value).epsilon(1e-9));

  // the aggregate table exposes pooled rows for both pools
  CHECK(r.find("all", std::numeric_limits<double>::quiet_NaN(), "si_sdr") != nullptr);
  const std::string tsv = r.tsv();
  CHECK(tsv.find("split\tnoise_kind\tsnr_db\tmetric\tnoisy_value\tenhanced_value\tdelta") == 0);
  const std::string js = r.json();
  CHECK(js.find("PESQ") != std::string::npos);
  CHECK(js.find("STOI") != std::string::npos);
}

TEST_CASE("evaluation is independent of the worker count") {
  TempDir td("threads");
  SynthSpec spec;
  spec.out_dir = td.path.string();
  spec.seed = 5;
  spec.train_count = 0;
  spec.val_count = 4;
  spec.test_count = 0;
  spec.min_seconds = 1.0;
  spec.max_seconds = 1.2;
  spec.noise_seconds = 2.5;
  synthesize_corpus(spec);

  const Manifest m = read_manifest((td.path / "val.tsv").string());
  const auto kinds = read_kinds((td.path / "kinds.tsv").string());
  StftConfig cfg;
  cfg.fft_size = 320;
  cfg.win_length = 320;
  cfg.hop = 160;
  auto attenuate = [](const std::vector<double>& x) {
    std::vector<double> y = x;
    for (double& v : y) v *= 0.7;
    return y;
  };
  EvalReport one = evaluate_manifest(td.path.string(), m, kinds, attenuate, cfg, 1);
  EvalReport three = evaluate_manifest(td.path.string(), m, kinds, attenuate, cfg, 3);
  CHECK(one.tsv() == three.tsv());
  CHECK(one.json() == three.json());
}

TEST_CASE("evaluate refuses enhancers that resize and unknown kinds") {
  TempDir td("contracts");
  SynthSpec spec;
  spec.out_dir = td.path.string();
  spec.seed = 6;
  spec.train_count = 1;
  spec.val_count = 0;
  spec.test_count = 0;
  spec.min_seconds = 1.0;
  spec.max_seconds = 1.1;
  spec.noise_seconds = 2.0;
  synthesize_corpus(spec);
  const Manifest m = read_manifest((td.path / "train.tsv").string());
  auto kinds = read_kinds((td.path / "kinds.tsv").string());
  StftConfig cfg;
  cfg.fft_size = 320;
  cfg.win_length = 320;
  cfg.hop = 160;

  auto truncate = [](const std::vector<double>& x) {
    return std::vector<double>(x.begin(), x.begin() + static_cast<long>(x.size() / 2));
  };
  CHECK_THROWS_AS(evaluate_manifest(td.path.string(), m, kinds, truncate, cfg, 1), InputError);

  auto identity = [](const std::vector<double>& x) { return x; };
  std::map<std::string, bool> empty_kinds;
  CHECK_THROWS_AS(evaluate_manifest(td.path.string(), m, empty_kinds, identity, cfg, 1),
                  InputError);
  CHECK_THROWS_AS(
      evaluate_manifest(td.path.string(), Manifest{}, kinds, identity, cfg, 1), InputError);
}
