#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "darcn/checkpoint.hpp"
#include "darcn/errors.hpp"
#include "darcn/synth.hpp"
#include "darcn/trainer.hpp"

using namespace darcn;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::path("/tmp") / ("darcn_trainer_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void make_corpus(const fs::path& dir, std::uint64_t seed, std::size_t train_n, std::size_t val_n) {
  SynthSpec spec;
  spec.out_dir = dir.string();
  spec.seed = seed;
  spec.train_count = train_n;
  spec.val_count = val_n;
  spec.test_count = 0;
  spec.min_seconds = 0.3;
  spec.max_seconds = 0.45;
  spec.noise_seconds = 1.5;
  synthesize_corpus(spec);
}

TrainConfig toy_config(const fs::path& data, const fs::path& out, std::size_t epochs) {
  TrainConfig cfg;
  cfg.arch = ArchConfig::tiny();
  cfg.arch.stages = 2;
  cfg.data_dir = data.string();
  cfg.out_dir = out.string();
  cfg.seed = 11;
  cfg.epoch_cap = epochs;
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("a few epochs on a toy corpus reduce the loss") {
  TempDir td("smoke");
  make_corpus(td.path / "data", 21, 8, 2);
  TrainConfig cfg = toy_config(td.path / "data", td.path / "run", 3);
  TrainResult r = train(cfg);

  REQUIRE(r.history.size() == 3);
  CHECK(r.history[0].epoch == 1);
  CHECK(r.history[0].lr == 1e-3);
  CHECK(std::isfinite(r.initial_train_loss));
  CHECK(r.initial_train_loss > 0.0);
  CHECK(std::isfinite(r.initial_val_loss));
  // updates lower the running training loss below the untrained model
  CHECK(r.history.back().train_loss < r.initial_train_loss);
  CHECK(r.history.back().train_loss < r.history[0].train_loss);
  CHECK(!r.stopped_early);
  CHECK(r.best_epoch >= 1);
  CHECK(r.best_val <= r.history[0].val_loss);

  for (const EpochStats& e : r.history) {
    REQUIRE(e.stage_losses.size() == 2);
    double sum = 0.0;
    for (double d : e.stage_losses) sum += d;
    CHECK(e.val_loss == doctest::Approx(sum).epsilon(1e-12));
  }

  CHECK(fs::exists(r.best_path));
  CHECK(fs::exists(r.last_path));
  CHECK(fs::exists(r.log_path));
}

TEST_CASE("the metrics log matches the in memory history") {
  TempDir td("log");
  make_corpus(td.path / "data", 22, 4, 2);
  TrainConfig cfg = toy_config(td.path / "data", td.path / "run", 2);
  TrainResult r = train(cfg);

  std::ifstream log(r.log_path);
  std::string header;
  REQUIRE(std::getline(log, header));
  CHECK(header == "epoch\tlr\ttrain_loss\tval_stage1\tval_stage2\tval_loss");

  for (const EpochStats& e : r.history) {
    std::string line;
    REQUIRE(std::getline(log, line));
    std::istringstream is(line);
    std::string field;
    std::getline(is, field, '\t');
    CHECK(std::stoul(field) == e.epoch);
    std::getline(is, field, '\t');
    CHECK(std::stod(field) == e.lr);
    std::getline(is, field, '\t');
    CHECK(std::stod(field) == e.train_loss);  // %.17g round-trips exactly
    for (double d : e.stage_losses) {
      std::getline(is, field, '\t');
      CHECK(std::stod(field) == d);
    }
    std::getline(is, field, '\t');
    CHECK(std::stod(field) == e.val_loss);
    CHECK(!std::getline(is, field, '\t'));  // no surplus columns
  }
  std::string extra;
  CHECK(!std::getline(log, extra));
}

TEST_CASE("identical seeds give byte identical artifacts") {
  TempDir td("determinism");
  make_corpus(td.path / "data", 23, 4, 2);
  TrainConfig a = toy_config(td.path / "data", td.path / "a", 1);
  TrainConfig b = toy_config(td.path / "data", td.path / "b", 1);
  TrainResult ra = train(a);
  TrainResult rb = train(b);
  CHECK(slurp(ra.last_path) == slurp(rb.last_path));
  CHECK(slurp(ra.best_path) == slurp(rb.best_path));
  CHECK(slurp(ra.log_path) == slurp(rb.log_path));

  TrainConfig c = toy_config(td.path / "data", td.path / "c", 1);
  c.seed = 12;
  TrainResult rc = train(c);
  CHECK(slurp(ra.last_path) != slurp(rc.last_path));
}

TEST_CASE("resuming reproduces the uninterrupted run bit for bit") {
  TempDir td("resume");
  make_corpus(td.path / "data", 24, 6, 2);

  TrainConfig full = toy_config(td.path / "data", td.path / "full", 3);
  TrainResult rf = train(full);
  REQUIRE(rf.history.size() == 3);

  TrainConfig part = toy_config(td.path / "data", td.path / "part", 2);
  TrainResult rp = train(part);
  REQUIRE(rp.history.size() == 2);

  TrainConfig rest = toy_config(td.path / "data", td.path / "part", 3);
  rest.resume = rp.last_path;
  TrainResult rr = train(rest);
  REQUIRE(rr.history.size() == 1);
  CHECK(rr.history[0].epoch == 3);

  CHECK(slurp(rf.last_path) == slurp(rr.last_path));
  CHECK(slurp(rf.log_path) == slurp(rr.log_path));
  CHECK(slurp(rf.best_path) == slurp(rr.best_path));
}

TEST_CASE("best checkpoint carries compact weights and the geometry") {
  TempDir td("best");
  make_corpus(td.path / "data", 25, 4, 2);
  TrainConfig cfg = toy_config(td.path / "data", td.path / "run", 2);
  TrainResult r = train(cfg);

  Checkpoint best = load_checkpoint(r.best_path);
  CHECK(find_scalar(best, "cfg.feature_len") == 17.0);
  CHECK(find_scalar(best, "cfg.stages") == 2.0);
  std::size_t weights = 0;
  for (const CheckpointEntry& e : best) {
    if (e.name.rfind("cfg.", 0) == 0) continue;
    CHECK(!e.f64);
    ++weights;
  }
  CHECK(weights > 10);

  Checkpoint last = load_checkpoint(r.last_path);
  CHECK(find_scalar(last, "epoch") == 2.0);
  CHECK(find_scalar(last, "opt.t") > 0.0);
  CHECK(find_scalar(last, "sched.has_best") == 1.0);
  // the resumable state keeps full precision
  for (const CheckpointEntry& e : last)
    if (e.name.rfind("agm.", 0) == 0 || e.name.rfind("nrm.", 0) == 0) CHECK(e.f64);
}

TEST_CASE("trainer rejects broken configurations") {
  TempDir td("reject");
  make_corpus(td.path / "data", 26, 2, 1);

  TrainConfig cfg = toy_config(td.path / "data", td.path / "run", 1);
  cfg.batch_size = 0;
  CHECK_THROWS_AS(train(cfg), ConfigError);

  cfg = toy_config(td.path / "data", td.path / "run", 1);
  cfg.lr = 0.0;
  CHECK_THROWS_AS(train(cfg), ConfigError);

  cfg = toy_config(td.path / "missing", td.path / "run", 1);
  CHECK_THROWS_AS(train(cfg), InputError);

  // resume checkpoint whose geometry disagrees with the requested model
  TrainConfig one = toy_config(td.path / "data", td.path / "one", 1);
  TrainResult r1 = train(one);
  TrainConfig other = toy_config(td.path / "data", td.path / "other", 2);
  other.arch.stages = 3;
  other.resume = r1.last_path;
  CHECK_THROWS_AS(train(other), ContractError);
}

TEST_CASE("gradient clipping path runs") {
  TempDir td("clip");
  make_corpus(td.path / "data", 27, 2, 1);
  TrainConfig cfg = toy_config(td.path / "data", td.path / "run", 1);
  cfg.batch_size = 2;
  cfg.grad_clip = 0.5;
  TrainResult r = train(cfg);
  REQUIRE(r.history.size() == 1);
  CHECK(std::isfinite(r.history[0].train_loss));
  CHECK(std::isfinite(r.history[0].val_loss));
}
