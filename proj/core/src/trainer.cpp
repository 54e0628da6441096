#include "darcn/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "darcn/checkpoint.hpp"
#include "darcn/data.hpp"
#include "darcn/errors.hpp"
#include "darcn/optim.hpp"

namespace darcn {

namespace {

namespace fs = std::filesystem;

std::vector<FeaturePair> load_features(const std::string& root, const Manifest& manifest,
                                       const StftConfig& cfg) {
  std::vector<FeaturePair> out;
  out.reserve(manifest.size());
  for (const ManifestRecord& rec : manifest) out.push_back(features_for(realize(root, rec), cfg));
  return out;
}

std::vector<std::vector<std::size_t>> fixed_plan(std::size_t count, std::size_t batch_size) {
  std::vector<std::vector<std::size_t>> plan;
  for (std::size_t i = 0; i < count; i += batch_size) {
    std::vector<std::size_t> chunk;
    for (std::size_t j = i; j < std::min(i + batch_size, count); ++j) chunk.push_back(j);
    plan.push_back(std::move(chunk));
  }
  return plan;
}

double frames_of(const Batch& b) {
  std::size_t n = 0;
  for (std::size_t len : b.lengths) n += len;
  return static_cast<double>(n);
}

struct ValScore {
  std::vector<double> stage;  // frame-weighted masked loss per stage
  double total = 0.0;
};

ValScore validation_pass(DarcnModel& model, const std::vector<FeaturePair>& items,
                         std::size_t stages, std::size_t batch_size, bool train_mode = false) {
  NoGradGuard ng;
  ValScore score;
  score.stage.assign(stages, 0.0);
  double weight = 0.0;
  for (const auto& ids : fixed_plan(items.size(), batch_size)) {
    Batch b = make_batch(items, ids);
    auto traces = model.forward(b.input, stages, train_mode);
    Tensor loss = model.accumulated_loss(traces, b.target, b.mask);
    (void)loss;
    const double w = frames_of(b);
    for (std::size_t l = 0; l < stages; ++l) score.stage[l] += traces[l].stage_loss * w;
    weight += w;
  }
  if (weight <= 0.0) throw ContractError("train: validation set has no frames");
  for (double& d : score.stage) {
    d /= weight;
    score.total += d;
  }
  return score;
}

void clip_gradients(ParamList& params, double max_norm) {
  double sq = 0.0;
  for (NamedParam& p : params) {
    if (!p.trainable) continue;
    for (double g : p.tensor.grad()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (norm <= max_norm) return;
  const double scale = max_norm / norm;
  for (NamedParam& p : params) {
    if (!p.trainable) continue;
    for (double& g : p.tensor.grad()) g *= scale;
  }
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_best(const std::string& path, ParamList& params, const ArchConfig& arch) {
  Checkpoint c = snapshot_params(params, false);
  c.push_back(scalar_entry("cfg.feature_len", static_cast<double>(arch.feature_len)));
  c.push_back(scalar_entry("cfg.stages", static_cast<double>(arch.stages)));
  save_checkpoint(path, c);
}

void write_last(const std::string& path, ParamList& params, const Adam& opt,
                const ScheduleState& sched, std::size_t epoch, std::size_t best_epoch,
                const ArchConfig& arch) {
  Checkpoint c = snapshot_params(params, true);
  opt.state_into(c);
  sched.state_into(c);
  c.push_back(scalar_entry("epoch", static_cast<double>(epoch)));
  c.push_back(scalar_entry("best_epoch", static_cast<double>(best_epoch)));
  c.push_back(scalar_entry("cfg.feature_len", static_cast<double>(arch.feature_len)));
  c.push_back(scalar_entry("cfg.stages", static_cast<double>(arch.stages)));
  save_checkpoint(path, c);
}

}  // namespace

TrainResult train(const TrainConfig& cfg) {
  cfg.arch.validate();
  if (cfg.batch_size == 0) throw ConfigError("train: batch_size must be positive");
  if (cfg.epoch_cap == 0) throw ConfigError("train: epoch_cap must be positive");
  if (!(cfg.lr > 0.0)) throw ConfigError("train: learning rate must be positive");
  if (cfg.out_dir.empty()) throw ConfigError("train: out_dir is required");
  fs::create_directories(cfg.out_dir);

  const StftConfig stft_cfg = cfg.arch.stft();
  const std::size_t stages = cfg.arch.stages;
  const Manifest train_man = read_manifest((fs::path(cfg.data_dir) / "train.tsv").string());
  const Manifest val_man = read_manifest((fs::path(cfg.data_dir) / "val.tsv").string());
  if (train_man.empty()) throw InputError("train: empty training manifest");
  if (val_man.empty()) throw InputError("train: empty validation manifest");
  std::vector<FeaturePair> train_items = load_features(cfg.data_dir, train_man, stft_cfg);
  std::vector<FeaturePair> val_items = load_features(cfg.data_dir, val_man, stft_cfg);

  Rng master(cfg.seed);
  Rng init_rng = master.fork(1);
  DarcnModel model(cfg.arch, init_rng);
  ParamList params = model.parameters();
  Adam opt(model.trainable_parameters(), cfg.lr);
  ScheduleState sched;

  std::size_t start_epoch = 0;
  std::size_t best_epoch = 0;
  if (!cfg.resume.empty()) {
    Checkpoint c = load_checkpoint(cfg.resume);
    if (find_scalar(c, "cfg.feature_len") != static_cast<double>(cfg.arch.feature_len) ||
        find_scalar(c, "cfg.stages") != static_cast<double>(stages))
      throw ContractError("train: checkpoint geometry does not match the configuration");
    restore_params(params, c);
    opt.load_state(c);
    sched.load_state(c);
    start_epoch = static_cast<std::size_t>(find_scalar(c, "epoch"));
    best_epoch = static_cast<std::size_t>(find_scalar(c, "best_epoch"));
  }

  TrainResult result;
  result.best_path = (fs::path(cfg.out_dir) / "best.ckpt").string();
  result.last_path = (fs::path(cfg.out_dir) / "last.ckpt").string();
  result.log_path = (fs::path(cfg.out_dir) / "train_log.tsv").string();
  result.best_epoch = best_epoch;

  if (start_epoch == 0) {
    // fresh normalization layers have no running statistics yet, so measure
    // with batch statistics and roll the incidental updates back
    Checkpoint pristine = snapshot_params(params, true);
    result.initial_train_loss =
        validation_pass(model, train_items, stages, cfg.batch_size, true).total;
    result.initial_val_loss = validation_pass(model, val_items, stages, cfg.batch_size, true).total;
    restore_params(params, pristine);
  } else {
    result.initial_train_loss = validation_pass(model, train_items, stages, cfg.batch_size).total;
    result.initial_val_loss = validation_pass(model, val_items, stages, cfg.batch_size).total;
  }

  std::ofstream log(result.log_path, start_epoch == 0 ? std::ios::trunc : std::ios::app);
  if (!log) throw InputError("train: cannot open log " + result.log_path);
  if (start_epoch == 0) {
    log << "epoch\tlr";
    log << "\ttrain_loss";
    for (std::size_t l = 1; l <= stages; ++l) log << "\tval_stage" << l;
    log << "\tval_loss\n";
  }

  for (std::size_t epoch = start_epoch + 1; epoch <= cfg.epoch_cap; ++epoch) {
    const double lr_used = opt.lr();

    Rng epoch_rng = master.fork(100 + epoch);
    double train_sum = 0.0, train_weight = 0.0;
    for (const auto& ids : batch_plan(train_items.size(), cfg.batch_size, epoch_rng)) {
      Batch b = make_batch(train_items, ids);
      auto traces = model.forward(b.input, stages, true);
      Tensor loss = model.accumulated_loss(traces, b.target, b.mask);
      const double value = loss.item();
      if (!std::isfinite(value))
        throw NumericError("train: loss diverged at epoch " + std::to_string(epoch));
      opt.zero_grad();
      loss.backward();
      if (cfg.grad_clip > 0.0) clip_gradients(params, cfg.grad_clip);
      opt.step();
      const double w = frames_of(b);
      train_sum += value * w;
      train_weight += w;
    }
    const double train_loss = train_sum / train_weight;

    ValScore val = validation_pass(model, val_items, stages, cfg.batch_size);

    EpochStats stats;
    stats.epoch = epoch;
    stats.lr = lr_used;
    stats.train_loss = train_loss;
    stats.stage_losses = val.stage;
    stats.val_loss = val.total;
    result.history.push_back(stats);

    log << epoch << '\t' << num(lr_used) << '\t' << num(train_loss);
    for (double d : val.stage) log << '\t' << num(d);
    log << '\t' << num(val.total) << '\n';
    log.flush();

    const ScheduleAction act = sched.epoch_end(val.total);
    if (sched.since_best == 0) {
      best_epoch = epoch;
      write_best(result.best_path, params, cfg.arch);
    }
    if (act == ScheduleAction::Halve) opt.set_lr(opt.lr() * 0.5);
    write_last(result.last_path, params, opt, sched, epoch, best_epoch, cfg.arch);
    if (act == ScheduleAction::Stop) {
      result.stopped_early = true;
      break;
    }
  }

  result.best_val = sched.best_val;
  result.best_epoch = best_epoch;
  return result;
}

}  // namespace darcn
