#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "darcn/model.hpp"

namespace darcn {

struct TrainConfig {
  ArchConfig arch;
  std::string data_dir;    // corpus root holding train.tsv and val.tsv
  std::string out_dir;     // receives best.ckpt, last.ckpt and train_log.tsv
  double lr = 1e-3;
  std::size_t batch_size = 4;
  std::uint64_t seed = 1;
  std::size_t epoch_cap = 50;
  double grad_clip = 0.0;  // max global gradient norm, 0 disables
  std::string resume;      // optional last.ckpt to continue from
};

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double lr = 0.0;        // rate in effect during the epoch
  double train_loss = 0.0;
  std::vector<double> stage_losses;  // validation loss per stage
  double val_loss = 0.0;             // their sum
};

struct TrainResult {
  std::vector<EpochStats> history;   // epochs run by this invocation
  double initial_train_loss = 0.0;   // before the first update of this run
  double initial_val_loss = 0.0;
  double best_val = 0.0;
  std::size_t best_epoch = 0;
  bool stopped_early = false;  // schedule stop rather than epoch cap
  std::string best_path, last_path, log_path;
};

// Runs the recursive-stage training loop: per batch a full Q-stage forward,
// masked accumulated loss, backward and one Adam step; per epoch a validation
// pass with normalization statistics frozen, a metrics log line, the plateau
// schedule decision and checkpoints (best weights in f32, full resume state
// in f64). Single-threaded and bit-deterministic for a fixed seed.
TrainResult train(const TrainConfig& cfg);

}  // namespace darcn
