#pragma once

#include <cstddef>
#include <vector>

#include "darcn/checkpoint.hpp"
#include "darcn/layers.hpp"

namespace darcn {

// Adam with bias correction over a fixed parameter list. Moment buffers are
// addressed by parameter name when serialized so a resumed run continues the
// trajectory exactly.
class Adam {
 public:
  Adam() = default;
  Adam(ParamList params, double lr);

  void step();       // applies one update from the current gradients
  void zero_grad();  // clears gradients on every managed parameter

  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }
  std::size_t steps_taken() const { return t_; }

  void state_into(Checkpoint& out) const;
  void load_state(const Checkpoint& c);

 private:
  ParamList params_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
  double lr_ = 1e-3;
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
};

enum class ScheduleAction { Continue, Halve, Stop };

// Validation-driven plateau schedule: each epoch whose validation loss lands
// above the best seen so far bumps a counter, a new best resets it. The
// learning rate halves on the third, sixth and ninth consecutive bump and the
// tenth stops the run.
struct ScheduleState {
  double best_val = 0.0;
  bool has_best = false;
  std::size_t since_best = 0;

  ScheduleAction epoch_end(double val_loss);

  void state_into(Checkpoint& out) const;
  void load_state(const Checkpoint& c);
};

}  // namespace darcn
