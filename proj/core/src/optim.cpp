#include "darcn/optim.hpp"

#include <cmath>

#include "darcn/errors.hpp"

namespace darcn {

Adam::Adam(ParamList params, double lr) : params_(std::move(params)), lr_(lr) {
  m_.resize(params_.size());
  v_.resize(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) {
    m_[i].assign(params_[i].tensor.numel(), 0.0);
    v_[i].assign(params_[i].tensor.numel(), 0.0);
  }
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i].tensor;
    const std::vector<double>& g = p.grad();
    if (g.size() != p.numel())
      throw ContractError("adam: parameter '" + params_[i].name + "' has no gradient");
    std::vector<double>& data = p.data();
    for (std::size_t j = 0; j < g.size(); ++j) {
      if (!std::isfinite(g[j]))
        throw NumericError("adam: non-finite gradient in '" + params_[i].name + "'");
      m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * g[j];
      v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * g[j] * g[j];
      const double mhat = m_[i][j] / c1;
      const double vhat = v_[i][j] / c2;
      data[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

void Adam::zero_grad() {
  for (NamedParam& p : params_) p.tensor.zero_grad();
}

void Adam::state_into(Checkpoint& out) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    CheckpointEntry em;
    em.name = "opt.m." + params_[i].name;
    em.dims = params_[i].tensor.shape();
    em.values = m_[i];
    out.push_back(std::move(em));
    CheckpointEntry ev;
    ev.name = "opt.v." + params_[i].name;
    ev.dims = params_[i].tensor.shape();
    ev.values = v_[i];
    out.push_back(std::move(ev));
  }
  out.push_back(scalar_entry("opt.t", static_cast<double>(t_)));
  out.push_back(scalar_entry("opt.lr", lr_));
}

void Adam::load_state(const Checkpoint& c) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const CheckpointEntry* em = find_entry(c, "opt.m." + params_[i].name);
    const CheckpointEntry* ev = find_entry(c, "opt.v." + params_[i].name);
    if (!em || !ev)
      throw ContractError("adam: checkpoint has no optimizer state for '" + params_[i].name +
                          "'");
    if (em->values.size() != m_[i].size() || ev->values.size() != v_[i].size())
      throw ContractError("adam: optimizer state size mismatch for '" + params_[i].name + "'");
    m_[i] = em->values;
    v_[i] = ev->values;
  }
  t_ = static_cast<std::size_t>(find_scalar(c, "opt.t"));
  lr_ = find_scalar(c, "opt.lr");
}

ScheduleAction ScheduleState::epoch_end(double val_loss) {
  if (!std::isfinite(val_loss)) throw NumericError("schedule: validation loss is not finite");
  if (!has_best || val_loss < best_val) {
    best_val = val_loss;
    has_best = true;
    since_best = 0;
    return ScheduleAction::Continue;
  }
  if (val_loss > best_val) {
    ++since_best;
    if (since_best >= 10) return ScheduleAction::Stop;
    if (since_best % 3 == 0) return ScheduleAction::Halve;
  }
  return ScheduleAction::Continue;
}

void ScheduleState::state_into(Checkpoint& out) const {
  out.push_back(scalar_entry("sched.best_val", best_val));
  out.push_back(scalar_entry("sched.has_best", has_best ? 1.0 : 0.0));
  out.push_back(scalar_entry("sched.since_best", static_cast<double>(since_best)));
}

void ScheduleState::load_state(const Checkpoint& c) {
  best_val = find_scalar(c, "sched.best_val");
  has_best = find_scalar(c, "sched.has_best") != 0.0;
  since_best = static_cast<std::size_t>(find_scalar(c, "sched.since_best"));
}

}  // namespace darcn
