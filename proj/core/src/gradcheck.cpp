#include "darcn/gradcheck.hpp"

#include <cmath>

#include "darcn/errors.hpp"

namespace darcn {

GradCheckResult finite_diff_check(const std::function<Tensor()>& make_loss,
                                  const std::vector<std::pair<std::string, Tensor>>& leaves,
                                  double step, std::size_t sample_stride, double denom_floor) {
  if (sample_stride == 0) sample_stride = 1;

  for (auto& [name, leaf] : leaves) {
    (void)name;
    if (!leaf.requires_grad())
      throw ContractError("finite_diff_check: leaf '" + name + "' does not track gradients");
  }

  Tensor loss = make_loss();
  for (auto& [name, leaf] : leaves) {
    (void)name;
    const_cast<Tensor&>(leaf).zero_grad();
  }
  loss.backward();

  std::vector<std::vector<double>> analytic;
  analytic.reserve(leaves.size());
  for (auto& [name, leaf] : leaves) {
    (void)name;
    analytic.push_back(leaf.grad());
  }

  GradCheckResult res;
  NoGradGuard ng;
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    Tensor leaf = leaves[li].second;
    std::vector<double>& vals = leaf.data();
    for (std::size_t i = 0; i < vals.size(); i += sample_stride) {
      const double saved = vals[i];
      vals[i] = saved + step;
      const double up = make_loss().item();
      vals[i] = saved - step;
      const double dn = make_loss().item();
      vals[i] = saved;

      const double numeric = (up - dn) / (2.0 * step);
      const double a = analytic[li][i];
      const double denom = std::max({std::fabs(a), std::fabs(numeric), denom_floor});
      const double rel = std::fabs(a - numeric) / denom;
      ++res.checked;
      if (rel > res.max_rel_err) {
        res.max_rel_err = rel;
        res.worst = leaves[li].first + "[" + std::to_string(i) + "]";
      }
    }
  }
  return res;
}

}  // namespace darcn
