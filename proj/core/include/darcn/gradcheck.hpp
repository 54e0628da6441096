#pragma once

#include <functional>
#include <string>
#include <vector>

#include "darcn/tensor.hpp"

namespace darcn {

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::size_t checked = 0;
  std::string worst;  // "leaf[i]" of the worst element
};

// Compares reverse-mode gradients of a scalar loss against central finite
// differences. `make_loss` must rebuild the graph from current leaf values on
// every call; it is evaluated with gradients disabled during perturbation.
// Element errors use |a - n| / max(|a|, |n|, floor) so near-zero gradients are
// judged on an absolute scale.
GradCheckResult finite_diff_check(const std::function<Tensor()>& make_loss,
                                  const std::vector<std::pair<std::string, Tensor>>& leaves,
                                  double step = 1e-5, std::size_t sample_stride = 1,
                                  double denom_floor = 1e-3);

}  // namespace darcn
