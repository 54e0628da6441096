#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace darcn {

struct AuditRow {
  std::string name;
  double max_rel_err = 0.0;
  std::size_t checked = 0;
  bool pass = false;
  std::string worst;  // leaf coordinate of the largest error
};

struct AuditReport {
  std::vector<AuditRow> rows;
  double tolerance = 0.0;
  bool all_pass() const;
  std::string table() const;
};

// Finite-difference sweep over every differentiable op, the composite blocks
// and the small end-to-end preset run for two stages. `e2e_stride` subsamples
// the end-to-end parameter coordinates (1 checks all of them).
AuditReport gradient_audit(std::uint64_t seed, std::size_t e2e_stride = 1, double tol = 1e-4);

}  // namespace darcn
