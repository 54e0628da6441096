#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "darcn/layers.hpp"
#include "darcn/tensor.hpp"

namespace darcn {

// One named array in a checkpoint. Values live as doubles in memory; `f64`
// picks the on-disk width (export files use f32, resume files f64).
struct CheckpointEntry {
  std::string name;
  bool f64 = true;
  Shape dims;
  std::vector<double> values;
};

using Checkpoint = std::vector<CheckpointEntry>;

void save_checkpoint(const std::string& path, const Checkpoint& entries);
Checkpoint load_checkpoint(const std::string& path);

// Entry helpers for scalar bookkeeping values (epoch counters, learning rate).
CheckpointEntry scalar_entry(const std::string& name, double v, bool f64 = true);
const CheckpointEntry* find_entry(const Checkpoint& c, const std::string& name);
double find_scalar(const Checkpoint& c, const std::string& name);

// Copies every named tensor into entries (running stats included).
Checkpoint snapshot_params(ParamList& params, bool f64);

// Writes values back into matching tensors by name. Every parameter must be
// present with the right shape; entries with no matching parameter (optimizer
// state riding along) are left for other consumers.
void restore_params(ParamList& params, const Checkpoint& entries);

}  // namespace darcn
