#pragma once

#include <map>
#include <string>
#include <vector>

#include "darcn/rng.hpp"
#include "darcn/stft.hpp"
#include "darcn/tensor.hpp"

namespace darcn {

// One mixing instruction: which clean file, which noise file, where the noise
// window starts, and the target signal-to-noise ratio.
struct ManifestRecord {
  std::string clean_path;  // relative to the corpus root
  std::string noise_path;
  std::size_t offset_samples = 0;
  double snr_db = 0.0;
  std::string split;
};

using Manifest = std::vector<ManifestRecord>;

Manifest read_manifest(const std::string& path);
void write_manifest(const std::string& path, const Manifest& records);

// kind name -> true when the kind participates in training mixes.
std::map<std::string, bool> read_kinds(const std::string& path);
void write_kinds(const std::string& path, const std::map<std::string, bool>& kinds);

struct Utterance {
  std::vector<double> mixture;
  std::vector<double> clean;
  double alpha = 0.0;  // gain applied to the noise window
};

// Loads both files, slices the noise window and mixes at the requested SNR.
Utterance realize(const std::string& root, const ManifestRecord& rec);

// Magnitude features of one utterance; frames x bins, time-major.
struct FeaturePair {
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::vector<double> noisy;
  std::vector<double> clean;
};

FeaturePair features_for(const Utterance& u, const StftConfig& cfg);

struct Batch {
  Tensor input;   // [B, T, F] noisy magnitude, zero padded
  Tensor target;  // [B, T, F] clean magnitude
  Tensor mask;    // [B, T] 1 on real frames
  std::vector<std::size_t> lengths;
};

Batch make_batch(const std::vector<FeaturePair>& items, const std::vector<std::size_t>& order);

// Shuffled contiguous chunks: every item exactly once, final chunk short when
// the count does not divide evenly.
std::vector<std::vector<std::size_t>> batch_plan(std::size_t count, std::size_t batch_size,
                                                 Rng& rng);

}  // namespace darcn
