#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "darcn/data.hpp"
#include "darcn/stft.hpp"

namespace darcn {

// Scale-invariant ratio of target energy to residual energy, in dB, capped to
// [-100, 100]. Invariant to rescaling of the estimate. An all-zero reference
// is unusable; an estimate with no component along the reference caps low.
double si_sdr(const std::vector<double>& est, const std::vector<double>& ref);

// Frame-wise scale-invariant ratio averaged over active frames (reference
// level above -40 dBFS), each frame clamped to [-10, 35] dB before averaging.
// No active frames means the metric is undefined.
std::optional<double> seg_snr(const std::vector<double>& est, const std::vector<double>& ref,
                              std::size_t frame = 320, std::size_t hop = 160);

// Mean squared difference between two magnitude spectrograms.
double magnitude_mse(const MagnitudeSpectrogram& a, const MagnitudeSpectrogram& b);

using Enhancer = std::function<std::vector<double>(const std::vector<double>& mixture)>;

struct UtteranceEval {
  std::size_t index = 0;
  std::string clean_path;
  std::string kind;
  bool seen = true;
  double snr_db = 0.0;
  std::string split;
  double si_sdr_noisy = 0.0, si_sdr_enhanced = 0.0;
  std::optional<double> seg_noisy, seg_enhanced;
  double mse_noisy = 0.0, mse_enhanced = 0.0;
};

struct EvalRow {
  std::string split;
  std::string noise_kind;  // a kind name, or the pools "seen"/"unseen"/"all"
  double snr_db = 0.0;     // NaN marks rows pooled across levels
  std::string metric;
  double noisy_value = 0.0;
  double enhanced_value = 0.0;
};

struct EvalReport {
  std::vector<UtteranceEval> utterances;
  std::vector<EvalRow> rows;

  std::string tsv() const;   // aggregate table
  std::string json() const;  // full per-utterance detail

  // Convenience lookup into the aggregate rows; NaN snr matches pooled rows.
  const EvalRow* find(const std::string& kind, double snr_db, const std::string& metric) const;
};

// Mixes every record, runs the enhancer on the mixture, and scores noisy and
// enhanced signals against the clean reference over the interior region
// [win, covered - win) where the analysis window is fully supported. Workers
// share nothing; results are ordered by record index regardless of thread
// count.
EvalReport evaluate_manifest(const std::string& root, const Manifest& manifest,
                             const std::map<std::string, bool>& kinds, const Enhancer& enhance,
                             const StftConfig& cfg, std::size_t threads = 1);

}  // namespace darcn
