#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "darcn/rng.hpp"

namespace darcn {

// Corpus generation knobs. Counts are utterances per split; durations are
// drawn uniformly per utterance.
struct SynthSpec {
  std::string out_dir;
  std::uint64_t seed = 0;
  std::size_t train_count = 200;
  std::size_t val_count = 40;
  std::size_t test_count = 20;
  double min_seconds = 0.6;
  double max_seconds = 1.2;
  std::size_t sample_rate = 16000;
  double noise_seconds = 8.0;  // per noise file, leaves offset room
};

struct NoiseKind {
  std::string name;
  bool seen;  // appears in train/val mixes; the rest are held out for testing
};

const std::vector<NoiseKind>& noise_kinds();

// Voiced, formant-shaped harmonic signal with pitch drift and syllabic
// amplitude modulation. Peak-normalized below 1.
std::vector<double> make_clean_utterance(Rng& rng, std::size_t len, std::size_t sample_rate);

// One realization of a named noise kind, RMS-normalized.
std::vector<double> make_noise(const std::string& kind, Rng& rng, std::size_t len,
                               std::size_t sample_rate);

// Writes clean/<split>_NNN.wav, noise/<kind>.wav, kinds.tsv and the three
// split manifests under spec.out_dir. Fully determined by spec.seed.
void synthesize_corpus(const SynthSpec& spec);

}  // namespace darcn
