#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace darcn {

struct Waveform {
  std::size_t sample_rate = 16000;
  std::vector<double> samples;  // in [-1, 1]
};

// PCM 16-bit signed little-endian, mono, 16 kHz. Anything else is rejected
// with a descriptive error.
Waveform read_wav(const std::string& path);

// Clamps to [-1, 1] before quantizing.
void write_wav(const std::string& path, const Waveform& w);

}  // namespace darcn
