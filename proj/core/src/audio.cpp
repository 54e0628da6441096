#include "darcn/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "darcn/errors.hpp"

namespace darcn {

namespace {

std::uint32_t rd_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t rd_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void wr_u32(std::ofstream& f, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  f.write(reinterpret_cast<const char*>(b), 4);
}

void wr_u16(std::ofstream& f, std::uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff)};
  f.write(reinterpret_cast<const char*>(b), 2);
}

}  // namespace

Waveform read_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InputError("read_wav: cannot open " + path);
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(f)),
                                 std::istreambuf_iterator<char>());
  if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0)
    throw InputError("read_wav: " + path + " is not a RIFF/WAVE file");

  bool have_fmt = false;
  std::uint16_t fmt_tag = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::uint32_t data_len = 0;

  std::size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    const char* id = reinterpret_cast<const char*>(buf.data() + pos);
    const std::uint32_t len = rd_u32(buf.data() + pos + 4);
    const std::size_t body = pos + 8;
    if (body + len > buf.size()) throw InputError("read_wav: truncated chunk in " + path);
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (len < 16) throw InputError("read_wav: malformed fmt chunk in " + path);
      fmt_tag = rd_u16(buf.data() + body);
      channels = rd_u16(buf.data() + body + 2);
      rate = rd_u32(buf.data() + body + 4);
      bits = rd_u16(buf.data() + body + 14);
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      data = buf.data() + body;
      data_len = len;
    }
    pos = body + len + (len % 2);  // chunks are word-aligned
  }

  if (!have_fmt || data == nullptr) throw InputError("read_wav: missing fmt or data chunk in " + path);
  if (fmt_tag != 1) throw InputError("read_wav: " + path + " is not integer PCM (fmt tag " +
                                     std::to_string(fmt_tag) + ")");
  if (bits != 16) throw InputError("read_wav: " + path + " has " + std::to_string(bits) +
                                   "-bit samples, expected 16-bit");
  if (channels != 1) throw InputError("read_wav: " + path + " has " + std::to_string(channels) +
                                      " channels, expected mono");
  if (rate != 16000) throw InputError("read_wav: " + path + " sampled at " + std::to_string(rate) +
                                      " Hz, expected 16000");

  Waveform w;
  w.sample_rate = rate;
  const std::size_t n = data_len / 2;
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::int16_t s = static_cast<std::int16_t>(data[2 * i] | (data[2 * i + 1] << 8));
    w.samples[i] = static_cast<double>(s) / 32768.0;
  }
  return w;
}

void write_wav(const std::string& path, const Waveform& w) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("write_wav: cannot open " + path + " for writing");
  const std::uint32_t n = static_cast<std::uint32_t>(w.samples.size());
  const std::uint32_t data_bytes = n * 2;
  const std::uint32_t rate = static_cast<std::uint32_t>(w.sample_rate);

  f.write("RIFF", 4);
  wr_u32(f, 36 + data_bytes);
  f.write("WAVE", 4);
  f.write("fmt ", 4);
  wr_u32(f, 16);
  wr_u16(f, 1);  // PCM
  wr_u16(f, 1);  // mono
  wr_u32(f, rate);
  wr_u32(f, rate * 2);  // byte rate
  wr_u16(f, 2);         // block align
  wr_u16(f, 16);        // bits
  f.write("data", 4);
  wr_u32(f, data_bytes);
  for (std::size_t i = 0; i < n; ++i) {
    const long q = std::clamp<long>(std::lround(w.samples[i] * 32768.0), -32768, 32767);
    const std::int16_t s = static_cast<std::int16_t>(q);
    wr_u16(f, static_cast<std::uint16_t>(s));
  }
  if (!f) throw InputError("write_wav: failed writing " + path);
}

}  // namespace darcn
