#include "darcn/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "darcn/errors.hpp"

namespace darcn {

namespace {

constexpr char kMagic[4] = {'D', 'A', 'R', 'C'};
constexpr std::uint32_t kVersion = 1;

void put_bytes(std::string& out, const void* p, std::size_t n) {
  out.append(static_cast<const char*>(p), n);
}

void put_u32(std::string& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  put_bytes(out, b, 4);
}

void put_u64(std::string& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  put_bytes(out, b, 8);
}

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > buf.size()) throw ContractError("checkpoint: truncated file");
  }
  void read(void* p, std::size_t n) {
    need(n);
    std::memcpy(p, buf.data() + pos, n);
    pos += n;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i)
      v = (v << 8) | static_cast<unsigned char>(buf[pos + static_cast<std::size_t>(i)]);
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i)
      v = (v << 8) | static_cast<unsigned char>(buf[pos + static_cast<std::size_t>(i)]);
    pos += 8;
    return v;
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(buf[pos++]);
  }
};

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& entries) {
  std::string out;
  put_bytes(out, kMagic, 4);
  put_u32(out, kVersion);
  put_u64(out, entries.size());
  for (const CheckpointEntry& e : entries) {
    if (e.values.size() != shape_numel(e.dims))
      throw ContractError("checkpoint: entry '" + e.name + "' has " +
                          std::to_string(e.values.size()) + " values for shape " +
                          shape_str(e.dims));
    put_u32(out, static_cast<std::uint32_t>(e.name.size()));
    put_bytes(out, e.name.data(), e.name.size());
    out.push_back(e.f64 ? 1 : 0);
    put_u32(out, static_cast<std::uint32_t>(e.dims.size()));
    for (std::size_t d : e.dims) put_u64(out, d);
    if (e.f64) {
      for (double v : e.values) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        put_u64(out, bits);
      }
    } else {
      for (double v : e.values) {
        const float f = static_cast<float>(v);
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        put_u32(out, bits);
      }
    }
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw InputError("checkpoint: cannot open '" + path + "' for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw InputError("checkpoint: short write to '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InputError("checkpoint: cannot open '" + path + "'");
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader r{buf};

  char magic[4];
  r.read(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw ContractError("checkpoint: bad magic in '" + path + "'");
  const std::uint32_t version = r.u32();
  if (version != kVersion)
    throw ContractError("checkpoint: unsupported version " + std::to_string(version));
  const std::uint64_t count = r.u64();

  Checkpoint out;
  out.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    CheckpointEntry e;
    const std::uint32_t name_len = r.u32();
    e.name.resize(name_len);
    r.read(e.name.data(), name_len);
    const std::uint8_t dtype = r.u8();
    if (dtype > 1) throw ContractError("checkpoint: unknown dtype tag in '" + e.name + "'");
    e.f64 = dtype == 1;
    const std::uint32_t rank = r.u32();
    e.dims.resize(rank);
    std::size_t n = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      e.dims[d] = static_cast<std::size_t>(r.u64());
      n *= e.dims[d];
    }
    e.values.resize(n);
    if (e.f64) {
      for (std::size_t k = 0; k < n; ++k) {
        const std::uint64_t bits = r.u64();
        std::memcpy(&e.values[k], &bits, 8);
      }
    } else {
      for (std::size_t k = 0; k < n; ++k) {
        const std::uint32_t bits = r.u32();
        float fv;
        std::memcpy(&fv, &bits, 4);
        e.values[k] = static_cast<double>(fv);
      }
    }
    out.push_back(std::move(e));
  }
  if (r.pos != buf.size()) throw ContractError("checkpoint: trailing bytes in '" + path + "'");
  return out;
}

CheckpointEntry scalar_entry(const std::string& name, double v, bool f64) {
  CheckpointEntry e;
  e.name = name;
  e.f64 = f64;
  e.dims = {1};
  e.values = {v};
  return e;
}

const CheckpointEntry* find_entry(const Checkpoint& c, const std::string& name) {
  for (const CheckpointEntry& e : c)
    if (e.name == name) return &e;
  return nullptr;
}

double find_scalar(const Checkpoint& c, const std::string& name) {
  const CheckpointEntry* e = find_entry(c, name);
  if (!e || e->values.size() != 1)
    throw ContractError("checkpoint: missing scalar '" + name + "'");
  return e->values[0];
}

Checkpoint snapshot_params(ParamList& params, bool f64) {
  Checkpoint out;
  out.reserve(params.size());
  for (NamedParam& p : params) {
    CheckpointEntry e;
    e.name = p.name;
    e.f64 = f64;
    e.dims = p.tensor.shape();
    e.values = p.tensor.data();
    out.push_back(std::move(e));
  }
  return out;
}

void restore_params(ParamList& params, const Checkpoint& entries) {
  for (NamedParam& p : params) {
    const CheckpointEntry* e = find_entry(entries, p.name);
    if (!e) throw ContractError("checkpoint: no entry for parameter '" + p.name + "'");
    if (e->dims != p.tensor.shape())
      throw ContractError("checkpoint: parameter '" + p.name + "' expects shape " +
                          shape_str(p.tensor.shape()) + " but file holds " + shape_str(e->dims));
    p.tensor.data() = e->values;
  }
}

}  // namespace darcn
