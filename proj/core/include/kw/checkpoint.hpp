#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "kw/error.hpp"
#include "kw/model.hpp"

// Checkpoint format (all integers and doubles little-endian):
//   bytes 0..3   magic "KWCK"
//   bytes 4..5   u16 format version (currently 1)
//   bytes 6..13  u64 topology hash (FNV-1a of the canonical manifest)
//   bytes 14..21 u64 scalar count
//   then         count x f64, parameters in canonical traversal order
//
// The topology hash ties a blob to the manifest that produced it; loading
// into a model with a different hash is a TopologyError, not a best-effort
// cast.

namespace kw {

inline constexpr char kCheckpointMagic[4] = {'K', 'W', 'C', 'K'};
inline constexpr uint16_t kCheckpointVersion = 1;

namespace detail {

inline void put_u16(std::string& out, uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

inline void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<uint64_t>(v)); }

struct ByteReader {
  const unsigned char* p;
  size_t left;

  void need(size_t n, const char* what) {
    if (left < n) throw CheckpointError(std::string("checkpoint truncated reading ") + what);
  }
  uint16_t u16(const char* what) {
    need(2, what);
    uint16_t v = static_cast<uint16_t>(p[0]) | static_cast<uint16_t>(p[1]) << 8;
    p += 2;
    left -= 2;
    return v;
  }
  uint64_t u64(const char* what) {
    need(8, what);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(p[i]) << (8 * i);
    p += 8;
    left -= 8;
    return v;
  }
  double f64(const char* what) { return std::bit_cast<double>(u64(what)); }
};

}  // namespace detail

struct CheckpointHeader {
  uint16_t version{0};
  uint64_t topology{0};
  uint64_t count{0};
};

inline std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

inline CheckpointHeader parse_checkpoint_header(const std::string& bytes, const std::string& path) {
  if (bytes.size() < 22 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
    throw CheckpointError("'" + path + "' is not a checkpoint (bad magic)");
  }
  detail::ByteReader r{reinterpret_cast<const unsigned char*>(bytes.data()) + 4,
                       bytes.size() - 4};
  CheckpointHeader h;
  h.version = r.u16("version");
  if (h.version != kCheckpointVersion) {
    throw CheckpointError("checkpoint '" + path + "' has format version " +
                          std::to_string(h.version) + ", expected " +
                          std::to_string(kCheckpointVersion));
  }
  h.topology = r.u64("topology hash");
  h.count = r.u64("scalar count");
  return h;
}

template <typename T>
void save_checkpoint(const std::string& path, ModelGraph<T>& g) {
  auto slices = param_slices(g);
  uint64_t count = 0;
  for (const auto& s : slices) count += s.size;

  std::string out;
  out.reserve(22 + count * 8);
  out.append(kCheckpointMagic, 4);
  detail::put_u16(out, kCheckpointVersion);
  detail::put_u64(out, g.topo_hash);
  detail::put_u64(out, count);
  for (const auto& s : slices) {
    for (size_t i = 0; i < s.size; ++i) detail::put_f64(out, static_cast<double>(s.data[i]));
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw CheckpointError("cannot write checkpoint '" + path + "'");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw CheckpointError("short write to checkpoint '" + path + "'");
}

template <typename T>
void load_checkpoint(const std::string& path, ModelGraph<T>& g) {
  const std::string bytes = read_file_bytes(path);
  const CheckpointHeader h = parse_checkpoint_header(bytes, path);
  if (h.topology != g.topo_hash) {
    char want[19], got[19];
    std::snprintf(want, sizeof(want), "%016llx", static_cast<unsigned long long>(g.topo_hash));
    std::snprintf(got, sizeof(got), "%016llx", static_cast<unsigned long long>(h.topology));
    throw TopologyError("checkpoint '" + path + "' was saved for topology " + got +
                        " but this model is " + want);
  }
  auto slices = param_slices(g);
  uint64_t count = 0;
  for (const auto& s : slices) count += s.size;
  if (h.count != count) {
    throw CheckpointError("checkpoint '" + path + "' holds " + std::to_string(h.count) +
                          " scalars, model expects " + std::to_string(count));
  }
  detail::ByteReader r{reinterpret_cast<const unsigned char*>(bytes.data()) + 22,
                       bytes.size() - 22};
  for (auto& s : slices) {
    for (size_t i = 0; i < s.size; ++i) s.data[i] = static_cast<T>(r.f64("parameters"));
  }
}

}  // namespace kw
