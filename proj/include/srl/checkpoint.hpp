#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "srl/params.hpp"
#include "srl/util.hpp"

namespace srl {

// Checkpoint layout (all integers and floats little-endian):
//   magic "SRLCKPT1" (8 bytes)
//   repeated until EOF, one record per parameter group in registration order:
//     u32   name length
//     bytes name
//     u32   rank
//     u64   dims[rank]
//     f64   values, row-major
static_assert(sizeof(double) == 8);

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

inline void put_f64(std::ostream& os, double d) {
  std::uint64_t u;
  std::memcpy(&u, &d, 8);
  put_u64(os, u);
}

inline bool get_u32(std::istream& is, std::uint32_t& v) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) return false;
  v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return true;
}

inline bool get_u64(std::istream& is, std::uint64_t& v) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) return false;
  v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return true;
}

inline bool get_f64(std::istream& is, double& d) {
  std::uint64_t u;
  if (!get_u64(is, u)) return false;
  std::memcpy(&d, &u, 8);
  return true;
}

}  // namespace detail

constexpr const char* kCheckpointMagic = "SRLCKPT1";

struct CheckpointGroup {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> values;
};

inline void save_checkpoint(const Params& params, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  require(os.good(), "checkpoint: cannot open \"", path, "\" for writing");
  os.write(kCheckpointMagic, 8);
  for (const auto& [name, t] : params.items()) {
    detail::put_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::put_u32(os, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) detail::put_u64(os, d);
    for (double v : t.vals()) detail::put_f64(os, v);
  }
  require(os.good(), "checkpoint: write to \"", path, "\" failed");
}

inline std::vector<CheckpointGroup> read_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(is.good(), "checkpoint: cannot open \"", path, "\"");
  char magic[8];
  require(static_cast<bool>(is.read(magic, 8)) && std::memcmp(magic, kCheckpointMagic, 8) == 0,
          "checkpoint: bad magic in \"", path, "\"");
  std::vector<CheckpointGroup> groups;
  std::uint32_t name_len;
  while (detail::get_u32(is, name_len)) {
    CheckpointGroup g;
    g.name.resize(name_len);
    require(static_cast<bool>(is.read(g.name.data(), name_len)), "checkpoint: truncated name in \"",
            path, "\"");
    std::uint32_t rank;
    require(detail::get_u32(is, rank), "checkpoint: truncated rank for \"", g.name, "\"");
    std::size_t numel = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      std::uint64_t d;
      require(detail::get_u64(is, d), "checkpoint: truncated dims for \"", g.name, "\"");
      g.shape.push_back(static_cast<std::size_t>(d));
      numel *= static_cast<std::size_t>(d);
    }
    g.values.resize(numel);
    for (std::size_t i = 0; i < numel; ++i)
      require(detail::get_f64(is, g.values[i]), "checkpoint: truncated values for \"", g.name,
              "\"");
    groups.push_back(std::move(g));
  }
  return groups;
}

// Fills a registry from a checkpoint. Every registered group must be present
// with a matching shape, and the file must not carry unknown groups.
inline void load_checkpoint(Params& params, const std::string& path) {
  auto groups = read_checkpoint(path);
  std::size_t matched = 0;
  for (auto& g : groups) {
    require(params.has(g.name), "checkpoint: \"", path, "\" carries unknown group \"", g.name,
            "\"");
    Tensor t = params.get(g.name);
    require(t.shape() == g.shape, "checkpoint: shape mismatch for \"", g.name, "\": file has ",
            shape_str(g.shape), ", model expects ", shape_str(t.shape()));
    t.vals() = std::move(g.values);
    ++matched;
  }
  require(matched == params.items().size(), "checkpoint: \"", path, "\" is missing ",
          params.items().size() - matched, " parameter group(s)");
}

}  // namespace srl
