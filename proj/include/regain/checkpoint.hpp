// Checkpoint blobs (shape header + little-endian float64 payload) shared by the
// autoencoder and RNN, plus raw float64 array files and small text/CSV helpers.
#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "regain/numerics.hpp"

namespace regain {

struct NamedTensor {
  std::string name;
  std::vector<std::uint32_t> dims;
  Vector data;

  std::size_t count() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }
};

namespace detail {

inline void put_u16(std::ostream& os, std::uint16_t v) {
  char b[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
  os.write(b, 2);
}
inline void put_u32(std::ostream& os, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 4);
}
inline void put_f64(std::ostream& os, double d) {
  const auto u = std::bit_cast<std::uint64_t>(d);
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((u >> (8 * i)) & 0xff);
  os.write(b, 8);
}
inline std::uint16_t get_u16(std::istream& is) {
  unsigned char b[2];
  is.read(reinterpret_cast<char*>(b), 2);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}
inline std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}
inline double get_f64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(v);
}

}  // namespace detail

inline constexpr char kCkptMagic[8] = {'R', 'G', 'C', 'K', '0', '0', '0', '1'};

inline void save_checkpoint(const std::filesystem::path& path,
                            const std::vector<NamedTensor>& tensors) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("save_checkpoint: cannot open " + path.string());
  os.write(kCkptMagic, 8);
  detail::put_u32(os, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    require(t.count() == t.data.size(), "save_checkpoint: dims/data mismatch for " + t.name);
    detail::put_u16(os, static_cast<std::uint16_t>(t.name.size()));
    os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    os.put(static_cast<char>(t.dims.size()));
    for (auto d : t.dims) detail::put_u32(os, d);
    for (double v : t.data) detail::put_f64(os, v);
  }
  if (!os) throw std::runtime_error("save_checkpoint: write failed for " + path.string());
}

inline std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_checkpoint: cannot open " + path.string());
  char magic[8];
  is.read(magic, 8);
  for (int i = 0; i < 8; ++i)
    if (magic[i] != kCkptMagic[i])
      throw std::runtime_error("load_checkpoint: bad magic in " + path.string());
  const std::uint32_t n = detail::get_u32(is);
  std::vector<NamedTensor> out(n);
  for (auto& t : out) {
    const std::uint16_t len = detail::get_u16(is);
    t.name.resize(len);
    is.read(t.name.data(), len);
    const int nd = is.get();
    t.dims.resize(nd);
    for (auto& d : t.dims) d = detail::get_u32(is);
    t.data.resize(t.count());
    for (auto& v : t.data) v = detail::get_f64(is);
    if (!is) throw std::runtime_error("load_checkpoint: truncated file " + path.string());
  }
  return out;
}

// Flat little-endian float64 array files (the dataset trajectory format).
inline void save_f64_array(const std::filesystem::path& path, const Vector& data) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("save_f64_array: cannot open " + path.string());
  for (double v : data) detail::put_f64(os, v);
}

inline Vector load_f64_array(const std::filesystem::path& path, std::size_t expected) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_f64_array: cannot open " + path.string());
  Vector out(expected);
  for (auto& v : out) v = detail::get_f64(is);
  if (!is) throw std::runtime_error("load_f64_array: truncated file " + path.string());
  return out;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("write_text: cannot open " + path.string());
  os << text;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("read_text: cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// %.17g round-trips doubles exactly
inline std::string fmt_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace regain
