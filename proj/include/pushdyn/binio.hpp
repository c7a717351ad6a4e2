#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace pushdyn {

static_assert(sizeof(float) == 4 && sizeof(double) == 8, "IEEE-754 layout required");

// All binary formats in this project are little-endian; we only target
// little-endian platforms and assert so at startup of the readers.
inline bool host_is_little_endian() {
  const std::uint32_t x = 1;
  std::uint8_t b;
  std::memcpy(&b, &x, 1);
  return b == 1;
}

struct BinWriter {
  std::ostream& os;

  template <typename T>
  void pod(const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  template <typename T>
  void array(const T* data, std::size_t n) {
    os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(T)));
  }
  void str(const std::string& s) {
    pod(static_cast<std::uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
};

struct BinReader {
  std::istream& is;

  template <typename T>
  T pod() {
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("binary read: unexpected end of stream");
    return v;
  }
  template <typename T>
  void array(T* data, std::size_t n) {
    is.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * sizeof(T)));
    if (!is) throw std::runtime_error("binary read: unexpected end of stream");
  }
  std::string str() {
    auto n = pod<std::uint32_t>();
    std::string s(n, '\0');
    if (n) is.read(s.data(), n);
    if (!is) throw std::runtime_error("binary read: unexpected end of stream");
    return s;
  }
};

// FNV-1a, used for config hashes and checkpoint/dataset manifests.
inline std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const std::uint8_t*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

inline std::string hex64(std::uint64_t h) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = digits[h & 0xf];
    h >>= 4;
  }
  return s;
}

inline std::uint64_t file_fnv1a64(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for hashing: " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[65536];
  while (f) {
    f.read(buf, sizeof(buf));
    h = fnv1a64(buf, static_cast<std::size_t>(f.gcount()), h);
  }
  return h;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write: " + path);
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
}

}  // namespace pushdyn
