#pragma once

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>
#include <vector>

#include "cholec/common/errors.hpp"

namespace cholec {

// Little helpers for the native-endian binary containers (checkpoints, trainer state).
class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}

  template <typename T>
  void pod(const T& v) {
    static_assert(std::is_trivially_copyable_v<T>);
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  template <typename T>
  void array(const T* data, std::size_t n) {
    static_assert(std::is_trivially_copyable_v<T>);
    pod<std::uint64_t>(n);
    out_.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(T)));
  }
  template <typename T>
  void vec(const std::vector<T>& v) {
    array(v.data(), v.size());
  }
  void str(const std::string& s) { array(s.data(), s.size()); }
  bool ok() const { return static_cast<bool>(out_); }

 private:
  std::ostream& out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(std::istream& in) : in_(in) {}

  template <typename T>
  T pod() {
    static_assert(std::is_trivially_copyable_v<T>);
    T v;
    in_.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in_) throw IoError("unexpected end of binary data");
    return v;
  }
  // Reads a length-prefixed array; refuses lengths above `max_len`.
  template <typename T>
  std::vector<T> vec(std::uint64_t max_len = std::uint64_t{1} << 32) {
    const auto n = pod<std::uint64_t>();
    if (n > max_len) throw IoError("binary array length out of range");
    std::vector<T> v(n);
    in_.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(T)));
    if (!in_) throw IoError("unexpected end of binary data");
    return v;
  }
  template <typename T>
  void array_into(T* data, std::size_t expected) {
    const auto n = pod<std::uint64_t>();
    if (n != expected) throw IoError("binary array has unexpected length");
    in_.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * sizeof(T)));
    if (!in_) throw IoError("unexpected end of binary data");
  }
  std::string str(std::uint64_t max_len = std::uint64_t{1} << 30) {
    const auto v = vec<char>(max_len);
    return {v.begin(), v.end()};
  }

 private:
  std::istream& in_;
};

}  // namespace cholec
