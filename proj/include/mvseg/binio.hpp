// Copyright (c) 2026 mvseg contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mvseg::binio {

// Little-endian on-disk layout, written as raw host bytes.
static_assert(std::endian::native == std::endian::little,
              "file formats assume a little-endian host");

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
void write_array(std::ostream& out, const T* data, size_t count) {
  out.write(reinterpret_cast<const char*>(data),
            static_cast<std::streamsize>(count * sizeof(T)));
}

template <typename T>
T read_pod(std::istream& in, const char* what) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw std::runtime_error(std::string("truncated read: ") + what);
  return v;
}

template <typename T>
void read_array(std::istream& in, T* data, size_t count, const char* what) {
  in.read(reinterpret_cast<char*>(data),
          static_cast<std::streamsize>(count * sizeof(T)));
  if (!in) throw std::runtime_error(std::string("truncated read: ") + what);
}

inline void write_str(std::ostream& out, const std::string& s) {
  write_pod<uint32_t>(out, static_cast<uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_str(std::istream& in, const char* what) {
  uint32_t n = read_pod<uint32_t>(in, what);
  if (n > (1u << 20)) throw std::runtime_error(std::string("oversized string: ") + what);
  std::string s(n, '\0');
  if (n > 0) {
    in.read(s.data(), n);
    if (!in) throw std::runtime_error(std::string("truncated read: ") + what);
  }
  return s;
}

}  // namespace mvseg::binio
