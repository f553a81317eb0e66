// Copyright (c) 2026 mvseg contributors
// SPDX-License-Identifier: Apache-2.0

#include "mvseg/kernels.hpp"

#include <cstring>

#include "mvseg/parallel.hpp"

namespace mvseg {

int& thread_cap() {
  static int cap = 1;
  return cap;
}

namespace kern {
namespace {

const Kernels* detect_best() {
#if defined(__x86_64__) || defined(_M_X64)
  if (avx2_available()) return &avx2_kernels();
#endif
#if defined(__aarch64__)
  return &neon_kernels();
#endif
  return &scalar_kernels();
}

const Kernels*& selected() {
  static const Kernels* k = detect_best();
  return k;
}

}  // namespace

const Kernels& active() { return *selected(); }

bool force_variant(const char* name) {
  if (name == nullptr) {
    selected() = detect_best();
    return true;
  }
  size_t count = 0;
  const Kernels* const* all = available_variants(&count);
  for (size_t i = 0; i < count; ++i) {
    if (std::strcmp(all[i]->name, name) == 0) {
      selected() = all[i];
      return true;
    }
  }
  return false;
}

const Kernels* const* available_variants(size_t* count) {
  static const Kernels* variants[3];
  static size_t n = [] {
    size_t c = 0;
    variants[c++] = &scalar_kernels();
#if defined(__x86_64__) || defined(_M_X64)
    if (avx2_available()) variants[c++] = &avx2_kernels();
#endif
#if defined(__aarch64__)
    variants[c++] = &neon_kernels();
#endif
    return c;
  }();
  *count = n;
  return variants;
}

}  // namespace kern
}  // namespace mvseg
