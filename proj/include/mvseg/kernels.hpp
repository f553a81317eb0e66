// Copyright (c) 2026 mvseg contributors
// SPDX-License-Identifier: Apache-2.0
//
// Data-parallel inner-loop kernels behind the tensor ops. Every kernel has a
// scalar reference implementation and (on x86) an AVX2+FMA variant selected
// at runtime; NEON covers aarch64. The variants are bit-equivalent, which the
// test suite asserts, so the reduction semantics are part of the contract:
//
//  * multiply-adds are IEEE fused (std::fma / vfmadd / vfma lanes);
//  * dot products accumulate into 8 virtual lanes (lane j sees elements
//    j, j+8, j+16, ...; a tail of n%8 elements goes to lanes 0..n%8-1) and
//    combine as ((l0+l4)+(l2+l6)) + ((l1+l5)+(l3+l7));
//  * gemm_nn accumulates over k in ascending order per output element.
#pragma once

#include <cstddef>

namespace mvseg::kern {

struct Kernels {
  // y[i] = fma(a, x[i], y[i])
  void (*axpy)(float* y, const float* x, float a, size_t n);
  // 8-lane blocked dot product, see header comment
  float (*dot)(const float* a, const float* b, size_t n);
  // C (m x n, row stride ldc) += A (m x k, stride lda) * B (k x n, stride ldb)
  void (*gemm_nn)(float* c, const float* a, const float* b, size_t m, size_t n,
                  size_t k, size_t ldc, size_t lda, size_t ldb);
  // C (m x n) += A (m x k) * B (n x k)^T; each element is a blocked dot
  void (*gemm_nt)(float* c, const float* a, const float* b, size_t m, size_t n,
                  size_t k, size_t ldc, size_t lda, size_t ldb);
  // y[i] = max(x[i], 0)
  void (*relu)(float* y, const float* x, size_t n);
  // dx[i] = x[i] > 0 ? dy[i] : 0
  void (*relu_bwd)(float* dx, const float* x, const float* dy, size_t n);
  // y[i] = a * x[i]
  void (*scale)(float* y, const float* x, float a, size_t n);
  // y[i] += x[i]
  void (*add)(float* y, const float* x, size_t n);
  const char* name;
};

/// Scalar reference, always available.
const Kernels& scalar_kernels();

#if defined(__x86_64__) || defined(_M_X64)
const Kernels& avx2_kernels();
bool avx2_available();
#endif
#if defined(__aarch64__)
const Kernels& neon_kernels();
#endif

/// Best variant for this machine, resolved once at first use. Overridable
/// for tests via force_variant().
const Kernels& active();

/// Selects a variant by name ("scalar", "avx2", "neon"); returns false if the
/// variant is unavailable on this machine. Passing nullptr restores the
/// default choice.
bool force_variant(const char* name);

/// All variants usable on this machine (for equivalence tests).
const Kernels* const* available_variants(size_t* count);

}  // namespace mvseg::kern
