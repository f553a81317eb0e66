// Copyright (c) 2026 mvseg contributors
// SPDX-License-Identifier: Apache-2.0
//
// AVX2+FMA kernel variant. Compiled with -mavx2 -mfma for this TU only;
// callers go through the runtime dispatcher. Arithmetic must stay
// bit-identical to kernels_scalar.cpp (fused mul-add per element, fixed
// reduction trees), so accumulation order mirrors the reference exactly.

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "mvseg/kernels.hpp"

namespace mvseg::kern {
namespace {

void axpy_avx2(float* y, const float* x, float a, size_t n) {
  __m256 va = _mm256_set1_ps(a);
  size_t full = n / 8 * 8;
  for (size_t i = 0; i < full; i += 8) {
    __m256 vy = _mm256_loadu_ps(y + i);
    vy = _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), vy);
    _mm256_storeu_ps(y + i, vy);
  }
  for (size_t i = full; i < n; ++i) y[i] = std::fma(a, x[i], y[i]);
}

// Reduction tree matching the scalar reference:
// ((l0+l4)+(l2+l6)) + ((l1+l5)+(l3+l7))
inline float hsum_lanes(__m256 acc) {
  __m128 lo = _mm256_castps256_ps128(acc);
  __m128 hi = _mm256_extractf128_ps(acc, 1);
  __m128 s = _mm_add_ps(lo, hi);  // [l0+l4, l1+l5, l2+l6, l3+l7]
  __m128 sh = _mm_movehl_ps(s, s);
  __m128 t = _mm_add_ps(s, sh);  // [t0=(l0+l4)+(l2+l6), t1=(l1+l5)+(l3+l7)]
  return _mm_cvtss_f32(t) + _mm_cvtss_f32(_mm_shuffle_ps(t, t, 1));
}

float dot_avx2(const float* a, const float* b, size_t n) {
  __m256 acc = _mm256_setzero_ps();
  size_t full = n / 8 * 8;
  for (size_t i = 0; i < full; i += 8)
    acc = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc);
  if (size_t rem = n - full) {
    alignas(32) float lane[8];
    _mm256_store_ps(lane, acc);
    for (size_t i = 0; i < rem; ++i)
      lane[i] = std::fma(a[full + i], b[full + i], lane[i]);
    acc = _mm256_load_ps(lane);
  }
  return hsum_lanes(acc);
}

// 4x16 register-blocked panel; k ascending per element, same as reference.
inline void gemm_panel4x16(float* c, const float* a, const float* b, size_t k,
                           size_t ldc, size_t lda, size_t ldb) {
  __m256 c00 = _mm256_loadu_ps(c);
  __m256 c01 = _mm256_loadu_ps(c + 8);
  __m256 c10 = _mm256_loadu_ps(c + ldc);
  __m256 c11 = _mm256_loadu_ps(c + ldc + 8);
  __m256 c20 = _mm256_loadu_ps(c + 2 * ldc);
  __m256 c21 = _mm256_loadu_ps(c + 2 * ldc + 8);
  __m256 c30 = _mm256_loadu_ps(c + 3 * ldc);
  __m256 c31 = _mm256_loadu_ps(c + 3 * ldc + 8);
  for (size_t p = 0; p < k; ++p) {
    __m256 b0 = _mm256_loadu_ps(b + p * ldb);
    __m256 b1 = _mm256_loadu_ps(b + p * ldb + 8);
    __m256 a0 = _mm256_set1_ps(a[p]);
    __m256 a1 = _mm256_set1_ps(a[lda + p]);
    __m256 a2 = _mm256_set1_ps(a[2 * lda + p]);
    __m256 a3 = _mm256_set1_ps(a[3 * lda + p]);
    c00 = _mm256_fmadd_ps(a0, b0, c00);
    c01 = _mm256_fmadd_ps(a0, b1, c01);
    c10 = _mm256_fmadd_ps(a1, b0, c10);
    c11 = _mm256_fmadd_ps(a1, b1, c11);
    c20 = _mm256_fmadd_ps(a2, b0, c20);
    c21 = _mm256_fmadd_ps(a2, b1, c21);
    c30 = _mm256_fmadd_ps(a3, b0, c30);
    c31 = _mm256_fmadd_ps(a3, b1, c31);
  }
  _mm256_storeu_ps(c, c00);
  _mm256_storeu_ps(c + 8, c01);
  _mm256_storeu_ps(c + ldc, c10);
  _mm256_storeu_ps(c + ldc + 8, c11);
  _mm256_storeu_ps(c + 2 * ldc, c20);
  _mm256_storeu_ps(c + 2 * ldc + 8, c21);
  _mm256_storeu_ps(c + 3 * ldc, c30);
  _mm256_storeu_ps(c + 3 * ldc + 8, c31);
}

inline void gemm_row_vec(float* crow, const float* arow, const float* b,
                         size_t n, size_t k, size_t ldb) {
  // single-row fallback, 8 cols per step
  size_t jfull = n / 8 * 8;
  for (size_t j = 0; j < jfull; j += 8) {
    __m256 acc = _mm256_loadu_ps(crow + j);
    for (size_t p = 0; p < k; ++p)
      acc = _mm256_fmadd_ps(_mm256_set1_ps(arow[p]),
                            _mm256_loadu_ps(b + p * ldb + j), acc);
    _mm256_storeu_ps(crow + j, acc);
  }
  for (size_t j = jfull; j < n; ++j) {
    float acc = crow[j];
    for (size_t p = 0; p < k; ++p) acc = std::fma(arow[p], b[p * ldb + j], acc);
    crow[j] = acc;
  }
}

void gemm_nn_avx2(float* c, const float* a, const float* b, size_t m, size_t n,
                  size_t k, size_t ldc, size_t lda, size_t ldb) {
  // Tile n and pack the B slab contiguously: the panel kernel walks B along
  // k, which with a large ldb is one TLB page per load. Packing is a pure
  // copy, so results stay bit-identical to the reference.
  constexpr size_t kNTile = 128;  // k * kNTile floats stay L2-resident
  thread_local std::vector<float> packed;
  for (size_t j0 = 0; j0 < n; j0 += kNTile) {
    size_t jn = n - j0 < kNTile ? n - j0 : kNTile;
    packed.resize(k * jn);
    for (size_t p = 0; p < k; ++p)
      std::memcpy(packed.data() + p * jn, b + p * ldb + j0, jn * sizeof(float));
    const float* bp = packed.data();
    size_t j16 = jn / 16 * 16;
    size_t i4 = m / 4 * 4;
    for (size_t i = 0; i < i4; i += 4) {
      for (size_t j = 0; j < j16; j += 16)
        gemm_panel4x16(c + i * ldc + j0 + j, a + i * lda, bp + j, k, ldc,
                       lda, jn);
      if (j16 < jn)
        for (size_t r = 0; r < 4; ++r)
          gemm_row_vec(c + (i + r) * ldc + j0 + j16, a + (i + r) * lda,
                       bp + j16, jn - j16, k, jn);
    }
    for (size_t i = i4; i < m; ++i)
      gemm_row_vec(c + i * ldc + j0, a + i * lda, bp, jn, k, jn);
  }
}

void gemm_nt_avx2(float* c, const float* a, const float* b, size_t m, size_t n,
                  size_t k, size_t ldc, size_t lda, size_t ldb) {
  // 2x4 blocks of concurrent 8-lane dot accumulators; j tiled so the B rows
  // in flight stay in L2 while A streams.
  constexpr size_t kJTile = 16;
  size_t kfull = k / 8 * 8;
  for (size_t j0 = 0; j0 < n; j0 += kJTile) {
    size_t jn = n - j0 < kJTile ? n - j0 : kJTile;
    size_t j4 = jn / 4 * 4;
    size_t i2 = m / 2 * 2;
    for (size_t i = 0; i < i2; i += 2) {
      const float* a0 = a + i * lda;
      const float* a1 = a0 + lda;
      for (size_t j = 0; j < j4; j += 4) {
        const float* b0 = b + (j0 + j) * ldb;
        const float* b1 = b0 + ldb;
        const float* b2 = b1 + ldb;
        const float* b3 = b2 + ldb;
        __m256 acc[2][4];
        for (auto& row : acc)
          for (auto& v : row) v = _mm256_setzero_ps();
        for (size_t p = 0; p < kfull; p += 8) {
          __m256 va0 = _mm256_loadu_ps(a0 + p);
          __m256 va1 = _mm256_loadu_ps(a1 + p);
          __m256 vb0 = _mm256_loadu_ps(b0 + p);
          __m256 vb1 = _mm256_loadu_ps(b1 + p);
          __m256 vb2 = _mm256_loadu_ps(b2 + p);
          __m256 vb3 = _mm256_loadu_ps(b3 + p);
          acc[0][0] = _mm256_fmadd_ps(va0, vb0, acc[0][0]);
          acc[0][1] = _mm256_fmadd_ps(va0, vb1, acc[0][1]);
          acc[0][2] = _mm256_fmadd_ps(va0, vb2, acc[0][2]);
          acc[0][3] = _mm256_fmadd_ps(va0, vb3, acc[0][3]);
          acc[1][0] = _mm256_fmadd_ps(va1, vb0, acc[1][0]);
          acc[1][1] = _mm256_fmadd_ps(va1, vb1, acc[1][1]);
          acc[1][2] = _mm256_fmadd_ps(va1, vb2, acc[1][2]);
          acc[1][3] = _mm256_fmadd_ps(va1, vb3, acc[1][3]);
        }
        const float* brows[4] = {b0, b1, b2, b3};
        const float* arows[2] = {a0, a1};
        for (int r = 0; r < 2; ++r)
          for (int s = 0; s < 4; ++s) {
            __m256 av = acc[r][s];
            if (k > kfull) {
              alignas(32) float lane[8];
              _mm256_store_ps(lane, av);
              for (size_t p = kfull; p < k; ++p)
                lane[p - kfull] =
                    std::fma(arows[r][p], brows[s][p], lane[p - kfull]);
              av = _mm256_load_ps(lane);
            }
            c[(i + r) * ldc + j0 + j + s] += hsum_lanes(av);
          }
      }
      for (size_t j = j4; j < jn; ++j) {
        c[i * ldc + j0 + j] += dot_avx2(a0, b + (j0 + j) * ldb, k);
        c[(i + 1) * ldc + j0 + j] += dot_avx2(a1, b + (j0 + j) * ldb, k);
      }
    }
    for (size_t i = i2; i < m; ++i)
      for (size_t j = 0; j < jn; ++j)
        c[i * ldc + j0 + j] += dot_avx2(a + i * lda, b + (j0 + j) * ldb, k);
  }
}

void relu_avx2(float* y, const float* x, size_t n) {
  __m256 zero = _mm256_setzero_ps();
  size_t full = n / 8 * 8;
  for (size_t i = 0; i < full; i += 8)
    _mm256_storeu_ps(y + i, _mm256_max_ps(_mm256_loadu_ps(x + i), zero));
  for (size_t i = full; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_bwd_avx2(float* dx, const float* x, const float* dy, size_t n) {
  __m256 zero = _mm256_setzero_ps();
  size_t full = n / 8 * 8;
  for (size_t i = 0; i < full; i += 8) {
    __m256 mask = _mm256_cmp_ps(_mm256_loadu_ps(x + i), zero, _CMP_GT_OQ);
    _mm256_storeu_ps(dx + i, _mm256_and_ps(mask, _mm256_loadu_ps(dy + i)));
  }
  for (size_t i = full; i < n; ++i) dx[i] = x[i] > 0.0f ? dy[i] : 0.0f;
}

void scale_avx2(float* y, const float* x, float a, size_t n) {
  __m256 va = _mm256_set1_ps(a);
  size_t full = n / 8 * 8;
  for (size_t i = 0; i < full; i += 8)
    _mm256_storeu_ps(y + i, _mm256_mul_ps(va, _mm256_loadu_ps(x + i)));
  for (size_t i = full; i < n; ++i) y[i] = a * x[i];
}

void add_avx2(float* y, const float* x, size_t n) {
  size_t full = n / 8 * 8;
  for (size_t i = 0; i < full; i += 8)
    _mm256_storeu_ps(y + i,
                     _mm256_add_ps(_mm256_loadu_ps(y + i), _mm256_loadu_ps(x + i)));
  for (size_t i = full; i < n; ++i) y[i] += x[i];
}

}  // namespace

const Kernels& avx2_kernels() {
  static const Kernels k = {axpy_avx2,    dot_avx2,      gemm_nn_avx2,
                            gemm_nt_avx2, relu_avx2,     relu_bwd_avx2,
                            scale_avx2,   add_avx2,      "avx2"};
  return k;
}

bool avx2_available() {
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}

}  // namespace mvseg::kern

#endif  // x86_64
