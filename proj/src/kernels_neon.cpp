// Copyright (c) 2026 mvseg contributors
// SPDX-License-Identifier: Apache-2.0
//
// NEON kernel variant for aarch64. Two q-registers model the 8 virtual dot
// lanes of the reference, vfmaq keeps mul-adds fused, so results stay
// bit-identical to the scalar path.

#if defined(__aarch64__)

#include <arm_neon.h>

#include <cmath>

#include "mvseg/kernels.hpp"

namespace mvseg::kern {
namespace {

void axpy_neon(float* y, const float* x, float a, size_t n) {
  float32x4_t va = vdupq_n_f32(a);
  size_t full = n / 4 * 4;
  for (size_t i = 0; i < full; i += 4)
    vst1q_f32(y + i, vfmaq_f32(vld1q_f32(y + i), va, vld1q_f32(x + i)));
  for (size_t i = full; i < n; ++i) y[i] = std::fma(a, x[i], y[i]);
}

inline float hsum_lanes(float32x4_t lo, float32x4_t hi) {
  float32x4_t s = vaddq_f32(lo, hi);  // [l0+l4, l1+l5, l2+l6, l3+l7]
  float t0 = vgetq_lane_f32(s, 0) + vgetq_lane_f32(s, 2);
  float t1 = vgetq_lane_f32(s, 1) + vgetq_lane_f32(s, 3);
  return t0 + t1;
}

float dot_neon(const float* a, const float* b, size_t n) {
  float32x4_t lo = vdupq_n_f32(0.0f);
  float32x4_t hi = vdupq_n_f32(0.0f);
  size_t full = n / 8 * 8;
  for (size_t i = 0; i < full; i += 8) {
    lo = vfmaq_f32(lo, vld1q_f32(a + i), vld1q_f32(b + i));
    hi = vfmaq_f32(hi, vld1q_f32(a + i + 4), vld1q_f32(b + i + 4));
  }
  if (size_t rem = n - full) {
    float lane[8];
    vst1q_f32(lane, lo);
    vst1q_f32(lane + 4, hi);
    for (size_t i = 0; i < rem; ++i)
      lane[i] = std::fma(a[full + i], b[full + i], lane[i]);
    lo = vld1q_f32(lane);
    hi = vld1q_f32(lane + 4);
  }
  return hsum_lanes(lo, hi);
}

void gemm_nn_neon(float* c, const float* a, const float* b, size_t m, size_t n,
                  size_t k, size_t ldc, size_t lda, size_t ldb) {
  size_t j8 = n / 8 * 8;
  for (size_t i = 0; i < m; ++i) {
    float* crow = c + i * ldc;
    const float* arow = a + i * lda;
    for (size_t j = 0; j < j8; j += 8) {
      float32x4_t c0 = vld1q_f32(crow + j);
      float32x4_t c1 = vld1q_f32(crow + j + 4);
      for (size_t p = 0; p < k; ++p) {
        float32x4_t av = vdupq_n_f32(arow[p]);
        c0 = vfmaq_f32(c0, av, vld1q_f32(b + p * ldb + j));
        c1 = vfmaq_f32(c1, av, vld1q_f32(b + p * ldb + j + 4));
      }
      vst1q_f32(crow + j, c0);
      vst1q_f32(crow + j + 4, c1);
    }
    for (size_t j = j8; j < n; ++j) {
      float acc = crow[j];
      for (size_t p = 0; p < k; ++p) acc = std::fma(arow[p], b[p * ldb + j], acc);
      crow[j] = acc;
    }
  }
}

void gemm_nt_neon(float* c, const float* a, const float* b, size_t m, size_t n,
                  size_t k, size_t ldc, size_t lda, size_t ldb) {
  for (size_t i = 0; i < m; ++i)
    for (size_t j = 0; j < n; ++j)
      c[i * ldc + j] += dot_neon(a + i * lda, b + j * ldb, k);
}

void relu_neon(float* y, const float* x, size_t n) {
  float32x4_t zero = vdupq_n_f32(0.0f);
  size_t full = n / 4 * 4;
  for (size_t i = 0; i < full; i += 4)
    vst1q_f32(y + i, vmaxq_f32(vld1q_f32(x + i), zero));
  for (size_t i = full; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_bwd_neon(float* dx, const float* x, const float* dy, size_t n) {
  float32x4_t zero = vdupq_n_f32(0.0f);
  size_t full = n / 4 * 4;
  for (size_t i = 0; i < full; i += 4) {
    uint32x4_t mask = vcgtq_f32(vld1q_f32(x + i), zero);
    float32x4_t v = vld1q_f32(dy + i);
    vst1q_f32(dx + i,
              vreinterpretq_f32_u32(vandq_u32(mask, vreinterpretq_u32_f32(v))));
  }
  for (size_t i = full; i < n; ++i) dx[i] = x[i] > 0.0f ? dy[i] : 0.0f;
}

void scale_neon(float* y, const float* x, float a, size_t n) {
  float32x4_t va = vdupq_n_f32(a);
  size_t full = n / 4 * 4;
  for (size_t i = 0; i < full; i += 4)
    vst1q_f32(y + i, vmulq_f32(va, vld1q_f32(x + i)));
  for (size_t i = full; i < n; ++i) y[i] = a * x[i];
}

void add_neon(float* y, const float* x, size_t n) {
  size_t full = n / 4 * 4;
  for (size_t i = 0; i < full; i += 4)
    vst1q_f32(y + i, vaddq_f32(vld1q_f32(y + i), vld1q_f32(x + i)));
  for (size_t i = full; i < n; ++i) y[i] += x[i];
}

}  // namespace

const Kernels& neon_kernels() {
  static const Kernels k = {axpy_neon,    dot_neon,      gemm_nn_neon,
                            gemm_nt_neon, relu_neon,     relu_bwd_neon,
                            scale_neon,   add_neon,      "neon"};
  return k;
}

}  // namespace mvseg::kern

#endif  // aarch64
