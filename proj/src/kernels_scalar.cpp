// Copyright (c) 2026 mvseg contributors
// SPDX-License-Identifier: Apache-2.0
//
// Reference kernels. These spell out the exact arithmetic the SIMD variants
// must reproduce bit-for-bit.

#include <cmath>

#include "mvseg/kernels.hpp"

namespace mvseg::kern {
namespace {

void axpy_scalar(float* y, const float* x, float a, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] = std::fma(a, x[i], y[i]);
}

float dot_scalar(const float* a, const float* b, size_t n) {
  float lane[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  size_t full = n / 8 * 8;
  for (size_t i = 0; i < full; i += 8)
    for (size_t j = 0; j < 8; ++j)
      lane[j] = std::fma(a[i + j], b[i + j], lane[j]);
  for (size_t i = full; i < n; ++i)
    lane[i - full] = std::fma(a[i], b[i], lane[i - full]);
  float l04 = lane[0] + lane[4];
  float l26 = lane[2] + lane[6];
  float l15 = lane[1] + lane[5];
  float l37 = lane[3] + lane[7];
  return (l04 + l26) + (l15 + l37);
}

void gemm_nn_scalar(float* c, const float* a, const float* b, size_t m,
                    size_t n, size_t k, size_t ldc, size_t lda, size_t ldb) {
  for (size_t i = 0; i < m; ++i) {
    float* crow = c + i * ldc;
    const float* arow = a + i * lda;
    for (size_t p = 0; p < k; ++p) {
      float av = arow[p];
      const float* brow = b + p * ldb;
      for (size_t j = 0; j < n; ++j) crow[j] = std::fma(av, brow[j], crow[j]);
    }
  }
}

void gemm_nt_scalar(float* c, const float* a, const float* b, size_t m,
                    size_t n, size_t k, size_t ldc, size_t lda, size_t ldb) {
  for (size_t i = 0; i < m; ++i)
    for (size_t j = 0; j < n; ++j)
      c[i * ldc + j] += dot_scalar(a + i * lda, b + j * ldb, k);
}

void relu_scalar(float* y, const float* x, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_bwd_scalar(float* dx, const float* x, const float* dy, size_t n) {
  for (size_t i = 0; i < n; ++i) dx[i] = x[i] > 0.0f ? dy[i] : 0.0f;
}

void scale_scalar(float* y, const float* x, float a, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] = a * x[i];
}

void add_scalar(float* y, const float* x, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] += x[i];
}

}  // namespace

const Kernels& scalar_kernels() {
  static const Kernels k = {axpy_scalar,  dot_scalar,      gemm_nn_scalar,
                            gemm_nt_scalar, relu_scalar,   relu_bwd_scalar,
                            scale_scalar, add_scalar,      "scalar"};
  return k;
}

}  // namespace mvseg::kern
