// Copyright (c) 2026 mvseg contributors
// SPDX-License-Identifier: Apache-2.0
//
// Define-by-run reverse-mode autodiff. Ops build a graph of shared nodes;
// backward() walks it once in reverse topological order. The engine is
// templated on the scalar type: float is the production path (inner loops go
// through the runtime-dispatched kernels), double exists so finite-difference
// gradient checks run at a precision where h=1e-5 is meaningful.
//
// Conventions: closures accumulate (+=) into parent gradients, never assign;
// every per-element reduction runs in a fixed ascending order, so results are
// reproducible run to run.
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <unordered_set>
#include <utility>
#include <vector>

#include "mvseg/kernels.hpp"
#include "mvseg/tensor.hpp"

namespace mvseg {

template <typename T>
struct Node;
template <typename T>
using Ptr = std::shared_ptr<Node<T>>;

template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;  // empty until touched; shaped like value afterwards
  bool requires_grad = false;
  bool backward_done = false;
  std::string name;  // set for parameters
  std::vector<Ptr<T>> parents;
  // Invoked with *this after all consumers have deposited into this->grad.
  std::function<void(Node<T>&)> backprop;

  Tensor<T>& ensure_grad() {
    if (grad.v.empty()) grad = Tensor<T>(value.shape);
    return grad;
  }
};

template <typename T>
Ptr<T> constant(Tensor<T> value) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  return n;
}

template <typename T>
Ptr<T> parameter(Tensor<T> value, std::string name) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  n->requires_grad = true;
  n->name = std::move(name);
  return n;
}

// ---------------------------------------------------------------------------
// scalar-type dispatch: float goes through the runtime kernel variants,
// double through reference loops with the same accumulation semantics.

namespace detail {

inline void gemm_nn(float* c, const float* a, const float* b, size_t m,
                    size_t n, size_t k, size_t ldc, size_t lda, size_t ldb) {
  kern::active().gemm_nn(c, a, b, m, n, k, ldc, lda, ldb);
}
inline void gemm_nt(float* c, const float* a, const float* b, size_t m,
                    size_t n, size_t k, size_t ldc, size_t lda, size_t ldb) {
  kern::active().gemm_nt(c, a, b, m, n, k, ldc, lda, ldb);
}
inline void axpy(float* y, const float* x, float a, size_t n) {
  kern::active().axpy(y, x, a, n);
}
inline void relu_fwd(float* y, const float* x, size_t n) {
  kern::active().relu(y, x, n);
}
inline void relu_bwd(float* dx, const float* x, const float* dy, size_t n) {
  kern::active().relu_bwd(dx, x, dy, n);
}
inline void scale_buf(float* y, const float* x, float a, size_t n) {
  kern::active().scale(y, x, a, n);
}
inline void add_buf(float* y, const float* x, size_t n) {
  kern::active().add(y, x, n);
}

inline void gemm_nn(double* c, const double* a, const double* b, size_t m,
                    size_t n, size_t k, size_t ldc, size_t lda, size_t ldb) {
  for (size_t i = 0; i < m; ++i)
    for (size_t p = 0; p < k; ++p) {
      double av = a[i * lda + p];
      for (size_t j = 0; j < n; ++j)
        c[i * ldc + j] = std::fma(av, b[p * ldb + j], c[i * ldc + j]);
    }
}
inline void gemm_nt(double* c, const double* a, const double* b, size_t m,
                    size_t n, size_t k, size_t ldc, size_t lda, size_t ldb) {
  for (size_t i = 0; i < m; ++i)
    for (size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (size_t p = 0; p < k; ++p)
        acc = std::fma(a[i * lda + p], b[j * ldb + p], acc);
      c[i * ldc + j] += acc;
    }
}
inline void axpy(double* y, const double* x, double a, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] = std::fma(a, x[i], y[i]);
}
inline void relu_fwd(double* y, const double* x, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] = x[i] > 0 ? x[i] : 0;
}
inline void relu_bwd(double* dx, const double* x, const double* dy, size_t n) {
  for (size_t i = 0; i < n; ++i) dx[i] += x[i] > 0 ? dy[i] : 0;
}
inline void scale_buf(double* y, const double* x, double a, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] = a * x[i];
}
inline void add_buf(double* y, const double* x, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] += x[i];
}

template <typename T>
void transpose(const T* a, size_t rows, size_t cols, T* out) {
  for (size_t i = 0; i < rows; ++i)
    for (size_t j = 0; j < cols; ++j) out[j * rows + i] = a[i * cols + j];
}

template <typename T>
Ptr<T> make_op(Tensor<T> value, std::vector<Ptr<T>> parents,
               std::function<void(Node<T>&)> backprop) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  for (const auto& p : parents) n->requires_grad |= p->requires_grad;
  if (n->requires_grad) {
    n->parents = std::move(parents);
    n->backprop = std::move(backprop);
  }
  return n;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise and reduction ops

template <typename T>
Ptr<T> relu(const Ptr<T>& x) {
  Tensor<T> y(x->value.shape);
  detail::relu_fwd(y.v.data(), x->value.v.data(), y.size());
  Node<T>* xp = x.get();
  return detail::make_op<T>(std::move(y), {x}, [xp](Node<T>& self) {
    if (!xp->requires_grad) return;
    detail::relu_bwd(xp->ensure_grad().v.data(), xp->value.v.data(),
                     self.grad.v.data(), self.value.size());
  });
}

template <typename T>
Ptr<T> scale(const Ptr<T>& x, T a) {
  Tensor<T> y(x->value.shape);
  detail::scale_buf(y.v.data(), x->value.v.data(), a, y.size());
  Node<T>* xp = x.get();
  return detail::make_op<T>(std::move(y), {x}, [xp, a](Node<T>& self) {
    if (!xp->requires_grad) return;
    detail::axpy(xp->ensure_grad().v.data(), self.grad.v.data(), a,
                 self.value.size());
  });
}

template <typename T>
Ptr<T> neg(const Ptr<T>& x) {
  return scale(x, T(-1));
}

template <typename T>
Ptr<T> add(const Ptr<T>& a, const Ptr<T>& b) {
  if (!a->value.same_shape(b->value))
    throw std::runtime_error("add: shape mismatch " + a->value.shape_str() +
                             " vs " + b->value.shape_str());
  Tensor<T> y = a->value;
  detail::add_buf(y.v.data(), b->value.v.data(), y.size());
  Node<T>* ap = a.get();
  Node<T>* bp = b.get();
  return detail::make_op<T>(std::move(y), {a, b}, [ap, bp](Node<T>& self) {
    if (ap->requires_grad)
      detail::add_buf(ap->ensure_grad().v.data(), self.grad.v.data(),
                      self.value.size());
    if (bp->requires_grad)
      detail::add_buf(bp->ensure_grad().v.data(), self.grad.v.data(),
                      self.value.size());
  });
}

template <typename T>
Ptr<T> mul(const Ptr<T>& a, const Ptr<T>& b) {
  if (!a->value.same_shape(b->value))
    throw std::runtime_error("mul: shape mismatch " + a->value.shape_str() +
                             " vs " + b->value.shape_str());
  Tensor<T> y(a->value.shape);
  for (size_t i = 0; i < y.size(); ++i)
    y.v[i] = a->value.v[i] * b->value.v[i];
  Node<T>* ap = a.get();
  Node<T>* bp = b.get();
  return detail::make_op<T>(std::move(y), {a, b}, [ap, bp](Node<T>& self) {
    if (ap->requires_grad) {
      Tensor<T>& da = ap->ensure_grad();
      for (size_t i = 0; i < da.size(); ++i)
        da.v[i] += self.grad.v[i] * bp->value.v[i];
    }
    if (bp->requires_grad) {
      Tensor<T>& db = bp->ensure_grad();
      for (size_t i = 0; i < db.size(); ++i)
        db.v[i] += self.grad.v[i] * ap->value.v[i];
    }
  });
}

template <typename T>
Ptr<T> sum(const Ptr<T>& x) {
  T acc = 0;
  for (const T& xv : x->value.v) acc += xv;
  Node<T>* xp = x.get();
  return detail::make_op<T>(Tensor<T>::scalar(acc), {x}, [xp](Node<T>& self) {
    if (!xp->requires_grad) return;
    T g = self.grad.v[0];
    Tensor<T>& dx = xp->ensure_grad();
    for (size_t i = 0; i < dx.size(); ++i) dx.v[i] += g;
  });
}

template <typename T>
Ptr<T> mean(const Ptr<T>& x) {
  size_t n = x->value.size();
  T acc = 0;
  for (const T& xv : x->value.v) acc += xv;
  T inv = T(1) / static_cast<T>(n);
  Node<T>* xp = x.get();
  return detail::make_op<T>(Tensor<T>::scalar(acc * inv), {x},
                            [xp, inv](Node<T>& self) {
                              if (!xp->requires_grad) return;
                              T g = self.grad.v[0] * inv;
                              Tensor<T>& dx = xp->ensure_grad();
                              for (size_t i = 0; i < dx.size(); ++i)
                                dx.v[i] += g;
                            });
}

/// y = log(max(x, floor)); clamped entries pass no gradient.
template <typename T>
Ptr<T> log_floored(const Ptr<T>& x, T floor) {
  Tensor<T> y(x->value.shape);
  for (size_t i = 0; i < y.size(); ++i)
    y.v[i] = std::log(x->value.v[i] > floor ? x->value.v[i] : floor);
  Node<T>* xp = x.get();
  return detail::make_op<T>(std::move(y), {x}, [xp, floor](Node<T>& self) {
    if (!xp->requires_grad) return;
    Tensor<T>& dx = xp->ensure_grad();
    for (size_t i = 0; i < dx.size(); ++i) {
      T xv = xp->value.v[i];
      if (xv > floor) dx.v[i] += self.grad.v[i] / xv;
    }
  });
}

// ---------------------------------------------------------------------------
// matrix ops

/// C = A (m,k) * B (n,k)^T -> (m,n)
template <typename T>
Ptr<T> matmul_nt(const Ptr<T>& a, const Ptr<T>& b) {
  if (a->value.shape.size() != 2 || b->value.shape.size() != 2 ||
      a->value.dim(1) != b->value.dim(1))
    throw std::runtime_error("matmul_nt: incompatible shapes " +
                             a->value.shape_str() + " x " +
                             b->value.shape_str());
  size_t m = a->value.dim(0), n = b->value.dim(0), k = a->value.dim(1);
  Tensor<T> y({static_cast<int>(m), static_cast<int>(n)});
  detail::gemm_nt(y.v.data(), a->value.v.data(), b->value.v.data(), m, n, k,
                  n, k, k);
  Node<T>* ap = a.get();
  Node<T>* bp = b.get();
  return detail::make_op<T>(
      std::move(y), {a, b}, [ap, bp, m, n, k](Node<T>& self) {
        const T* dc = self.grad.v.data();
        if (ap->requires_grad)  // dA += dC (m,n) * B (n,k)
          detail::gemm_nn(ap->ensure_grad().v.data(), dc,
                          bp->value.v.data(), m, k, n, k, n, k);
        if (bp->requires_grad) {  // dB += dC^T (n,m) * A (m,k)
          std::vector<T> dct(m * n);
          detail::transpose(dc, m, n, dct.data());
          detail::gemm_nn(bp->ensure_grad().v.data(), dct.data(),
                          ap->value.v.data(), n, k, m, k, m, k);
        }
      });
}

/// Diagonal of a square matrix -> vector.
template <typename T>
Ptr<T> diag(const Ptr<T>& x) {
  if (x->value.shape.size() != 2 || x->value.dim(0) != x->value.dim(1))
    throw std::runtime_error("diag: expected square matrix, got " +
                             x->value.shape_str());
  size_t r = x->value.dim(0);
  Tensor<T> y({static_cast<int>(r)});
  for (size_t i = 0; i < r; ++i) y.v[i] = x->value.v[i * r + i];
  Node<T>* xp = x.get();
  return detail::make_op<T>(std::move(y), {x}, [xp, r](Node<T>& self) {
    if (!xp->requires_grad) return;
    Tensor<T>& dx = xp->ensure_grad();
    for (size_t i = 0; i < r; ++i) dx.v[i * r + i] += self.grad.v[i];
  });
}

/// Log-softmax across each row of an (R,C) matrix.
template <typename T>
Ptr<T> row_log_softmax(const Ptr<T>& x) {
  if (x->value.shape.size() != 2)
    throw std::runtime_error("row_log_softmax: expected matrix, got " +
                             x->value.shape_str());
  size_t rows = x->value.dim(0), cols = x->value.dim(1);
  Tensor<T> y(x->value.shape);
  for (size_t r = 0; r < rows; ++r) {
    const T* xr = x->value.v.data() + r * cols;
    T* yr = y.v.data() + r * cols;
    T mx = xr[0];
    for (size_t c = 1; c < cols; ++c) mx = xr[c] > mx ? xr[c] : mx;
    T s = 0;
    for (size_t c = 0; c < cols; ++c) s += std::exp(xr[c] - mx);
    T lse = mx + std::log(s);
    for (size_t c = 0; c < cols; ++c) yr[c] = xr[c] - lse;
  }
  Node<T>* xp = x.get();
  return detail::make_op<T>(
      std::move(y), {x}, [xp, rows, cols](Node<T>& self) {
        if (!xp->requires_grad) return;
        Tensor<T>& dx = xp->ensure_grad();
        for (size_t r = 0; r < rows; ++r) {
          const T* dyr = self.grad.v.data() + r * cols;
          const T* yr = self.value.v.data() + r * cols;
          T sum_dy = 0;
          for (size_t c = 0; c < cols; ++c) sum_dy += dyr[c];
          T* dxr = dx.v.data() + r * cols;
          for (size_t c = 0; c < cols; ++c)
            dxr[c] += dyr[c] - std::exp(yr[c]) * sum_dy;
        }
      });
}

// ---------------------------------------------------------------------------
// image (NCHW) ops

/// Per-pixel softmax over the channel axis of an (N,C,H,W) tensor.
template <typename T>
Ptr<T> softmax_channels(const Ptr<T>& x) {
  if (x->value.shape.size() != 4)
    throw std::runtime_error("softmax_channels: expected NCHW, got " +
                             x->value.shape_str());
  size_t n = x->value.dim(0), ch = x->value.dim(1);
  size_t hw = size_t(x->value.dim(2)) * x->value.dim(3);
  Tensor<T> y(x->value.shape);
  for (size_t b = 0; b < n; ++b)
    for (size_t p = 0; p < hw; ++p) {
      const T* xv = x->value.v.data() + b * ch * hw + p;
      T* yv = y.v.data() + b * ch * hw + p;
      T mx = xv[0];
      for (size_t c = 1; c < ch; ++c)
        mx = xv[c * hw] > mx ? xv[c * hw] : mx;
      T s = 0;
      for (size_t c = 0; c < ch; ++c) {
        yv[c * hw] = std::exp(xv[c * hw] - mx);
        s += yv[c * hw];
      }
      T inv = T(1) / s;
      for (size_t c = 0; c < ch; ++c) yv[c * hw] *= inv;
    }
  Node<T>* xp = x.get();
  return detail::make_op<T>(
      std::move(y), {x}, [xp, n, ch, hw](Node<T>& self) {
        if (!xp->requires_grad) return;
        Tensor<T>& dx = xp->ensure_grad();
        for (size_t b = 0; b < n; ++b)
          for (size_t p = 0; p < hw; ++p) {
            const T* yv = self.value.v.data() + b * ch * hw + p;
            const T* dyv = self.grad.v.data() + b * ch * hw + p;
            T dot = 0;
            for (size_t c = 0; c < ch; ++c) dot += dyv[c * hw] * yv[c * hw];
            T* dxv = dx.v.data() + b * ch * hw + p;
            for (size_t c = 0; c < ch; ++c)
              dxv[c * hw] += yv[c * hw] * (dyv[c * hw] - dot);
          }
      });
}

constexpr double kNormalizeGuard = 1e-8;

/// Per-pixel L2 normalization over channels. Pixels whose pre-normalization
/// norm falls below the guard come out all-zero; `valid_out`, when given,
/// receives one flag per (n,pixel) so losses can skip them. No gradient
/// flows through guarded pixels.
template <typename T>
Ptr<T> l2_normalize_channels(
    const Ptr<T>& x,
    std::shared_ptr<std::vector<uint8_t>>* valid_out = nullptr) {
  if (x->value.shape.size() != 4)
    throw std::runtime_error("l2_normalize_channels: expected NCHW, got " +
                             x->value.shape_str());
  size_t n = x->value.dim(0), ch = x->value.dim(1);
  size_t hw = size_t(x->value.dim(2)) * x->value.dim(3);
  Tensor<T> y(x->value.shape);
  auto valid = std::make_shared<std::vector<uint8_t>>(n * hw, uint8_t(1));
  auto inv_norm = std::make_shared<std::vector<T>>(n * hw, T(0));
  for (size_t b = 0; b < n; ++b)
    for (size_t p = 0; p < hw; ++p) {
      const T* xv = x->value.v.data() + b * ch * hw + p;
      T n2 = 0;
      for (size_t c = 0; c < ch; ++c) n2 += xv[c * hw] * xv[c * hw];
      T nrm = std::sqrt(n2);
      if (nrm < T(kNormalizeGuard)) {
        (*valid)[b * hw + p] = 0;
        continue;  // y stays zero
      }
      T inv = T(1) / nrm;
      (*inv_norm)[b * hw + p] = inv;
      T* yv = y.v.data() + b * ch * hw + p;
      for (size_t c = 0; c < ch; ++c) yv[c * hw] = xv[c * hw] * inv;
    }
  if (valid_out) *valid_out = valid;
  Node<T>* xp = x.get();
  return detail::make_op<T>(
      std::move(y), {x},
      [xp, n, ch, hw, valid, inv_norm](Node<T>& self) {
        if (!xp->requires_grad) return;
        Tensor<T>& dx = xp->ensure_grad();
        for (size_t b = 0; b < n; ++b)
          for (size_t p = 0; p < hw; ++p) {
            if (!(*valid)[b * hw + p]) continue;
            T inv = (*inv_norm)[b * hw + p];
            const T* yv = self.value.v.data() + b * ch * hw + p;
            const T* dyv = self.grad.v.data() + b * ch * hw + p;
            T dot = 0;
            for (size_t c = 0; c < ch; ++c) dot += dyv[c * hw] * yv[c * hw];
            T* dxv = dx.v.data() + b * ch * hw + p;
            for (size_t c = 0; c < ch; ++c)
              dxv[c * hw] += (dyv[c * hw] - yv[c * hw] * dot) * inv;
          }
      });
}

/// Bilinear 2x upsample, align_corners=false (source coordinate of output
/// pixel o is (o+0.5)/2 - 0.5, edges clamped).
template <typename T>
Ptr<T> upsample2x_bilinear(const Ptr<T>& x) {
  if (x->value.shape.size() != 4)
    throw std::runtime_error("upsample2x_bilinear: expected NCHW, got " +
                             x->value.shape_str());
  int n = x->value.dim(0), ch = x->value.dim(1);
  int h = x->value.dim(2), w = x->value.dim(3);
  int oh = h * 2, ow = w * 2;
  Tensor<T> y({n, ch, oh, ow});
  auto clampi = [](int a, int hi) { return a < 0 ? 0 : (a > hi ? hi : a); };
  // per output pixel: source corners and weights (shared across n, c)
  struct Tap {
    int y0, y1, x0, x1;
    T fy, fx;
  };
  std::vector<Tap> taps(size_t(oh) * ow);
  for (int oy = 0; oy < oh; ++oy)
    for (int ox = 0; ox < ow; ++ox) {
      T sy = (T(oy) + T(0.5)) / 2 - T(0.5);
      T sx = (T(ox) + T(0.5)) / 2 - T(0.5);
      int y0 = static_cast<int>(std::floor(sy));
      int x0 = static_cast<int>(std::floor(sx));
      Tap& t = taps[size_t(oy) * ow + ox];
      t.fy = sy - y0;
      t.fx = sx - x0;
      t.y0 = clampi(y0, h - 1);
      t.y1 = clampi(y0 + 1, h - 1);
      t.x0 = clampi(x0, w - 1);
      t.x1 = clampi(x0 + 1, w - 1);
    }
  for (int b = 0; b < n; ++b)
    for (int c = 0; c < ch; ++c) {
      const T* src = x->value.v.data() + (size_t(b) * ch + c) * h * w;
      T* dst = y.v.data() + (size_t(b) * ch + c) * oh * ow;
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          const Tap& t = taps[size_t(oy) * ow + ox];
          T top = src[t.y0 * w + t.x0] * (1 - t.fx) + src[t.y0 * w + t.x1] * t.fx;
          T bot = src[t.y1 * w + t.x0] * (1 - t.fx) + src[t.y1 * w + t.x1] * t.fx;
          dst[oy * ow + ox] = top * (1 - t.fy) + bot * t.fy;
        }
    }
  Node<T>* xp = x.get();
  auto taps_sp = std::make_shared<std::vector<Tap>>(std::move(taps));
  return detail::make_op<T>(
      std::move(y), {x},
      [xp, n, ch, h, w, oh, ow, taps_sp](Node<T>& self) {
        if (!xp->requires_grad) return;
        Tensor<T>& dx = xp->ensure_grad();
        for (int b = 0; b < n; ++b)
          for (int c = 0; c < ch; ++c) {
            T* dsrc = dx.v.data() + (size_t(b) * ch + c) * h * w;
            const T* ddst = self.grad.v.data() + (size_t(b) * ch + c) * oh * ow;
            for (int oy = 0; oy < oh; ++oy)
              for (int ox = 0; ox < ow; ++ox) {
                const Tap& t = (*taps_sp)[size_t(oy) * ow + ox];
                T g = ddst[oy * ow + ox];
                dsrc[t.y0 * w + t.x0] += g * (1 - t.fy) * (1 - t.fx);
                dsrc[t.y0 * w + t.x1] += g * (1 - t.fy) * t.fx;
                dsrc[t.y1 * w + t.x0] += g * t.fy * (1 - t.fx);
                dsrc[t.y1 * w + t.x1] += g * t.fy * t.fx;
              }
          }
      });
}

// ---------------------------------------------------------------------------
// convolution (same padding, odd kernel) via im2col + GEMM

namespace detail {

template <typename T>
void im2col(const T* x, int ch, int h, int w, int kh, int kw, int stride,
            int pad, int oh, int ow, T* col) {
  size_t l = size_t(oh) * ow;
  for (int c = 0; c < ch; ++c)
    for (int ky = 0; ky < kh; ++ky)
      for (int kx = 0; kx < kw; ++kx) {
        T* row = col + ((size_t(c) * kh + ky) * kw + kx) * l;
        for (int oy = 0; oy < oh; ++oy) {
          int iy = oy * stride + ky - pad;
          T* out = row + size_t(oy) * ow;
          if (iy < 0 || iy >= h) {
            for (int ox = 0; ox < ow; ++ox) out[ox] = 0;
            continue;
          }
          const T* src = x + size_t(c) * h * w + size_t(iy) * w;
          for (int ox = 0; ox < ow; ++ox) {
            int ix = ox * stride + kx - pad;
            out[ox] = (ix >= 0 && ix < w) ? src[ix] : T(0);
          }
        }
      }
}

template <typename T>
void col2im_add(const T* col, int ch, int h, int w, int kh, int kw, int stride,
                int pad, int oh, int ow, T* dx) {
  size_t l = size_t(oh) * ow;
  for (int c = 0; c < ch; ++c)
    for (int ky = 0; ky < kh; ++ky)
      for (int kx = 0; kx < kw; ++kx) {
        const T* row = col + ((size_t(c) * kh + ky) * kw + kx) * l;
        for (int oy = 0; oy < oh; ++oy) {
          int iy = oy * stride + ky - pad;
          if (iy < 0 || iy >= h) continue;
          T* dst = dx + size_t(c) * h * w + size_t(iy) * w;
          const T* src = row + size_t(oy) * ow;
          for (int ox = 0; ox < ow; ++ox) {
            int ix = ox * stride + kx - pad;
            if (ix >= 0 && ix < w) dst[ix] += src[ox];
          }
        }
      }
}

}  // namespace detail

/// 2D convolution, NCHW input, OIHW weights, same padding ((k-1)/2), odd
/// square kernel, stride 1 or 2.
template <typename T>
Ptr<T> conv2d(const Ptr<T>& x, const Ptr<T>& w, const Ptr<T>& b, int stride) {
  const auto& xs = x->value.shape;
  const auto& ws = w->value.shape;
  if (xs.size() != 4 || ws.size() != 4)
    throw std::runtime_error("conv2d: expected NCHW input and OIHW weights");
  int n = xs[0], ci = xs[1], h = xs[2], wd = xs[3];
  int co = ws[0], kh = ws[2], kw = ws[3];
  if (ws[1] != ci)
    throw std::runtime_error("conv2d: input has " + std::to_string(ci) +
                             " channels, weights expect " +
                             std::to_string(ws[1]));
  if (kh != kw || kh % 2 == 0)
    throw std::runtime_error("conv2d: kernel must be odd and square");
  if (stride != 1 && stride != 2)
    throw std::runtime_error("conv2d: stride must be 1 or 2");
  if (b->value.shape.size() != 1 || b->value.dim(0) != co)
    throw std::runtime_error("conv2d: bias shape mismatch");
  int pad = (kh - 1) / 2;
  int oh = (h + 2 * pad - kh) / stride + 1;
  int ow = (wd + 2 * pad - kw) / stride + 1;
  size_t l = size_t(oh) * ow;
  size_t ckk = size_t(ci) * kh * kw;

  Tensor<T> y({n, co, oh, ow});
  std::vector<T> col(ckk * l);
  for (int bi = 0; bi < n; ++bi) {
    detail::im2col(x->value.v.data() + size_t(bi) * ci * h * wd, ci, h, wd, kh,
                   kw, stride, pad, oh, ow, col.data());
    T* out = y.v.data() + size_t(bi) * co * l;
    for (int c = 0; c < co; ++c)
      for (size_t i = 0; i < l; ++i) out[c * l + i] = b->value.v[c];
    detail::gemm_nn(out, w->value.v.data(), col.data(), co, l, ckk, l, ckk, l);
  }

  Node<T>* xp = x.get();
  Node<T>* wp = w.get();
  Node<T>* bp = b.get();
  return detail::make_op<T>(
      std::move(y), {x, w, b},
      [xp, wp, bp, n, ci, h, wd, co, kh, kw, stride, pad, oh, ow, l,
       ckk](Node<T>& self) {
        std::vector<T> col(ckk * l);
        std::vector<T> wt;
        if (xp->requires_grad) {
          wt.resize(ckk * co);
          detail::transpose(wp->value.v.data(), co, ckk, wt.data());
        }
        std::vector<T> dcol(xp->requires_grad ? ckk * l : 0);
        for (int bi = 0; bi < n; ++bi) {
          const T* dout = self.grad.v.data() + size_t(bi) * co * l;
          if (wp->requires_grad || xp->requires_grad)
            detail::im2col(xp->value.v.data() + size_t(bi) * ci * h * wd, ci,
                           h, wd, kh, kw, stride, pad, oh, ow, col.data());
          if (wp->requires_grad)
            detail::gemm_nt(wp->ensure_grad().v.data(), dout, col.data(), co,
                            ckk, l, ckk, l, l);
          if (bp->requires_grad) {
            Tensor<T>& db = bp->ensure_grad();
            for (int c = 0; c < co; ++c) {
              T acc = 0;
              for (size_t i = 0; i < l; ++i) acc += dout[c * l + i];
              db.v[c] += acc;
            }
          }
          if (xp->requires_grad) {
            std::fill(dcol.begin(), dcol.end(), T(0));
            detail::gemm_nn(dcol.data(), wt.data(), dout, ckk, l, co, l, co,
                            l);
            detail::col2im_add(dcol.data(), ci, h, wd, kh, kw, stride, pad,
                               oh, ow,
                               xp->ensure_grad().v.data() +
                                   size_t(bi) * ci * h * wd);
          }
        }
      });
}

// ---------------------------------------------------------------------------
// gather ops (pixel selection for the losses)

/// Rows of per-pixel features: x (1,C,H,W), pixels P -> (P,C).
template <typename T>
Ptr<T> gather_pixels(const Ptr<T>& x, std::vector<uint32_t> pixels) {
  if (x->value.shape.size() != 4 || x->value.dim(0) != 1)
    throw std::runtime_error("gather_pixels: expected (1,C,H,W), got " +
                             x->value.shape_str());
  size_t ch = x->value.dim(1);
  size_t hw = size_t(x->value.dim(2)) * x->value.dim(3);
  for (uint32_t p : pixels)
    if (p >= hw) throw std::runtime_error("gather_pixels: pixel out of range");
  size_t np = pixels.size();
  Tensor<T> y({static_cast<int>(np), static_cast<int>(ch)});
  for (size_t r = 0; r < np; ++r)
    for (size_t c = 0; c < ch; ++c)
      y.v[r * ch + c] = x->value.v[c * hw + pixels[r]];
  Node<T>* xp = x.get();
  auto pix = std::make_shared<std::vector<uint32_t>>(std::move(pixels));
  return detail::make_op<T>(
      std::move(y), {x}, [xp, pix, ch, hw](Node<T>& self) {
        if (!xp->requires_grad) return;
        Tensor<T>& dx = xp->ensure_grad();
        for (size_t r = 0; r < pix->size(); ++r)
          for (size_t c = 0; c < ch; ++c)
            dx.v[c * hw + (*pix)[r]] += self.grad.v[r * ch + c];
      });
}

/// Per-pixel class probabilities: x (1,C,H,W), (pixel,class) pairs -> (P).
template <typename T>
Ptr<T> select_pixel_class(const Ptr<T>& x,
                          std::vector<std::pair<uint32_t, uint32_t>> sel) {
  if (x->value.shape.size() != 4 || x->value.dim(0) != 1)
    throw std::runtime_error("select_pixel_class: expected (1,C,H,W), got " +
                             x->value.shape_str());
  size_t ch = x->value.dim(1);
  size_t hw = size_t(x->value.dim(2)) * x->value.dim(3);
  for (const auto& [p, c] : sel)
    if (p >= hw || c >= ch)
      throw std::runtime_error("select_pixel_class: index out of range");
  Tensor<T> y({static_cast<int>(sel.size())});
  for (size_t r = 0; r < sel.size(); ++r)
    y.v[r] = x->value.v[size_t(sel[r].second) * hw + sel[r].first];
  Node<T>* xp = x.get();
  auto s = std::make_shared<std::vector<std::pair<uint32_t, uint32_t>>>(
      std::move(sel));
  return detail::make_op<T>(std::move(y), {x}, [xp, s, hw](Node<T>& self) {
    if (!xp->requires_grad) return;
    Tensor<T>& dx = xp->ensure_grad();
    for (size_t r = 0; r < s->size(); ++r)
      dx.v[size_t((*s)[r].second) * hw + (*s)[r].first] += self.grad.v[r];
  });
}

// ---------------------------------------------------------------------------

/// Reverse pass from a scalar loss. Populates .grad on every node that the
/// loss depends on; parameters the loss never touches keep an empty (zero)
/// gradient. Throws if called twice on the same loss node.
template <typename T>
void backward(const Ptr<T>& loss) {
  if (loss->value.size() != 1)
    throw std::runtime_error("backward: loss must be scalar, got " +
                             loss->value.shape_str());
  if (loss->backward_done)
    throw std::runtime_error(
        "backward: already called on this loss; rebuild the graph or reset");
  loss->backward_done = true;
  if (!loss->requires_grad) return;  // no parameters anywhere upstream

  // iterative post-order: parents land before consumers
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen{loss.get()};
  std::vector<std::pair<Node<T>*, size_t>> stack{{loss.get(), 0}};
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  loss->ensure_grad().v[0] = T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* node = *it;
    if (node->backprop && !node->grad.v.empty()) node->backprop(*node);
  }
}

/// Clears gradients (and the double-backward latch) on the given nodes.
template <typename T>
void zero_grad(const std::vector<Ptr<T>>& params) {
  for (const auto& p : params) {
    p->grad = Tensor<T>();
    p->backward_done = false;
  }
}

}  // namespace mvseg
