// Copyright (c) 2026 mvseg contributors
// SPDX-License-Identifier: Apache-2.0
//
// Training objectives. The dense InfoNCE over a sampled match set, its
// batch-level Monte-Carlo average, the masked per-pixel cross entropy, and
// the joint fine-tuning objective lambda * L_ssl + L_sl.
#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "mvseg/autodiff.hpp"
#include "mvseg/correspond.hpp"
#include "mvseg/render.hpp"

namespace mvseg {

struct LossConfig {
  double tau = 0.07;
  double lambda_reg = 0.001;
  size_t n_pairs = 4096;

  void validate() const {
    if (!(tau > 0)) throw std::runtime_error("loss config: tau must be > 0");
    if (lambda_reg < 0)
      throw std::runtime_error("loss config: lambda_reg must be >= 0");
    if (n_pairs < 2)
      throw std::runtime_error(
          "loss config: n_pairs must be >= 2 (need a negative)");
  }
};

enum class Reduction { kSum, kMean };

/// Dense InfoNCE over sampled positive pairs (p_r, q_r). Per pair r the
/// candidate pool is every second-view member q_s of the sample (s = r is the
/// positive), so
///
///   L = -reduce_r log( exp(e_p_r . e_q_r / tau) / sum_s exp(e_p_r . e_q_s / tau) ).
///
/// The canonical form is the sum over pairs; the trainer uses the mean so the
/// learning rate does not depend on n_pairs. Pairs touching a zero-norm
/// guarded pixel (per the valid masks) are dropped. Throws when fewer than
/// two pairs survive.
template <typename T>
Ptr<T> info_nce(const Ptr<T>& emb_i, const Ptr<T>& emb_j,
                const PairSample& sample, double tau,
                Reduction reduction = Reduction::kSum,
                const std::vector<uint8_t>* valid_i = nullptr,
                const std::vector<uint8_t>* valid_j = nullptr) {
  if (!(tau > 0)) throw std::runtime_error("info_nce: tau must be > 0");
  std::vector<uint32_t> pi, pj;
  pi.reserve(sample.positives.size());
  pj.reserve(sample.positives.size());
  for (const auto& [p, q] : sample.positives) {
    if (valid_i && !(*valid_i)[p]) continue;
    if (valid_j && !(*valid_j)[q]) continue;
    pi.push_back(p);
    pj.push_back(q);
  }
  if (pi.size() < 2)
    throw std::runtime_error("info_nce: need at least 2 valid pairs, have " +
                             std::to_string(pi.size()));
  auto ei = gather_pixels(emb_i, std::move(pi));
  auto ej = gather_pixels(emb_j, std::move(pj));
#ifndef NDEBUG
  for (const Ptr<T>* e : {&ei, &ej}) {
    size_t rows = (*e)->value.dim(0), d = (*e)->value.dim(1);
    for (size_t r = 0; r < rows; ++r) {
      T n2 = 0;
      for (size_t c = 0; c < d; ++c) {
        T x = (*e)->value.v[r * d + c];
        n2 += x * x;
      }
      if (std::fabs(double(n2) - 1.0) > 1e-4)
        throw std::runtime_error("info_nce: embeddings are not unit-norm");
    }
  }
#endif
  auto logits = scale(matmul_nt(ei, ej), T(1.0 / tau));
  auto positives = diag(row_log_softmax(logits));
  return reduction == Reduction::kSum ? neg(sum(positives))
                                      : neg(mean(positives));
}

/// One sampled (shape, view-pair) draw for the batch SSL estimate.
template <typename T>
struct SslTerm {
  Ptr<T> emb_i, emb_j;
  PairSample sample;
  const std::vector<uint8_t>* valid_i = nullptr;
  const std::vector<uint8_t>* valid_j = nullptr;
};

/// Monte-Carlo estimate of the expected view-pair loss: mean over draws of
/// the mean-reduced InfoNCE. The caller is responsible for only sampling view
/// pairs that pass the overlap filter.
template <typename T>
Ptr<T> ssl_loss_over_batch(const std::vector<SslTerm<T>>& terms, double tau) {
  if (terms.empty())
    throw std::runtime_error("ssl_loss_over_batch: empty batch");
  Ptr<T> total;
  for (const auto& t : terms) {
    auto term = info_nce(t.emb_i, t.emb_j, t.sample, tau, Reduction::kMean,
                         t.valid_i, t.valid_j);
    total = total ? add(total, term) : term;
  }
  return scale(total, T(1) / static_cast<T>(terms.size()));
}

constexpr double kProbFloor = 1e-12;

/// Mean over labeled pixels of -log prob[label]. Pixels labeled
/// kIgnoreLabel (background) are skipped; probabilities are floored at
/// kProbFloor inside the log (no gradient when floored). Throws when every
/// pixel is ignored or a label is out of range.
template <typename T>
Ptr<T> cross_entropy(const Ptr<T>& probs, const LabelMap& labels) {
  if (probs->value.shape.size() != 4 || probs->value.dim(0) != 1)
    throw std::runtime_error("cross_entropy: expected (1,C,H,W) probs, got " +
                             probs->value.shape_str());
  size_t n_classes = probs->value.dim(1);
  size_t hw = size_t(probs->value.dim(2)) * probs->value.dim(3);
  if (labels.labels.size() != hw)
    throw std::runtime_error("cross_entropy: label map size mismatch");
  std::vector<std::pair<uint32_t, uint32_t>> sel;
  sel.reserve(hw);
  for (size_t p = 0; p < hw; ++p) {
    uint8_t l = labels.labels[p];
    if (l == kIgnoreLabel) continue;
    if (l >= n_classes)
      throw std::runtime_error("cross_entropy: label " + std::to_string(l) +
                               " out of range for " +
                               std::to_string(n_classes) + " classes");
    sel.emplace_back(static_cast<uint32_t>(p), l);
  }
  if (sel.empty())
    throw std::runtime_error("cross_entropy: all pixels ignored");
  auto picked = select_pixel_class(probs, std::move(sel));
  return neg(mean(log_floored(picked, T(kProbFloor))));
}

/// Eq-style joint objective: lambda * ssl + sl. lambda = 0 returns sl
/// unchanged. Throws on non-finite inputs.
template <typename T>
Ptr<T> joint_finetune_loss(const Ptr<T>& sl, const Ptr<T>& ssl, double lambda) {
  if (sl->value.size() != 1 || ssl->value.size() != 1)
    throw std::runtime_error("joint_finetune_loss: losses must be scalar");
  if (!std::isfinite(double(sl->value.v[0])) ||
      !std::isfinite(double(ssl->value.v[0])))
    throw std::runtime_error("joint_finetune_loss: non-finite loss input");
  return add(scale(ssl, T(lambda)), sl);
}

}  // namespace mvseg
