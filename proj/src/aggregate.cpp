// Copyright (c) 2026 mvseg contributors
// SPDX-License-Identifier: Apache-2.0
#include "mvseg/aggregate.hpp"

#include <cmath>
#include <stdexcept>

namespace mvseg {

double view_weight(const ProbMap& probs, const std::vector<uint8_t>& mask,
                   double gamma) {
  if (probs.n_classes < 2)
    throw std::runtime_error("view_weight: need >= 2 classes");
  size_t hw = size_t(probs.height) * probs.width;
  if (mask.size() != hw)
    throw std::runtime_error("view_weight: mask size mismatch");
  if (!(gamma >= 0))
    throw std::runtime_error("view_weight: gamma must be >= 0");

  double log_c = std::log(double(probs.n_classes));
  double sum = 0.0;
  size_t fg = 0;
  for (size_t p = 0; p < hw; ++p) {
    if (!mask[p]) continue;
    double h = 0.0;
    for (int c = 0; c < probs.n_classes; ++c) {
      double v = probs.at(c, p);
      if (v > 0.0) h -= v * std::log(v);
    }
    sum += h / log_c;
    ++fg;
  }
  if (fg == 0) return 0.0;
  double base = 1.0 - sum / double(fg);
  if (base < 0.0) base = 0.0;
  if (base > 1.0) base = 1.0;
  return std::pow(base, gamma);
}

AggregateResult aggregate_labels(const std::vector<const ViewBuffers*>& views,
                                 const std::vector<const ProbMap*>& probs,
                                 size_t n_triangles, double gamma) {
  if (views.size() != probs.size())
    throw std::runtime_error("aggregate_labels: view/prob count mismatch");
  int n_classes = probs.empty() ? 0 : probs.front()->n_classes;
  for (const ProbMap* pm : probs)
    if (pm->n_classes != n_classes)
      throw std::runtime_error("aggregate_labels: inconsistent class counts");

  std::vector<double> votes(n_triangles * size_t(n_classes), 0.0);
  std::vector<uint8_t> covered(n_triangles, 0);

  for (size_t i = 0; i < views.size(); ++i) {
    const ViewBuffers& vb = *views[i];
    const ProbMap& pm = *probs[i];
    size_t hw = vb.pixel_count();
    if (pm.height != vb.height || pm.width != vb.width ||
        size_t(pm.height) * pm.width != hw)
      throw std::runtime_error("aggregate_labels: prob map size mismatch");
    double w = view_weight(pm, vb.mask, gamma);
    for (size_t p = 0; p < hw; ++p) {
      int32_t t = vb.tri_id[p];
      if (t < 0) continue;
      if (size_t(t) >= n_triangles)
        throw std::runtime_error("aggregate_labels: tri_id out of range");
      covered[t] = 1;
      double* row = votes.data() + size_t(t) * n_classes;
      for (int c = 0; c < n_classes; ++c) row[c] += w * double(pm.at(c, p));
    }
  }

  AggregateResult res;
  res.labels.n_classes = n_classes;
  res.labels.labels.assign(n_triangles, kUnlabeled);
  res.covered = std::move(covered);
  for (size_t t = 0; t < n_triangles; ++t) {
    if (!res.covered[t]) continue;
    const double* row = votes.data() + t * size_t(n_classes);
    int best = 0;
    for (int c = 1; c < n_classes; ++c)
      if (row[c] > row[best]) best = c;  // ties keep the lowest id
    res.labels.labels[t] = best;
  }
  return res;
}

FaceLabels fill_occluded(const TriMesh& mesh, const AggregateResult& partial) {
  size_t n = mesh.triangles.size();
  if (partial.labels.labels.size() != n || partial.covered.size() != n)
    throw std::runtime_error("fill_occluded: size mismatch with mesh");

  bool any = false;
  for (uint8_t c : partial.covered) any |= c != 0;
  if (!any) throw std::runtime_error("fill_occluded: no triangle is covered");

  FaceLabels out = partial.labels;
  for (size_t t = 0; t < n; ++t) {
    if (partial.covered[t]) continue;
    // nearest_labeled_triangle treats kUnlabeled entries as gaps, which is
    // exactly the uncovered set here
    out.labels[t] =
        nearest_labeled_triangle(mesh, partial.labels, int(t));
  }
  return out;
}

}  // namespace mvseg
