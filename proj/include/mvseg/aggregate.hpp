// Copyright (c) 2026 mvseg contributors
// SPDX-License-Identifier: Apache-2.0
//
// Multi-view fusion of per-pixel class probabilities onto mesh triangles:
// entropy-derived per-view weights, weighted per-triangle voting, and
// nearest-neighbor fill for triangles no view ever saw.
#pragma once

#include <cstdint>
#include <vector>

#include "mvseg/mesh.hpp"
#include "mvseg/render.hpp"

namespace mvseg {

/// Per-pixel class probabilities for one view, planar (C,H,W), each pixel's
/// channel column summing to 1.
struct ProbMap {
  int height = 0;
  int width = 0;
  int n_classes = 0;
  std::vector<float> p;  // n_classes * height * width

  ProbMap() = default;
  ProbMap(int h, int w, int c)
      : height(h), width(w), n_classes(c), p(size_t(c) * h * w, 0.0f) {}

  float at(int c, size_t pixel) const {
    return p[size_t(c) * height * width + pixel];
  }
};

constexpr double kDefaultGamma = 20.0;

/// W = (1 - mean over foreground of normalized entropy)^gamma. The entropy of
/// each pixel is normalized by ln(n_classes) so the base lies in [0,1]; it is
/// clamped there anyway as a numeric guard. Views with empty foreground get
/// weight 0.
double view_weight(const ProbMap& probs, const std::vector<uint8_t>& mask,
                   double gamma);

struct AggregateResult {
  FaceLabels labels;             // kUnlabeled where uncovered
  std::vector<uint8_t> covered;  // 1 = seen in >= 1 view
};

/// l_t = argmax_c sum over views i and pixels p with tri_id = t of
/// W^(i) P^(i,p,c); ties break to the lowest class id. Triangles visible in
/// no view come back uncovered.
AggregateResult aggregate_labels(const std::vector<const ViewBuffers*>& views,
                                 const std::vector<const ProbMap*>& probs,
                                 size_t n_triangles, double gamma);

/// Gives every uncovered triangle the label of the nearest covered triangle
/// (centroid distance, ties to the lowest index). Throws when nothing is
/// covered.
FaceLabels fill_occluded(const TriMesh& mesh, const AggregateResult& partial);

}  // namespace mvseg
