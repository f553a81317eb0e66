// Copyright (c) 2026 mvseg contributors
// SPDX-License-Identifier: Apache-2.0
//
// Pixel-level correspondence between two views of the same shape. A match
// pairs pixels whose world-space hit points coincide within eps; matching is
// mutual-nearest and one-to-one, with ties broken by distance and then by
// the lower pixel index, so results are deterministic and order-free.
#pragma once

#include <cstdint>
#include <vector>

#include "mvseg/render.hpp"
#include "mvseg/rng.hpp"

namespace mvseg {

constexpr double kDefaultMatchEps = 5e-3;

struct MatchSet {
  /// (pixel in view i, pixel in view j); each side appears at most once.
  std::vector<std::pair<uint32_t, uint32_t>> pairs;
  double eps = 0.0;
};

struct PairSample {
  std::vector<std::pair<uint32_t, uint32_t>> positives;
  uint64_t seed = 0;
};

/// Mutual-nearest one-to-one matching over foreground hit points.
/// Throws std::runtime_error on resolution mismatch.
MatchSet build_matches(const ViewBuffers& vi, const ViewBuffers& vj,
                       double eps = kDefaultMatchEps);

/// |M| / min(foreground_i, foreground_j); 0 when either view is empty.
double overlap(const ViewBuffers& vi, const ViewBuffers& vj,
               double eps = kDefaultMatchEps);

/// n uniform draws from the match set: without replacement when |M| >= n,
/// with replacement otherwise. Throws on an empty match set.
PairSample sample_positive_pairs(const MatchSet& m, size_t n, uint64_t seed);

}  // namespace mvseg
