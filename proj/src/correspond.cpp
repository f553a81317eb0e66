// Copyright (c) 2026 mvseg contributors
// SPDX-License-Identifier: Apache-2.0

#include "mvseg/correspond.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>
#include <unordered_map>

namespace mvseg {
namespace {

// Spatial hash over foreground hit points with cell size eps, so any point
// within eps of a query lies in the query's 3x3x3 cell neighborhood. Hash
// collisions between distinct cells only add candidates; the distance test
// filters them out.
class PointGrid {
 public:
  PointGrid(const ViewBuffers& view, double eps) : view_(view), inv_(1.0 / eps) {
    for (size_t p = 0; p < view.pixel_count(); ++p) {
      if (!view.is_foreground(p)) continue;
      cells_[key_of(view.hit_point(p))].push_back(static_cast<uint32_t>(p));
    }
  }

  /// Index of the nearest foreground pixel within eps (inclusive) of `q`,
  /// or -1. Ties break by distance, then by the lower pixel index.
  int64_t nearest(const Vec3& q, double eps) const {
    const double eps2 = eps * eps;
    double best_d2 = 0.0;
    int64_t best = -1;
    int cx = cell_coord(q.x), cy = cell_coord(q.y), cz = cell_coord(q.z);
    for (int dz = -1; dz <= 1; ++dz)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          auto it = cells_.find(pack(cx + dx, cy + dy, cz + dz));
          if (it == cells_.end()) continue;
          for (uint32_t p : it->second) {
            Vec3 d = view_.hit_point(p) - q;
            double d2 = d.norm2();
            if (d2 > eps2) continue;
            if (best < 0 || d2 < best_d2 ||
                (d2 == best_d2 && static_cast<int64_t>(p) < best)) {
              best_d2 = d2;
              best = p;
            }
          }
        }
    return best;
  }

 private:
  int cell_coord(double x) const { return static_cast<int>(std::floor(x * inv_)); }
  uint64_t key_of(const Vec3& v) const {
    return pack(cell_coord(v.x), cell_coord(v.y), cell_coord(v.z));
  }
  static uint64_t pack(int x, int y, int z) {
    uint64_t h = static_cast<uint32_t>(x) * 0x9e3779b185ebca87ULL;
    h ^= static_cast<uint32_t>(y) * 0xc2b2ae3d27d4eb4fULL;
    h ^= static_cast<uint32_t>(z) * 0x165667b19e3779f9ULL;
    return h;
  }

  const ViewBuffers& view_;
  double inv_;
  std::unordered_map<uint64_t, std::vector<uint32_t>> cells_;
};

}  // namespace

MatchSet build_matches(const ViewBuffers& vi, const ViewBuffers& vj,
                       double eps) {
  if (vi.height != vj.height || vi.width != vj.width)
    throw std::runtime_error("build_matches: view resolution mismatch");
  if (!(eps > 0.0)) throw std::runtime_error("build_matches: eps must be > 0");

  MatchSet m;
  m.eps = eps;
  PointGrid grid_i(vi, eps);
  PointGrid grid_j(vj, eps);
  for (size_t p = 0; p < vi.pixel_count(); ++p) {
    if (!vi.is_foreground(p)) continue;
    int64_t q = grid_j.nearest(vi.hit_point(p), eps);
    if (q < 0) continue;
    // mutual-nearest check makes the pairing one-to-one and symmetric
    if (grid_i.nearest(vj.hit_point(size_t(q)), eps) ==
        static_cast<int64_t>(p))
      m.pairs.emplace_back(static_cast<uint32_t>(p), static_cast<uint32_t>(q));
  }
  return m;
}

double overlap(const ViewBuffers& vi, const ViewBuffers& vj, double eps) {
  size_t fi = vi.foreground_count();
  size_t fj = vj.foreground_count();
  if (fi == 0 || fj == 0) return 0.0;
  MatchSet m = build_matches(vi, vj, eps);
  return static_cast<double>(m.pairs.size()) /
         static_cast<double>(std::min(fi, fj));
}

PairSample sample_positive_pairs(const MatchSet& m, size_t n, uint64_t seed) {
  if (m.pairs.empty())
    throw std::runtime_error("sample_positive_pairs: empty match set");
  PairSample out;
  out.seed = seed;
  out.positives.reserve(n);
  Rng rng(seed);
  if (n <= m.pairs.size()) {
    for (size_t idx : rng.sample_without_replacement(m.pairs.size(), n))
      out.positives.push_back(m.pairs[idx]);
  } else {
    for (size_t i = 0; i < n; ++i)
      out.positives.push_back(m.pairs[rng.index(m.pairs.size())]);
  }
  return out;
}

}  // namespace mvseg
