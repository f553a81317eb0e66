// Copyright (c) 2026 mvseg contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <limits>
#include <vector>

#include "mvseg/mesh.hpp"
#include "mvseg/vec3.hpp"

namespace mvseg {

struct Ray {
  Vec3 origin;
  Vec3 dir;  // unit length
  Vec3 at(double t) const { return origin + dir * t; }
};

struct Hit {
  double t = std::numeric_limits<double>::infinity();
  int tri = -1;
  double u = 0.0, v = 0.0;  // barycentric weights of v1, v2
  explicit operator bool() const { return tri >= 0; }
};

/// Moller-Trumbore in double precision. Hits require t > 1e-9 and
/// barycentrics in range. BVH traversal and the brute-force oracle both call
/// this exact routine so their results are comparable bit-for-bit.
bool ray_triangle_intersect(const Ray& ray, const Vec3& v0, const Vec3& v1,
                            const Vec3& v2, double& t, double& u, double& v);

/// Nearest-hit comparison shared by BVH and brute force: smallest t, then
/// smallest triangle index.
inline bool hit_improves(double t, int tri, const Hit& best) {
  return t < best.t || (t == best.t && tri < best.tri);
}

/// Axis-aligned bounding box tree over mesh triangles. Immutable after
/// construction; intersect() is const and safe to call concurrently.
class Bvh {
 public:
  struct Node {
    Vec3 lo, hi;
    int left = -1, right = -1;  // internal children, or
    int first = 0, count = 0;   // leaf triangle range in tri_order
    bool is_leaf() const { return count > 0; }
  };

  Bvh() = default;
  explicit Bvh(const TriMesh& mesh, int leaf_size = 4);

  Hit intersect(const Ray& ray) const;

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<int>& triangle_order() const { return tri_order_; }

 private:
  int build(std::vector<int>& tris, int begin, int end, int leaf_size);

  const TriMesh* mesh_ = nullptr;
  std::vector<Node> nodes_;
  std::vector<int> tri_order_;
  std::vector<Vec3> centroids_;
};

/// All-triangle scan with the same intersection arithmetic and tie rule.
Hit intersect_brute_force(const TriMesh& mesh, const Ray& ray);

}  // namespace mvseg
