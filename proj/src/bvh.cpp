// Copyright (c) 2026 mvseg contributors
// SPDX-License-Identifier: Apache-2.0

#include "mvseg/bvh.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mvseg {

bool ray_triangle_intersect(const Ray& ray, const Vec3& v0, const Vec3& v1,
                            const Vec3& v2, double& t, double& u, double& v) {
  constexpr double kDetEps = 1e-14;
  constexpr double kTMin = 1e-9;
  Vec3 e1 = v1 - v0;
  Vec3 e2 = v2 - v0;
  Vec3 p = ray.dir.cross(e2);
  double det = e1.dot(p);
  if (std::fabs(det) < kDetEps) return false;
  double inv_det = 1.0 / det;
  Vec3 s = ray.origin - v0;
  u = s.dot(p) * inv_det;
  if (u < 0.0 || u > 1.0) return false;
  Vec3 q = s.cross(e1);
  v = ray.dir.dot(q) * inv_det;
  if (v < 0.0 || u + v > 1.0) return false;
  t = e2.dot(q) * inv_det;
  return t > kTMin;
}

namespace {

// Conservative slab test: NaNs from 0 * inf fall back to "no cull".
inline bool box_hit(const Vec3& lo, const Vec3& hi, const Ray& ray,
                    const Vec3& inv_dir, double t_best) {
  double tmin = 0.0;
  double tmax = t_best;
  for (int a = 0; a < 3; ++a) {
    double t0 = (lo[a] - ray.origin[a]) * inv_dir[a];
    double t1 = (hi[a] - ray.origin[a]) * inv_dir[a];
    tmin = std::fmax(tmin, std::fmin(t0, t1));
    tmax = std::fmin(tmax, std::fmax(t0, t1));
  }
  return tmin <= tmax;
}

}  // namespace

Bvh::Bvh(const TriMesh& mesh, int leaf_size) : mesh_(&mesh) {
  if (mesh.triangles.empty()) throw std::runtime_error("Bvh: empty mesh");
  if (leaf_size < 1) leaf_size = 1;
  size_t n = mesh.triangles.size();
  tri_order_.resize(n);
  centroids_.resize(n);
  for (size_t i = 0; i < n; ++i) {
    tri_order_[i] = static_cast<int>(i);
    centroids_[i] = mesh.triangle_centroid(static_cast<int>(i));
  }
  nodes_.reserve(2 * n);
  build(tri_order_, 0, static_cast<int>(n), leaf_size);
  centroids_.clear();
  centroids_.shrink_to_fit();
}

int Bvh::build(std::vector<int>& tris, int begin, int end, int leaf_size) {
  int node_index = static_cast<int>(nodes_.size());
  nodes_.emplace_back();

  Vec3 lo(1e300, 1e300, 1e300), hi(-1e300, -1e300, -1e300);
  for (int i = begin; i < end; ++i) {
    const auto& tr = mesh_->triangles[tris[i]];
    for (int k = 0; k < 3; ++k) {
      lo = min(lo, mesh_->vertices[tr[k]]);
      hi = max(hi, mesh_->vertices[tr[k]]);
    }
  }
  nodes_[node_index].lo = lo;
  nodes_[node_index].hi = hi;

  int count = end - begin;
  if (count <= leaf_size) {
    nodes_[node_index].first = begin;
    nodes_[node_index].count = count;
    return node_index;
  }

  Vec3 extent = hi - lo;
  int axis = 0;
  if (extent.y > extent[axis]) axis = 1;
  if (extent.z > extent[axis]) axis = 2;

  int mid = begin + count / 2;
  std::nth_element(tris.begin() + begin, tris.begin() + mid,
                   tris.begin() + end, [&](int a, int b) {
                     double ca = centroids_[a][axis];
                     double cb = centroids_[b][axis];
                     return ca < cb || (ca == cb && a < b);
                   });

  int left = build(tris, begin, mid, leaf_size);
  int right = build(tris, mid, end, leaf_size);
  nodes_[node_index].left = left;
  nodes_[node_index].right = right;
  return node_index;
}

Hit Bvh::intersect(const Ray& ray) const {
  Hit best;
  if (nodes_.empty()) return best;
  Vec3 inv_dir(1.0 / ray.dir.x, 1.0 / ray.dir.y, 1.0 / ray.dir.z);

  int stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    double limit = best ? best.t : std::numeric_limits<double>::infinity();
    if (!box_hit(node.lo, node.hi, ray, inv_dir, limit)) continue;
    if (node.is_leaf()) {
      for (int i = node.first; i < node.first + node.count; ++i) {
        int tri = tri_order_[i];
        const auto& tr = mesh_->triangles[tri];
        double t, u, v;
        if (ray_triangle_intersect(ray, mesh_->vertices[tr[0]],
                                   mesh_->vertices[tr[1]],
                                   mesh_->vertices[tr[2]], t, u, v) &&
            hit_improves(t, tri, best)) {
          best = Hit{t, tri, u, v};
        }
      }
    } else {
      stack[top++] = node.right;
      stack[top++] = node.left;
    }
  }
  return best;
}

Hit intersect_brute_force(const TriMesh& mesh, const Ray& ray) {
  Hit best;
  for (size_t tri = 0; tri < mesh.triangles.size(); ++tri) {
    const auto& tr = mesh.triangles[tri];
    double t, u, v;
    if (ray_triangle_intersect(ray, mesh.vertices[tr[0]], mesh.vertices[tr[1]],
                               mesh.vertices[tr[2]], t, u, v) &&
        hit_improves(t, static_cast<int>(tri), best)) {
      best = Hit{t, static_cast<int>(tri), u, v};
    }
  }
  return best;
}

}  // namespace mvseg
