// Copyright (c) 2026 mvseg contributors
// SPDX-License-Identifier: Apache-2.0

#include "mvseg/render.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mvseg/parallel.hpp"

namespace mvseg {
namespace {

// Bilinear texture fetch with clamp addressing; uv origin at the bottom-left
// per OBJ convention.
void sample_texture(const Texture& tex, double u, double v, float* out_rgb) {
  double x = u * tex.width - 0.5;
  double y = (1.0 - v) * tex.height - 0.5;
  int x0 = static_cast<int>(std::floor(x));
  int y0 = static_cast<int>(std::floor(y));
  double fx = x - x0;
  double fy = y - y0;
  auto clampi = [](int a, int hi) { return a < 0 ? 0 : (a > hi ? hi : a); };
  int x1 = clampi(x0 + 1, tex.width - 1);
  int y1 = clampi(y0 + 1, tex.height - 1);
  x0 = clampi(x0, tex.width - 1);
  y0 = clampi(y0, tex.height - 1);
  for (int c = 0; c < 3; ++c) {
    double a = tex.at(x0, y0)[c] * (1.0 - fx) + tex.at(x1, y0)[c] * fx;
    double b = tex.at(x0, y1)[c] * (1.0 - fx) + tex.at(x1, y1)[c] * fx;
    out_rgb[c] = static_cast<float>(a * (1.0 - fy) + b * fy);
  }
}

// Views whose raw z-depth varies less than this (relative) count as
// constant-depth and map to an all-zero depth buffer.
constexpr double kConstantDepthEps = 1e-9;

}  // namespace

size_t ViewBuffers::foreground_count() const {
  size_t n = 0;
  for (uint8_t m : mask) n += m;
  return n;
}

ViewBuffers render_view(const TriMesh& mesh, const Bvh& bvh,
                        const Texture* texture, const Camera& camera) {
  camera.validate();
  const int h = camera.height;
  const int w = camera.width;

  ViewBuffers vb;
  vb.height = h;
  vb.width = w;
  size_t np = size_t(h) * w;
  vb.rgb.assign(np * 3, 0.0f);
  vb.normal.assign(np * 3, 0.0f);
  vb.depth.assign(np, 0.0f);
  vb.tri_id.assign(np, -1);
  vb.hit.assign(np * 3, 0.0f);
  vb.mask.assign(np, 0);

  Vec3 forward, right, cam_up;
  camera.frame(forward, right, cam_up);
  bool textured = texture != nullptr && mesh.has_uvs();

  std::vector<double> zdepth(np, 0.0);
  parallel_for(size_t(h), [&](size_t yi) {
    int y = static_cast<int>(yi);
    for (int x = 0; x < w; ++x) {
      size_t p = size_t(y) * w + x;
      Ray ray = camera.pixel_ray(x, y);
      Hit hit = bvh.intersect(ray);
      if (!hit) continue;

      vb.mask[p] = 1;
      vb.tri_id[p] = hit.tri;
      Vec3 point = ray.at(hit.t);
      vb.hit[3 * p] = static_cast<float>(point.x);
      vb.hit[3 * p + 1] = static_cast<float>(point.y);
      vb.hit[3 * p + 2] = static_cast<float>(point.z);
      zdepth[p] = hit.t * ray.dir.dot(forward);

      Vec3 n = mesh.triangle_normal(hit.tri).normalized();
      if (n.dot(ray.dir) > 0.0) n = -n;  // orient toward the camera
      vb.normal[3 * p] = static_cast<float>(n.x);
      vb.normal[3 * p + 1] = static_cast<float>(n.y);
      vb.normal[3 * p + 2] = static_cast<float>(n.z);

      const auto& tr = mesh.triangles[hit.tri];
      if (textured) {
        double w0 = 1.0 - hit.u - hit.v;
        const Vec2& a = mesh.uvs[tr[0]];
        const Vec2& b = mesh.uvs[tr[1]];
        const Vec2& c = mesh.uvs[tr[2]];
        double u = w0 * a.u + hit.u * b.u + hit.v * c.u;
        double v = w0 * a.v + hit.u * b.v + hit.v * c.v;
        sample_texture(*texture, u, v, &vb.rgb[3 * p]);
      } else {
        float shade = static_cast<float>(0.7 * std::fabs(n.dot(ray.dir)));
        vb.rgb[3 * p] = vb.rgb[3 * p + 1] = vb.rgb[3 * p + 2] = shade;
      }
    }
  });

  // per-view min-max depth normalization over foreground
  double dmin = 0.0, dmax = 0.0;
  bool first = true;
  for (size_t p = 0; p < np; ++p) {
    if (!vb.mask[p]) continue;
    if (first) {
      dmin = dmax = zdepth[p];
      first = false;
    } else {
      dmin = std::min(dmin, zdepth[p]);
      dmax = std::max(dmax, zdepth[p]);
    }
  }
  double range = dmax - dmin;
  if (!first && range > kConstantDepthEps * std::max(1.0, std::fabs(dmax))) {
    double inv = 1.0 / range;
    for (size_t p = 0; p < np; ++p)
      if (vb.mask[p])
        vb.depth[p] = static_cast<float>((zdepth[p] - dmin) * inv);
  }
  return vb;
}

LabelMap render_label_map(const FaceLabels& labels, const ViewBuffers& view) {
  if (labels.n_classes >= kIgnoreLabel)
    throw std::runtime_error("class count collides with the ignore sentinel");
  LabelMap lm;
  lm.height = view.height;
  lm.width = view.width;
  lm.labels.assign(view.pixel_count(), kIgnoreLabel);
  for (size_t p = 0; p < view.pixel_count(); ++p) {
    int32_t tri = view.tri_id[p];
    if (tri < 0) continue;
    if (tri >= static_cast<int32_t>(labels.labels.size()) ||
        labels.labels[tri] == kUnlabeled)
      throw std::runtime_error("visible triangle " + std::to_string(tri) +
                               " has no label");
    lm.labels[p] = static_cast<uint8_t>(labels.labels[tri]);
  }
  return lm;
}

}  // namespace mvseg
