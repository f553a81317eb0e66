// Copyright (c) 2026 mvseg contributors
// SPDX-License-Identifier: Apache-2.0

#include "mvseg/camera.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "mvseg/rng.hpp"

namespace mvseg {

void Camera::validate() const {
  if ((look_at - position).norm2() <= 0.0)
    throw std::runtime_error("camera position equals look-at");
  if (!(vfov_deg > 1.0 && vfov_deg < 120.0))
    throw std::runtime_error("camera fov outside (1, 120) degrees");
  if (height < 8 || width < 8)
    throw std::runtime_error("camera image size below 8 pixels");
}

void Camera::frame(Vec3& forward, Vec3& right, Vec3& cam_up) const {
  forward = (look_at - position).normalized();
  Vec3 u = up.normalized();
  if (std::fabs(forward.dot(u)) > 0.999) u = Vec3{1.0, 0.0, 0.0};
  right = forward.cross(u).normalized();
  cam_up = right.cross(forward);
}

Ray Camera::pixel_ray(int x, int y) const {
  Vec3 forward, right, cam_up;
  frame(forward, right, cam_up);
  double half_h = std::tan(vfov_deg * std::numbers::pi / 180.0 * 0.5);
  double half_w = half_h * static_cast<double>(width) / height;
  double u = (2.0 * (x + 0.5) / width - 1.0) * half_w;
  double v = (1.0 - 2.0 * (y + 0.5) / height) * half_h;
  return Ray{position, (forward + right * u + cam_up * v).normalized()};
}

void ViewSamplingConfig::validate() const {
  if (n_views < 1) throw std::runtime_error("n_views must be >= 1");
  if (closeup_fraction < 0.0 || closeup_fraction > 1.0)
    throw std::runtime_error("closeup_fraction outside [0,1]");
  if (radius <= 0.0) throw std::runtime_error("radius must be positive");
  if (!(fov_deg > 1.0 && fov_deg < 120.0))
    throw std::runtime_error("fov outside (1, 120) degrees");
  if (image_size < 8) throw std::runtime_error("image_size below 8");
}

namespace {

Vec3 sample_surface_point(const TriMesh& mesh, const std::vector<double>& cdf,
                          Rng& rng) {
  double r = rng.uniform() * cdf.back();
  size_t t = std::upper_bound(cdf.begin(), cdf.end(), r) - cdf.begin();
  t = std::min(t, cdf.size() - 1);
  const auto& tr = mesh.triangles[t];
  double r1 = std::sqrt(rng.uniform());
  double r2 = rng.uniform();
  return mesh.vertices[tr[0]] * (1.0 - r1) +
         mesh.vertices[tr[1]] * (r1 * (1.0 - r2)) +
         mesh.vertices[tr[2]] * (r1 * r2);
}

}  // namespace

std::vector<Camera> sample_views(const ViewSamplingConfig& config,
                                 const TriMesh* surface) {
  config.validate();
  int n = config.n_views;
  int n_close = static_cast<int>(std::ceil(config.closeup_fraction * n));
  if (n_close > 0 && (surface == nullptr || surface->triangles.empty()))
    throw std::runtime_error("closeup views require a mesh surface");

  std::vector<double> area_cdf;
  if (n_close > 0) {
    area_cdf.resize(surface->triangles.size());
    double acc = 0.0;
    for (size_t t = 0; t < surface->triangles.size(); ++t) {
      acc += surface->triangle_area(static_cast<int>(t));
      area_cdf[t] = acc;
    }
    if (acc <= 0.0) throw std::runtime_error("mesh surface has zero area");
  }

  Rng rng(config.seed);
  constexpr double kGoldenAngle = 2.399963229728653;  // pi * (3 - sqrt(5))
  std::vector<Camera> cameras;
  cameras.reserve(n);
  for (int i = 0; i < n; ++i) {
    // Fibonacci lattice direction, jittered in azimuth/elevation
    double z = 1.0 - 2.0 * (i + 0.5) / n;
    double azimuth = kGoldenAngle * i;
    double elevation = std::asin(std::clamp(z, -1.0, 1.0));
    double jit = config.angle_jitter_deg * std::numbers::pi / 180.0;
    azimuth += rng.uniform(-jit, jit);
    elevation += rng.uniform(-jit, jit);
    elevation = std::clamp(elevation, -1.55, 1.55);  // keep away from poles
    double fov =
        config.fov_deg * (1.0 + rng.uniform(-config.scale_jitter,
                                            config.scale_jitter));
    fov = std::clamp(fov, 1.5, 119.0);
    Vec3 dir{std::cos(elevation) * std::cos(azimuth),
             std::cos(elevation) * std::sin(azimuth), std::sin(elevation)};

    Camera cam;
    cam.vfov_deg = fov;
    cam.height = cam.width = config.image_size;
    bool closeup = i >= n - n_close;
    if (closeup) {
      cam.position = dir * kCloseupRadius;
      cam.look_at = sample_surface_point(*surface, area_cdf, rng);
      if ((cam.look_at - cam.position).norm2() <= 1e-18)
        cam.look_at = Vec3{0.0, 0.0, 0.0};
    } else {
      cam.position = dir * config.radius;
      cam.look_at = Vec3{0.0, 0.0, 0.0};
    }
    cam.validate();
    cameras.push_back(cam);
  }
  return cameras;
}

}  // namespace mvseg
