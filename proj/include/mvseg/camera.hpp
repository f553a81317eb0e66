// Copyright (c) 2026 mvseg contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "mvseg/bvh.hpp"
#include "mvseg/mesh.hpp"
#include "mvseg/vec3.hpp"

namespace mvseg {

/// Pinhole camera. One primary ray per pixel, through the pixel center.
struct Camera {
  Vec3 position;
  Vec3 look_at;
  Vec3 up{0.0, 0.0, 1.0};
  double vfov_deg = 60.0;
  int height = 128;
  int width = 128;

  void validate() const;

  /// Orthonormal frame; falls back to a fixed alternate up when the view
  /// direction is (nearly) parallel to `up`.
  void frame(Vec3& forward, Vec3& right, Vec3& cam_up) const;

  Ray pixel_ray(int x, int y) const;
};

struct ViewSamplingConfig {
  int n_views = 90;
  double radius = 2.0;
  double fov_deg = 60.0;
  double angle_jitter_deg = 10.0;  // uniform in +-angle_jitter_deg
  double scale_jitter = 0.10;      // relative fov jitter, uniform in +-10%
  double closeup_fraction = 0.10;  // tail of the list, radius 0.8
  int image_size = 128;
  uint64_t seed = 0;

  void validate() const;
};

/// Camera distance for closeup views aimed at sampled surface points.
constexpr double kCloseupRadius = 0.8;

/// Deterministic view sampling: a Fibonacci-sphere lattice of n_views
/// directions with per-view angle/fov jitter; the last
/// ceil(closeup_fraction * n_views) cameras sit at kCloseupRadius and look at
/// surface points sampled uniformly by area (mesh required for those).
std::vector<Camera> sample_views(const ViewSamplingConfig& config,
                                 const TriMesh* surface = nullptr);

}  // namespace mvseg
