// Copyright (c) 2026 mvseg contributors
// SPDX-License-Identifier: Apache-2.0
//
// Ray-traced multi-channel view generation. Every buffer a view produces is
// pixel-exact: tri_id and hit come straight from the nearest intersection,
// which is what correspondence building and label back-projection rely on.
#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mvseg/bvh.hpp"
#include "mvseg/camera.hpp"
#include "mvseg/mesh.hpp"

namespace mvseg {

/// One rendered view. All float channels are 0 on background; depth is
/// z-depth, min-max normalized over this view's foreground (all 0 when the
/// view has constant depth).
struct ViewBuffers {
  int height = 0;
  int width = 0;
  std::vector<float> rgb;      // H*W*3, [0,1]
  std::vector<float> normal;   // H*W*3, unit, global coords, toward camera
  std::vector<float> depth;    // H*W, [0,1]
  std::vector<int32_t> tri_id; // H*W, -1 on background
  std::vector<float> hit;      // H*W*3, world-space hit points
  std::vector<uint8_t> mask;   // H*W, 1 = foreground

  size_t pixel_count() const { return size_t(height) * width; }
  size_t foreground_count() const;
  bool is_foreground(size_t p) const { return mask[p] != 0; }
  Vec3 hit_point(size_t p) const {
    return {hit[3 * p], hit[3 * p + 1], hit[3 * p + 2]};
  }
};

/// Per-pixel class ids; 255 marks background ("ignore").
constexpr uint8_t kIgnoreLabel = 255;
struct LabelMap {
  int height = 0;
  int width = 0;
  std::vector<uint8_t> labels;
};

/// Renders one view of a normalized mesh. RGB is a bilinear texture lookup
/// through barycentric UVs when both UVs and a texture exist, otherwise flat
/// gray 0.7 shaded by |n . view_dir|.
ViewBuffers render_view(const TriMesh& mesh, const Bvh& bvh,
                        const Texture* texture, const Camera& camera);

/// Projects per-triangle labels through a view's tri_id buffer. Throws if a
/// visible triangle is unlabeled.
LabelMap render_label_map(const FaceLabels& labels, const ViewBuffers& view);

}  // namespace mvseg
