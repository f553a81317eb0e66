// Copyright (c) 2026 mvseg contributors
// SPDX-License-Identifier: Apache-2.0
//
// Triangle mesh ingestion, normalization and per-triangle label storage.
#pragma once

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mvseg/image.hpp"
#include "mvseg/vec3.hpp"

namespace mvseg {

struct Vec2 {
  double u = 0.0, v = 0.0;
};

/// Surface texture; dimensions >= 1, channels in [0,1].
using Texture = Image;

struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;
  /// Optional per-vertex UVs in [0,1]^2; empty or one per vertex.
  std::vector<Vec2> uvs;
  /// Optional per-triangle texture slot; empty when untextured.
  std::vector<int32_t> tri_tex;

  bool has_uvs() const { return !uvs.empty(); }

  Vec3 triangle_centroid(int t) const {
    const auto& tr = triangles[t];
    return (vertices[tr[0]] + vertices[tr[1]] + vertices[tr[2]]) / 3.0;
  }
  Vec3 triangle_normal(int t) const {  // unnormalized, area-weighted
    const auto& tr = triangles[t];
    return (vertices[tr[1]] - vertices[tr[0]])
        .cross(vertices[tr[2]] - vertices[tr[0]]);
  }
  double triangle_area(int t) const { return 0.5 * triangle_normal(t).norm(); }

  /// Throws std::runtime_error on out-of-range indices or mismatched
  /// optional attribute sizes. If check_degenerate is set, also rejects
  /// triangles with area <= 1e-12 (the post-normalization contract).
  void validate(bool check_degenerate = false) const;
};

constexpr int32_t kUnlabeled = -1;

/// Per-triangle part ids in [0, n_classes); kUnlabeled marks gaps in
/// partial labelings.
struct FaceLabels {
  std::vector<int32_t> labels;
  int n_classes = 0;

  void validate(size_t triangle_count, bool allow_unlabeled = false) const;
};

/// Parses an OBJ file (v/vt/f records, quads and larger faces fan-split).
/// Throws std::runtime_error with a line number on malformed input.
TriMesh load_obj(const std::string& path);

void save_obj(const std::string& path, const TriMesh& mesh);

/// Plain-text labels, one integer per line.
std::vector<int32_t> load_labels_file(const std::string& path);
void save_labels_file(const std::string& path, const std::vector<int32_t>& labels);

/// Loads a mesh and, when labels_path is given, its per-triangle labels.
/// Throws if the label count does not match the triangle count.
std::pair<TriMesh, std::optional<FaceLabels>> load_mesh(
    const std::string& path, const std::optional<std::string>& labels_path = {});

/// Returns a copy that is bounding-box centered at the origin with the
/// farthest vertex at distance exactly 1.
TriMesh normalize(const TriMesh& mesh);

/// Label of the labeled triangle whose centroid is nearest to the query
/// triangle's centroid; ties break to the lowest triangle index.
int32_t nearest_labeled_triangle(const TriMesh& mesh, const FaceLabels& labels,
                                 int query_triangle);

}  // namespace mvseg
