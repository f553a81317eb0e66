// Copyright (c) 2026 mvseg contributors
// SPDX-License-Identifier: Apache-2.0
//
// Procedural labeled-shape generator. Two families with positionally
// consistent part ids:
//
//   furniture (untextured; geometry carries part identity)
//     0 top, 1 legs, 2 back, 3 stretcher, 4 apron, 5 shelf, 6 armrest, 7 knob
//   figure (textured humanoid; each part id paints a fixed pattern type, so
//   texture carries part identity)
//     0 head, 1 torso, 2 arms, 3 legs, 4 hands, 5 feet, 6 hat, 7 belt
//
// A shape with n parts contains exactly ids 0..n-1. Furniture shapes carry
// no UVs or texture and render through the grayscale shading path; figure
// shapes get a 256x256 atlas with one tile per part.
#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "mvseg/mesh.hpp"

namespace mvseg {

enum class Family { kFurniture, kFigure };

Family parse_family(const std::string& name);  // "furniture" | "figure"
std::string family_name(Family f);

struct SynthSpec {
  Family family = Family::kFurniture;
  int min_parts = 4;  // the four mandatory parts
  int max_parts = 8;
  double pose_jitter = 0.10;   // relative placement jitter
  double scale_jitter = 0.20;  // relative size jitter
  int texture_size = 256;

  void validate() const;
};

struct GeneratedShape {
  TriMesh mesh;  // normalized
  FaceLabels labels;
  std::optional<Texture> texture;  // figure family only
};

/// Deterministic per seed; the mesh passes validate(true) and every triangle
/// carries a part id.
GeneratedShape generate_shape(const SynthSpec& spec, uint64_t seed);

struct SplitCounts {
  int n_unlabeled = 0;
  int n_labeled = 0;
  int n_test = 0;
};

/// Writes n_shapes shape directories plus manifest.json under out_dir.
/// Labeled-split shapes are rejection-sampled until they contain every part
/// id the family is configured to use, so few-shot training sees all
/// classes. Layout per shape: mesh.obj, labels.txt, texture.png (figures).
void generate_dataset(const SynthSpec& spec, int n_shapes,
                      const SplitCounts& split, uint64_t seed,
                      const std::string& out_dir);

}  // namespace mvseg
