// Copyright (c) 2026 mvseg contributors
// SPDX-License-Identifier: Apache-2.0
//
// In-process pipeline stages behind the CLI subcommands. Every stage is
// deterministic given its config and inputs, writes a provenance manifest
// next to its artifacts (config hash + seeds, no timestamps), and is
// idempotent: re-running with identical inputs reproduces identical bytes.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mvseg/aggregate.hpp"
#include "mvseg/config.hpp"
#include "mvseg/dataset.hpp"
#include "mvseg/net.hpp"

namespace mvseg {

inline constexpr const char* kVersion = "mvseg 0.1.0";

/// Generates the synthetic dataset into out_dir.
void stage_synth(const Config& cfg, const std::string& out_dir);

/// Renders every manifest shape into render_dir/<shape_id>/view_NNN.mvdc.
/// Each shape dir carries a render.json stamp of the sampling parameters;
/// cached views are reused only under an identical stamp (camera placement
/// depends on all of them), otherwise the shape is re-rendered from scratch.
void stage_render(const Config& cfg, const std::string& data_dir,
                  const std::string& render_dir);

/// Pre-trains Phi on the unlabeled split. Writes out_checkpoint plus a
/// "<out_checkpoint minus extension>_curve.csv" loss curve.
void stage_pretrain(const Config& cfg, const std::string& data_dir,
                    const std::string& render_dir,
                    const std::string& out_checkpoint);

/// Fine-tunes (Phi, Theta) per the config's protocol.
void stage_finetune(const Config& cfg, const std::string& data_dir,
                    const std::string& render_dir,
                    const std::optional<std::string>& init_checkpoint,
                    const std::string& out_checkpoint);

/// Runs the segmentation head over all test views, aggregates with
/// entropy-weighted voting, fills occluded triangles, and writes
/// pred_dir/<shape_id>.txt label files.
void stage_infer(const Config& cfg, const std::string& data_dir,
                 const std::string& render_dir, const std::string& checkpoint,
                 const std::string& pred_dir);

/// Scores one or more prediction dirs (one per run/seed) against the test
/// split and writes the mean/std report CSV. Returns per-run mIoU in
/// pred_dirs order.
std::vector<double> stage_eval(const Config& cfg, const std::string& data_dir,
                               const std::vector<std::string>& pred_dirs,
                               const std::string& out_csv);

// Shared helpers (also used by tests and the acceptance suite).

/// Per-pixel class probabilities of one view under a trained (Phi, Theta).
ProbMap predict_view(const EmbedNet<float>& phi, const SegHead<float>& head,
                     const ViewBuffers& view,
                     const std::vector<Channel>& channels);

/// Aggregated + filled labels for one test shape.
FaceLabels infer_shape(const ShapeEntry& shape, const TriMesh& mesh,
                       ViewCache& cache, const EmbedNet<float>& phi,
                       const SegHead<float>& head,
                       const std::vector<Channel>& channels, double gamma);

}  // namespace mvseg
