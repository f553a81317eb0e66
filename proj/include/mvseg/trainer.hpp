// Copyright (c) 2026 mvseg contributors
// SPDX-License-Identifier: Apache-2.0
//
// Training loops: self-supervised pre-training of Phi over unlabeled view
// pairs, and few-shot fine-tuning of (Phi, Theta) with the lambda-weighted
// InfoNCE regularizer. Everything is deterministic given (seed, config,
// dataset): per-iteration Rng streams are derived with mix_seed, so a rerun
// replays the same shapes, view pairs, pixel pairs, and updates.
#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mvseg/dataset.hpp"
#include "mvseg/losses.hpp"
#include "mvseg/net.hpp"

namespace mvseg {

struct FewShotProtocol {
  int k = 1;       // labeled shapes
  int v = 0;       // labeled views per shape; 0 = all
  uint64_t seed = 0;

  void validate() const;
};

struct TrainConfig {
  int batch_size = 8;
  int iterations = 2000;
  double lr = 0.001;
  // pretrain schedule: halve lr when the mean loss over the last
  // plateau_window iterations improves less than plateau_threshold
  // (relative) over the window before it
  int plateau_window = 200;
  double plateau_threshold = 0.01;
  // finetune schedule: lr * lr_decay^(iter / lr_decay_every)
  double lr_decay = 0.99;
  int lr_decay_every = 40;
  LossConfig loss;
  std::vector<Channel> channels{Channel::kRgb, Channel::kDepth};
  int image_size = 128;  // loaded views must match
  int embed_dim = 16;
  double match_eps = kDefaultMatchEps;
  double min_overlap = 0.15;
  int ssl_batch = 2;  // regularizer view pairs per finetune iteration
  int checkpoint_every = 500;
  uint64_t seed = 0;

  void validate() const;
};

struct IterRecord {
  int iteration = 0;
  double loss = 0, sl = 0, ssl = 0, lr = 0;
};

struct TrainResult {
  std::vector<IterRecord> curve;
  std::vector<std::string> protocol_shapes;  // finetune: the k selected ids
};

/// View pairs (i < j) of one shape whose overlap reaches min_overlap.
std::vector<std::pair<int, int>> eligible_view_pairs(const ShapeEntry& shape,
                                                     ViewCache& cache,
                                                     double eps,
                                                     double min_overlap);

/// The k labeled-split shape indices drawn by the protocol seed (ascending).
std::vector<size_t> select_protocol_shapes(const Dataset& ds,
                                           const FewShotProtocol& protocol);

/// The views of one labeled shape that may appear in supervised batches
/// (ascending). v = 0 selects all.
std::vector<int> select_protocol_views(const ShapeEntry& shape,
                                       const FewShotProtocol& protocol,
                                       uint64_t stream);

/// Eq. 1 loop. Writes the checkpoint (also every checkpoint_every iterations)
/// and a loss curve CSV "iteration,loss,lr". iterations = 0 stores the
/// initialization unchanged.
TrainResult pretrain(const Dataset& ds, const TrainConfig& cfg,
                     const std::string& out_checkpoint,
                     const std::string& curve_csv);

/// Eq. 3 loop over the protocol's k shapes / v views. init_checkpoint (when
/// given) must hold the embed.* tensors; head.* tensors are adopted when
/// present. Writes a Phi+Theta checkpoint and a curve CSV
/// "iteration,loss,sl,ssl,lr".
TrainResult finetune(const Dataset& ds, const FewShotProtocol& protocol,
                     const std::optional<std::string>& init_checkpoint,
                     const TrainConfig& cfg, const std::string& out_checkpoint,
                     const std::string& curve_csv);

}  // namespace mvseg
