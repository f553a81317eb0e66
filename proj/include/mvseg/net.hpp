// Copyright (c) 2026 mvseg contributors
// SPDX-License-Identifier: Apache-2.0
//
// The pixel-embedding network Phi and segmentation head Theta, plus Adam and
// checkpoint I/O. Phi is a small fully-convolutional stack:
//
//   conv3x3(K->32) relu  conv3x3/s2(32->64) relu  conv3x3(64->64) relu
//   bilinear-up x2  conv3x3(64->32) relu  conv3x3(32->D)
//
// followed by per-pixel L2 normalization at the point of use. Spatial output
// size equals input size for even H,W. Theta is a 1x1 conv D->|C| with a
// per-pixel softmax.
#pragma once

#include <map>
#include <string>
#include <vector>

#include "mvseg/autodiff.hpp"
#include "mvseg/render.hpp"
#include "mvseg/rng.hpp"

namespace mvseg {

// ---------------------------------------------------------------------------
// input assembly

enum class Channel { kRgb, kNormal, kDepth };

/// Parses "rgb,normal,depth"-style lists; order defines input channel order.
/// Throws on unknown or duplicate names.
std::vector<Channel> parse_channels(const std::string& csv);
std::string channels_string(const std::vector<Channel>& sel);
int channel_count(const std::vector<Channel>& sel);

/// Stacks the selected view channels into a (1,K,H,W) tensor.
template <typename T>
Tensor<T> make_input(const ViewBuffers& view,
                     const std::vector<Channel>& sel) {
  int k = channel_count(sel);
  Tensor<T> x({1, k, view.height, view.width});
  size_t hw = view.pixel_count();
  size_t off = 0;
  for (Channel ch : sel) {
    const std::vector<float>* src = nullptr;
    size_t comp = 0;
    switch (ch) {
      case Channel::kRgb: src = &view.rgb; comp = 3; break;
      case Channel::kNormal: src = &view.normal; comp = 3; break;
      case Channel::kDepth: src = &view.depth; comp = 1; break;
    }
    // view buffers are pixel-interleaved, tensors are planar
    for (size_t c = 0; c < comp; ++c)
      for (size_t p = 0; p < hw; ++p)
        x.v[(off + c) * hw + p] = static_cast<T>((*src)[p * comp + c]);
    off += comp;
  }
  return x;
}

// ---------------------------------------------------------------------------
// networks

template <typename T>
struct EmbedNet {
  int in_channels = 0;
  int embed_dim = 0;
  std::vector<Ptr<T>> params;  // convN.weight, convN.bias for N = 1..5

  /// Seeded He-uniform weight init, zero biases.
  static EmbedNet create(int in_channels, int embed_dim, uint64_t seed);

  /// Pre-normalization embeddings, (N,D,H,W). H and W must be even (the
  /// stride-2 / upsample pair must round-trip the spatial size).
  Ptr<T> forward(const Ptr<T>& x) const;
};

template <typename T>
struct SegHead {
  int embed_dim = 0;
  int n_classes = 0;
  std::vector<Ptr<T>> params;  // conv.weight, conv.bias

  static SegHead create(int embed_dim, int n_classes, uint64_t seed);

  /// Per-pixel class probabilities, (N,|C|,H,W), rows summing to 1.
  Ptr<T> forward(const Ptr<T>& embed) const;
};

/// Unit-norm per-pixel embeddings for one view: assembles the selected
/// channels, runs Phi, L2-normalizes. `valid_out` (optional) flags pixels
/// that survived the zero-norm guard. Throws when the channel selection does
/// not match the net's input width.
template <typename T>
Ptr<T> forward_embed(const EmbedNet<T>& net, const ViewBuffers& view,
                     const std::vector<Channel>& sel,
                     std::shared_ptr<std::vector<uint8_t>>* valid_out = nullptr) {
  if (channel_count(sel) != net.in_channels)
    throw std::runtime_error(
        "forward_embed: channel selection provides " +
        std::to_string(channel_count(sel)) + " channels, net expects " +
        std::to_string(net.in_channels));
  auto x = constant(make_input<T>(view, sel));
  return l2_normalize_channels(net.forward(x), valid_out);
}

// ---------------------------------------------------------------------------
// optimizer

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamState {
  std::vector<Tensor<T>> m, v;  // parallel to the param list
  int64_t step = 0;

  explicit AdamState(const std::vector<Ptr<T>>& params) {
    for (const auto& p : params) {
      m.emplace_back(p->value.shape);
      v.emplace_back(p->value.shape);
    }
  }
};

/// One bias-corrected Adam update. Params with no gradient (loss never
/// touched them) are treated as zero-gradient. Throws on shape mismatch.
template <typename T>
void adam_step(AdamState<T>& st, const std::vector<Ptr<T>>& params,
               const AdamConfig& cfg) {
  if (st.m.size() != params.size())
    throw std::runtime_error("adam_step: state/param count mismatch");
  ++st.step;
  T bc1 = static_cast<T>(1.0 - std::pow(cfg.beta1, double(st.step)));
  T bc2 = static_cast<T>(1.0 - std::pow(cfg.beta2, double(st.step)));
  T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
  T lr = static_cast<T>(cfg.lr), eps = static_cast<T>(cfg.eps);
  for (size_t i = 0; i < params.size(); ++i) {
    Node<T>& p = *params[i];
    if (!st.m[i].same_shape(p.value))
      throw std::runtime_error("adam_step: state shape mismatch for '" +
                               p.name + "'");
    p.ensure_grad();
    if (!p.grad.same_shape(p.value))
      throw std::runtime_error("adam_step: gradient shape mismatch for '" +
                               p.name + "'");
    T* m = st.m[i].v.data();
    T* v = st.v[i].v.data();
    T* w = p.value.v.data();
    const T* g = p.grad.v.data();
    for (size_t j = 0; j < p.value.size(); ++j) {
      m[j] = b1 * m[j] + (1 - b1) * g[j];
      v[j] = b2 * v[j] + (1 - b2) * g[j] * g[j];
      T mhat = m[j] / bc1;
      T vhat = v[j] / bc2;
      w[j] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

// ---------------------------------------------------------------------------
// checkpoints: magic "MVDCKPT1", u32 count, then per tensor
// { str name, u32 ndim, i32 dims[ndim], f32 data }. Sorted by name.

using TensorMap = std::map<std::string, Tensor<float>>;

/// Atomic write (temp + rename).
void save_checkpoint(const std::string& path, const TensorMap& tensors);
TensorMap load_checkpoint(const std::string& path);

/// Snapshot of live parameters keyed by node name.
TensorMap snapshot_params(const std::vector<Ptr<float>>& params);

/// Copies map entries into the named parameter nodes. Every param must be
/// present with a matching shape; extra map entries are ignored. Errors name
/// the offending tensor.
void assign_params(const TensorMap& tensors,
                   const std::vector<Ptr<float>>& params,
                   const std::string& source);

extern template struct EmbedNet<float>;
extern template struct EmbedNet<double>;
extern template struct SegHead<float>;
extern template struct SegHead<double>;

}  // namespace mvseg
