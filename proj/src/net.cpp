// Copyright (c) 2026 mvseg contributors
// SPDX-License-Identifier: Apache-2.0

#include "mvseg/net.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mvseg/binio.hpp"

namespace mvseg {

std::vector<Channel> parse_channels(const std::string& csv) {
  std::vector<Channel> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    // trim surrounding blanks
    size_t b = item.find_first_not_of(" \t");
    size_t e = item.find_last_not_of(" \t");
    if (b == std::string::npos)
      throw std::runtime_error("empty channel name in '" + csv + "'");
    item = item.substr(b, e - b + 1);
    Channel ch;
    if (item == "rgb") ch = Channel::kRgb;
    else if (item == "normal") ch = Channel::kNormal;
    else if (item == "depth") ch = Channel::kDepth;
    else throw std::runtime_error("unknown channel '" + item + "'");
    for (Channel prev : out)
      if (prev == ch)
        throw std::runtime_error("duplicate channel '" + item + "'");
    out.push_back(ch);
  }
  if (out.empty()) throw std::runtime_error("channel list is empty");
  return out;
}

std::string channels_string(const std::vector<Channel>& sel) {
  std::string s;
  for (Channel ch : sel) {
    if (!s.empty()) s += ",";
    switch (ch) {
      case Channel::kRgb: s += "rgb"; break;
      case Channel::kNormal: s += "normal"; break;
      case Channel::kDepth: s += "depth"; break;
    }
  }
  return s;
}

int channel_count(const std::vector<Channel>& sel) {
  int k = 0;
  for (Channel ch : sel) k += ch == Channel::kDepth ? 1 : 3;
  return k;
}

namespace {

template <typename T>
Ptr<T> he_conv_param(Rng& rng, const std::string& name, int co, int ci, int k) {
  Tensor<T> w({co, ci, k, k});
  double limit = std::sqrt(6.0 / (double(ci) * k * k));
  for (auto& x : w.v) x = static_cast<T>(rng.uniform(-limit, limit));
  return parameter(std::move(w), name);
}

template <typename T>
Ptr<T> zero_bias(const std::string& name, int co) {
  return parameter(Tensor<T>({co}), name);
}

}  // namespace

template <typename T>
EmbedNet<T> EmbedNet<T>::create(int in_channels, int embed_dim,
                                uint64_t seed) {
  if (in_channels <= 0 || embed_dim <= 0)
    throw std::runtime_error("EmbedNet: channels and embed dim must be > 0");
  EmbedNet<T> net;
  net.in_channels = in_channels;
  net.embed_dim = embed_dim;
  Rng rng(seed);
  const int widths[6] = {in_channels, 32, 64, 64, 32, embed_dim};
  for (int i = 0; i < 5; ++i) {
    std::string base = "embed.conv" + std::to_string(i + 1);
    net.params.push_back(
        he_conv_param<T>(rng, base + ".weight", widths[i + 1], widths[i], 3));
    net.params.push_back(zero_bias<T>(base + ".bias", widths[i + 1]));
  }
  return net;
}

template <typename T>
Ptr<T> EmbedNet<T>::forward(const Ptr<T>& x) const {
  if (x->value.shape.size() != 4 || x->value.dim(1) != in_channels)
    throw std::runtime_error("EmbedNet: input shape " + x->value.shape_str() +
                             " does not match " +
                             std::to_string(in_channels) + " input channels");
  if (x->value.dim(2) % 2 != 0 || x->value.dim(3) % 2 != 0)
    throw std::runtime_error("EmbedNet: H and W must be even, got " +
                             x->value.shape_str());
  auto h1 = relu(conv2d(x, params[0], params[1], 1));
  auto h2 = relu(conv2d(h1, params[2], params[3], 2));
  auto h3 = relu(conv2d(h2, params[4], params[5], 1));
  auto up = upsample2x_bilinear(h3);
  auto h4 = relu(conv2d(up, params[6], params[7], 1));
  return conv2d(h4, params[8], params[9], 1);
}

template <typename T>
SegHead<T> SegHead<T>::create(int embed_dim, int n_classes, uint64_t seed) {
  if (embed_dim <= 0 || n_classes <= 0)
    throw std::runtime_error("SegHead: dims must be > 0");
  SegHead<T> head;
  head.embed_dim = embed_dim;
  head.n_classes = n_classes;
  Rng rng(seed);
  head.params.push_back(
      he_conv_param<T>(rng, "head.conv.weight", n_classes, embed_dim, 1));
  head.params.push_back(zero_bias<T>("head.conv.bias", n_classes));
  return head;
}

template <typename T>
Ptr<T> SegHead<T>::forward(const Ptr<T>& embed) const {
  return softmax_channels(conv2d(embed, params[0], params[1], 1));
}

template struct EmbedNet<float>;
template struct EmbedNet<double>;
template struct SegHead<float>;
template struct SegHead<double>;

// ---------------------------------------------------------------------------
// checkpoints

namespace {
constexpr char kCkptMagic[8] = {'M', 'V', 'D', 'C', 'K', 'P', 'T', '1'};
}

void save_checkpoint(const std::string& path, const TensorMap& tensors) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for write: " + tmp);
    out.write(kCkptMagic, sizeof kCkptMagic);
    binio::write_pod<uint32_t>(out, static_cast<uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
      binio::write_str(out, name);
      binio::write_pod<uint32_t>(out, static_cast<uint32_t>(t.shape.size()));
      for (int d : t.shape) binio::write_pod<int32_t>(out, d);
      binio::write_array(out, t.v.data(), t.v.size());
    }
    if (!out) throw std::runtime_error("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

TensorMap load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kCkptMagic, sizeof kCkptMagic) != 0)
    throw std::runtime_error("bad checkpoint magic: " + path);
  uint32_t count = binio::read_pod<uint32_t>(in, "tensor count");
  TensorMap out;
  for (uint32_t i = 0; i < count; ++i) {
    std::string name = binio::read_str(in, "tensor name");
    uint32_t ndim = binio::read_pod<uint32_t>(in, name.c_str());
    if (ndim == 0 || ndim > 4)
      throw std::runtime_error("checkpoint " + path + ": tensor '" + name +
                               "' has invalid rank " + std::to_string(ndim));
    std::vector<int> shape(ndim);
    for (auto& d : shape) {
      d = binio::read_pod<int32_t>(in, name.c_str());
      if (d <= 0 || d > (1 << 24))
        throw std::runtime_error("checkpoint " + path + ": tensor '" + name +
                                 "' has invalid dim " + std::to_string(d));
    }
    Tensor<float> t(shape);
    binio::read_array(in, t.v.data(), t.v.size(), name.c_str());
    if (!out.emplace(std::move(name), std::move(t)).second)
      throw std::runtime_error("checkpoint " + path + ": duplicate tensor");
  }
  return out;
}

TensorMap snapshot_params(const std::vector<Ptr<float>>& params) {
  TensorMap out;
  for (const auto& p : params) {
    if (p->name.empty())
      throw std::runtime_error("snapshot_params: unnamed parameter");
    out.emplace(p->name, p->value);
  }
  return out;
}

void assign_params(const TensorMap& tensors,
                   const std::vector<Ptr<float>>& params,
                   const std::string& source) {
  for (const auto& p : params) {
    auto it = tensors.find(p->name);
    if (it == tensors.end())
      throw std::runtime_error(source + ": missing tensor '" + p->name + "'");
    if (!it->second.same_shape(p->value))
      throw std::runtime_error(source + ": tensor '" + p->name +
                               "' has shape " + it->second.shape_str() +
                               " but " + p->value.shape_str() + " expected");
    p->value = it->second;
  }
}

}  // namespace mvseg
