// Copyright (c) 2026 mvseg contributors
// SPDX-License-Identifier: Apache-2.0

#include "mvseg/view_io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "mvseg/binio.hpp"

namespace mvseg {
namespace {

constexpr char kMagic[5] = {'M', 'V', 'D', 'C', '1'};

struct ChannelDesc {
  const char* name;
  uint32_t components;
};
// Fixed layout; loaders reject records whose channel list deviates.
constexpr ChannelDesc kChannels[] = {
    {"rgb", 3}, {"normal", 3}, {"depth", 1}, {"hit", 3}};

const std::vector<float>& channel_ref(const ViewBuffers& v, size_t idx) {
  switch (idx) {
    case 0: return v.rgb;
    case 1: return v.normal;
    case 2: return v.depth;
    default: return v.hit;
  }
}

std::vector<float>& channel_ref(ViewBuffers& v, size_t idx) {
  return const_cast<std::vector<float>&>(
      channel_ref(static_cast<const ViewBuffers&>(v), idx));
}

}  // namespace

void save_view(const std::string& path, const ViewBuffers& view) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for write: " + tmp);
    out.write(kMagic, sizeof kMagic);
    binio::write_pod<uint32_t>(out, static_cast<uint32_t>(view.height));
    binio::write_pod<uint32_t>(out, static_cast<uint32_t>(view.width));
    binio::write_pod<uint32_t>(out, std::size(kChannels));
    for (const auto& ch : kChannels) {
      binio::write_str(out, ch.name);
      binio::write_pod<uint32_t>(out, ch.components);
    }
    size_t np = view.pixel_count();
    for (size_t i = 0; i < std::size(kChannels); ++i) {
      const auto& data = channel_ref(view, i);
      if (data.size() != np * kChannels[i].components)
        throw std::runtime_error(std::string("channel size mismatch: ") +
                                 kChannels[i].name);
      binio::write_array(out, data.data(), data.size());
    }
    binio::write_array(out, view.tri_id.data(), view.tri_id.size());
    if (!out) throw std::runtime_error("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

ViewBuffers load_view(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open view record: " + path);
  char magic[5];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw std::runtime_error("bad view record magic: " + path);

  ViewBuffers v;
  v.height = static_cast<int>(binio::read_pod<uint32_t>(in, "height"));
  v.width = static_cast<int>(binio::read_pod<uint32_t>(in, "width"));
  if (v.height <= 0 || v.width <= 0 || v.height > 1 << 14 || v.width > 1 << 14)
    throw std::runtime_error("implausible view dimensions: " + path);
  uint32_t nch = binio::read_pod<uint32_t>(in, "channel count");
  if (nch != std::size(kChannels))
    throw std::runtime_error("unexpected channel count in " + path);
  for (size_t i = 0; i < std::size(kChannels); ++i) {
    std::string name = binio::read_str(in, "channel name");
    uint32_t comp = binio::read_pod<uint32_t>(in, "channel components");
    if (name != kChannels[i].name || comp != kChannels[i].components)
      throw std::runtime_error("unexpected channel '" + name + "' in " + path);
  }
  size_t np = v.pixel_count();
  for (size_t i = 0; i < std::size(kChannels); ++i) {
    auto& data = channel_ref(v, i);
    data.resize(np * kChannels[i].components);
    binio::read_array(in, data.data(), data.size(), kChannels[i].name);
  }
  v.tri_id.resize(np);
  binio::read_array(in, v.tri_id.data(), np, "tri_id");
  v.mask.resize(np);
  for (size_t p = 0; p < np; ++p) v.mask[p] = v.tri_id[p] >= 0 ? 1 : 0;
  return v;
}

std::string view_stem(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "view_%03d", index);
  return buf;
}

}  // namespace mvseg
