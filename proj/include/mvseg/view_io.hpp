// Copyright (c) 2026 mvseg contributors
// SPDX-License-Identifier: Apache-2.0
//
// On-disk view cache. One binary record per rendered view:
//
//   magic "MVDC1"
//   u32 height, u32 width, u32 n_channels
//   n_channels x { str name, u32 components }   (f32 channels, in file order)
//   f32 data per listed channel, row-major, H*W*components each
//   i32 tri_id, H*W
//
// The foreground mask is not stored; it is tri_id >= 0. Alongside each
// record the render stage writes a PNG preview of the RGB channel.
#pragma once

#include <string>

#include "mvseg/render.hpp"

namespace mvseg {

/// Writes a view record atomically (temp file + rename).
void save_view(const std::string& path, const ViewBuffers& view);

/// Throws std::runtime_error on bad magic, truncation, or an unexpected
/// channel layout.
ViewBuffers load_view(const std::string& path);

/// "view_000", "view_001", ... stem used by the render stage and dataset.
std::string view_stem(int index);

}  // namespace mvseg
