// Copyright (c) 2026 mvseg contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mvseg {

/// RGB image with float channels in [0,1], row-major, y down.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<float> pixels;  // height*width*3

  Image() = default;
  Image(int w, int h) : width(w), height(h), pixels(size_t(w) * h * 3, 0.0f) {}

  float* at(int x, int y) { return pixels.data() + (size_t(y) * width + x) * 3; }
  const float* at(int x, int y) const {
    return pixels.data() + (size_t(y) * width + x) * 3;
  }
};

/// Reads a PNG (gray, gray+alpha, RGB or RGBA; 8 or 16 bit) as float RGB.
Image read_png(const std::string& path);

/// Writes float RGB as 8-bit PNG. Values are clamped to [0,1].
void write_png(const std::string& path, const Image& img);

}  // namespace mvseg
