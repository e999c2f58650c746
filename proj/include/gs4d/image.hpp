#pragma once

#include <string>
#include <vector>

#include "gs4d/types.hpp"

namespace gs4d {

// RGB image with real-valued pixels in [0,1], row-major.
struct Image {
  int width = 0, height = 0;
  std::vector<double> data;  // size width*height*3

  Image() = default;
  Image(int w, int h) : width(w), height(h), data(static_cast<size_t>(w) * h * 3, 0.0) {}

  double& at(int x, int y, int c) { return data[(static_cast<size_t>(y) * width + x) * 3 + c]; }
  double at(int x, int y, int c) const {
    return data[(static_cast<size_t>(y) * width + x) * 3 + c];
  }
};

// Peak signal-to-noise ratio over unit-range pixels; identical images report
// the 99 dB sentinel.
double psnr(const Image& a, const Image& b);

// 8-bit PNG, linear <-> 8-bit scaling only.
void write_png(const std::string& path, const Image& image);
Image read_png(const std::string& path);

// Lossless raw float32 container ("GSRW"), for test fixtures and supervision.
void write_raw_image(const std::string& path, const Image& image);
Image read_raw_image(const std::string& path);

}  // namespace gs4d
