#pragma once

#include <cstdint>
#include <vector>

#include "gspose/types.hpp"

namespace gspose {

/// Row-major H x W x C image. Rendered values are kept unclamped until
/// export; gradient buffers share the type.
struct ImageBuffer {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<double> data;

  ImageBuffer() = default;
  ImageBuffer(int w, int h, int c = 3, double fill = 0.0)
      : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {}

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  std::size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }
  bool same_shape(const ImageBuffer& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }

  double& at(int x, int y, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  double at(int x, int y, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
};

/// Single-channel H x W float map (alpha, anomaly scores).
struct ScalarMap {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  ScalarMap() = default;
  ScalarMap(int w, int h, double fill = 0.0)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  bool empty() const { return data.empty(); }
  double& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  double at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
};

struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  BinaryMask() = default;
  BinaryMask(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h, 0) {}

  std::uint8_t& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
  std::size_t count() const;
  bool any() const { return count() > 0; }
};

double mse(const ImageBuffer& a, const ImageBuffer& b);
/// Peak signal-to-noise ratio for unit dynamic range.
double psnr(const ImageBuffer& a, const ImageBuffer& b);

ImageBuffer clamp01(const ImageBuffer& img);
ScalarMap to_gray(const ImageBuffer& img);
ScalarMap channel(const ImageBuffer& img, int c);

/// Separable Gaussian blur with clamped borders; kernel radius ceil(3 sigma).
ScalarMap gaussian_blur(const ScalarMap& m, double sigma);
/// Bilinear resample with pixel-center alignment.
ScalarMap resize_bilinear(const ScalarMap& m, int width, int height);
/// Average of box-filtered source pixels; used for downsampling by large
/// factors.
ScalarMap resize_area(const ScalarMap& m, int width, int height);

BinaryMask dilate(const BinaryMask& m, int radius);
BinaryMask erode(const BinaryMask& m, int radius);
/// 3x3 morphological closing (dilate then erode).
BinaryMask close3x3(const BinaryMask& m);

}  // namespace gspose
