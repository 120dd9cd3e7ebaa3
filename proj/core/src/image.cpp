#include "gspose/image.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gspose/error.hpp"

namespace gspose {

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count_if(data.begin(), data.end(), [](auto v) { return v != 0; }));
}

double mse(const ImageBuffer& a, const ImageBuffer& b) {
  if (!a.same_shape(b)) throw Error(ErrorCode::ShapeMismatch, "mse: image shapes differ");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.data.size());
}

double psnr(const ImageBuffer& a, const ImageBuffer& b) {
  const double m = mse(a, b);
  if (m <= 0.0) return std::numeric_limits<double>::infinity();
  return -10.0 * std::log10(m);
}

ImageBuffer clamp01(const ImageBuffer& img) {
  ImageBuffer out = img;
  for (auto& v : out.data) v = std::clamp(v, 0.0, 1.0);
  return out;
}

ScalarMap to_gray(const ImageBuffer& img) {
  ScalarMap out(img.width, img.height);
  for (std::size_t p = 0; p < img.pixel_count(); ++p) {
    if (img.channels >= 3) {
      const double* px = &img.data[p * img.channels];
      out.data[p] = 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
    } else {
      out.data[p] = img.data[p * img.channels];
    }
  }
  return out;
}

ScalarMap channel(const ImageBuffer& img, int c) {
  ScalarMap out(img.width, img.height);
  for (std::size_t p = 0; p < img.pixel_count(); ++p) out.data[p] = img.data[p * img.channels + c];
  return out;
}

namespace {

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[i + radius];
  }
  for (auto& v : k) v /= sum;
  return k;
}

}  // namespace

ScalarMap gaussian_blur(const ScalarMap& m, double sigma) {
  if (sigma <= 0.0) return m;
  const auto k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  ScalarMap tmp(m.width, m.height), out(m.width, m.height);
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * m.at(std::clamp(x + i, 0, m.width - 1), y);
      tmp.at(x, y) = acc;
    }
  }
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * tmp.at(x, std::clamp(y + i, 0, m.height - 1));
      out.at(x, y) = acc;
    }
  }
  return out;
}

ScalarMap resize_bilinear(const ScalarMap& m, int width, int height) {
  ScalarMap out(width, height);
  const double sx = static_cast<double>(m.width) / width;
  const double sy = static_cast<double>(m.height) / height;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(m.height - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, m.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(m.width - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, m.width - 1);
      const double wx = fx - x0;
      out.at(x, y) = (1 - wy) * ((1 - wx) * m.at(x0, y0) + wx * m.at(x1, y0)) +
                     wy * ((1 - wx) * m.at(x0, y1) + wx * m.at(x1, y1));
    }
  }
  return out;
}

ScalarMap resize_area(const ScalarMap& m, int width, int height) {
  ScalarMap out(width, height);
  const double sx = static_cast<double>(m.width) / width;
  const double sy = static_cast<double>(m.height) / height;
  for (int y = 0; y < height; ++y) {
    const double y0 = y * sy, y1 = (y + 1) * sy;
    for (int x = 0; x < width; ++x) {
      const double x0 = x * sx, x1 = (x + 1) * sx;
      double acc = 0.0, wsum = 0.0;
      for (int yy = static_cast<int>(y0); yy < std::min(m.height, static_cast<int>(std::ceil(y1))); ++yy) {
        const double wy = std::min<double>(yy + 1, y1) - std::max<double>(yy, y0);
        if (wy <= 0) continue;
        for (int xx = static_cast<int>(x0); xx < std::min(m.width, static_cast<int>(std::ceil(x1))); ++xx) {
          const double wx = std::min<double>(xx + 1, x1) - std::max<double>(xx, x0);
          if (wx <= 0) continue;
          acc += wx * wy * m.at(xx, yy);
          wsum += wx * wy;
        }
      }
      out.at(x, y) = wsum > 0 ? acc / wsum : 0.0;
    }
  }
  return out;
}

namespace {

BinaryMask morph(const BinaryMask& m, int radius, bool dilation) {
  BinaryMask out(m.width, m.height);
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      bool hit = !dilation;
      for (int dy = -radius; dy <= radius && hit != dilation; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
          const int xx = x + dx, yy = y + dy;
          // Outside pixels count as background for dilation and foreground
          // for erosion so closing never eats masks touching the border.
          const bool v = (xx < 0 || yy < 0 || xx >= m.width || yy >= m.height) ? !dilation
                                                                                : m.at(xx, yy) != 0;
          if (dilation && v) {
            hit = true;
            break;
          }
          if (!dilation && !v) {
            hit = false;
            break;
          }
        }
      }
      out.at(x, y) = hit ? 1 : 0;
    }
  }
  return out;
}

}  // namespace

BinaryMask dilate(const BinaryMask& m, int radius) { return morph(m, radius, true); }
BinaryMask erode(const BinaryMask& m, int radius) { return morph(m, radius, false); }
BinaryMask close3x3(const BinaryMask& m) { return erode(dilate(m, 1), 1); }

}  // namespace gspose
