#include "plot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gspose/io.hpp"

namespace gspose::cli {

namespace {

struct Canvas {
  ImageBuffer img;
  void set(int x, int y, const Vec3& c) {
    if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
    for (int k = 0; k < 3; ++k) img.at(x, y, k) = c[k];
  }
  void line(int x0, int y0, int x1, int y1, const Vec3& c) {
    const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    for (;;) {
      set(x0, y0, c);
      if (x0 == x1 && y0 == y1) break;
      const int e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        x0 += sx;
      }
      if (e2 <= dx) {
        err += dx;
        y0 += sy;
      }
    }
  }
};

}  // namespace

void write_line_plot(const std::filesystem::path& path, const std::vector<Series>& series, int width,
                     int height) {
  Canvas cv{ImageBuffer(width, height, 3, 1.0)};
  double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo, y_lo = x_lo, y_hi = -x_lo;
  for (const auto& s : series) {
    for (double v : s.x) x_lo = std::min(x_lo, v), x_hi = std::max(x_hi, v);
    for (double v : s.y)
      if (std::isfinite(v)) y_lo = std::min(y_lo, v), y_hi = std::max(y_hi, v);
  }
  if (!(x_hi > x_lo)) x_lo -= 1, x_hi += 1;
  if (!(y_hi > y_lo)) y_lo -= 1, y_hi += 1;
  const double pad = 0.05 * (y_hi - y_lo);
  y_lo -= pad;
  y_hi += pad;

  const int left = 40, right = width - 20, top = 20, bottom = height - 40;
  const Vec3 grid(0.9, 0.9, 0.9), axis(0.0, 0.0, 0.0);
  for (int i = 1; i < 5; ++i) {
    const int gy = top + (bottom - top) * i / 5, gx = left + (right - left) * i / 5;
    cv.line(left, gy, right, gy, grid);
    cv.line(gx, top, gx, bottom, grid);
  }
  cv.line(left, top, left, bottom, axis);
  cv.line(left, bottom, right, bottom, axis);
  cv.line(right, top, right, bottom, axis);
  cv.line(left, top, right, top, axis);

  auto px = [&](double x) { return left + static_cast<int>(std::lround((x - x_lo) / (x_hi - x_lo) * (right - left))); };
  auto py = [&](double y) { return bottom - static_cast<int>(std::lround((y - y_lo) / (y_hi - y_lo) * (bottom - top))); };
  for (const auto& s : series) {
    const Vec3 c(s.r / 255.0, s.g / 255.0, s.b / 255.0);
    const std::size_t n = std::min(s.x.size(), s.y.size());
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(s.y[i])) continue;
      const int x = px(s.x[i]), y = py(s.y[i]);
      if (i > 0 && std::isfinite(s.y[i - 1])) cv.line(px(s.x[i - 1]), py(s.y[i - 1]), x, y, c);
      if (n <= 50)
        for (int d = -2; d <= 2; ++d) cv.line(x - 2, y + d, x + 2, y + d, c);
    }
  }
  write_png(path, cv.img);
}

}  // namespace gspose::cli
