#pragma once

#include <filesystem>
#include <vector>

namespace gspose::cli {

struct Series {
  std::vector<double> x, y;
  unsigned char r = 0, g = 0, b = 0;
};

/// Axis box, light grid and one polyline with markers per series, written
/// as an 8-bit PNG. No text; the data lives next to it as CSV/JSON.
void write_line_plot(const std::filesystem::path& path, const std::vector<Series>& series, int width = 640,
                     int height = 400);

}  // namespace gspose::cli
