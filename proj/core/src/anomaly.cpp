#include "gspose/anomaly.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "gspose/error.hpp"
#include "gspose/parallel.hpp"

namespace gspose {

void AnomalyConfig::validate() const {
  if (levels < 1) throw Error(ErrorCode::Config, "anomaly levels must be >= 1");
  if (smooth_sigma < 0) throw Error(ErrorCode::Config, "smooth_sigma must be >= 0");
  if (!(top_fraction > 0 && top_fraction <= 1)) throw Error(ErrorCode::Config, "top_fraction must be in (0, 1]");
}

namespace {

constexpr int kMinLevelSize = 4;
constexpr int kFeatureChannels = 6;

// [1 4 6 4 1]/16 blur with clamped borders, then every second pixel.
ScalarMap pyr_down(const ScalarMap& m) {
  static constexpr double k[5] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};
  const int w = m.width, h = m.height;
  ScalarMap tmp(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -2; i <= 2; ++i) s += k[i + 2] * m.at(std::clamp(x + i, 0, w - 1), y);
      tmp.at(x, y) = s;
    }
  }
  const int ow = (w + 1) / 2, oh = (h + 1) / 2;
  ScalarMap out(ow, oh);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = -2; i <= 2; ++i) s += k[i + 2] * tmp.at(2 * x, std::clamp(2 * y + i, 0, h - 1));
      out.at(x, y) = s;
    }
  }
  return out;
}

void z_normalize(std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(v.size());
  const double sd = std::sqrt(var);
  if (sd < 1e-12) {
    std::fill(v.begin(), v.end(), 0.0);
    return;
  }
  for (double& x : v) x = (x - mean) / sd;
}

ImageBuffer level_features(const ScalarMap& r, const ScalarMap& g, const ScalarMap& b) {
  const int w = r.width, h = r.height;
  const std::size_t n = static_cast<std::size_t>(w) * h;
  std::vector<std::vector<double>> ch(kFeatureChannels, std::vector<double>(n));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      ch[0][i] = r.data[i];
      ch[1][i] = g.data[i];
      ch[2][i] = b.data[i];
    }
  }
  auto gray = [&](int x, int y) {
    x = std::clamp(x, 0, w - 1);
    y = std::clamp(y, 0, h - 1);
    const std::size_t i = static_cast<std::size_t>(y) * w + x;
    return (r.data[i] + g.data[i] + b.data[i]) / 3.0;
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      const double gx = 0.5 * (gray(x + 1, y) - gray(x - 1, y));
      const double gy = 0.5 * (gray(x, y + 1) - gray(x, y - 1));
      // mag * (sin, cos) of atan2(gy, gx) is (gy, gx).
      ch[3][i] = std::hypot(gx, gy);
      ch[4][i] = gy;
      ch[5][i] = gx;
    }
  }
  for (auto& c : ch) z_normalize(c);
  ImageBuffer out(w, h, kFeatureChannels);
  for (std::size_t i = 0; i < n; ++i)
    for (int c = 0; c < kFeatureChannels; ++c) out.data[i * kFeatureChannels + c] = ch[c][i];
  return out;
}

}  // namespace

FeaturePyramid HandcraftedExtractor::extract(const ImageBuffer& img) const {
  if (img.channels != 3) throw Error(ErrorCode::InvalidArgument, "feature extraction expects RGB");
  if (levels_ < 1) throw Error(ErrorCode::InvalidArgument, "pyramid needs at least one level");
  const int factor = 1 << (levels_ - 1);
  if (img.width / factor < kMinLevelSize || img.height / factor < kMinLevelSize) {
    throw Error(ErrorCode::ImageTooSmall, "image too small for a " + std::to_string(levels_) + "-level pyramid");
  }
  FeaturePyramid out;
  ScalarMap r = channel(img, 0), g = channel(img, 1), b = channel(img, 2);
  for (int l = 0; l < levels_; ++l) {
    if (l > 0) {
      r = pyr_down(r);
      g = pyr_down(g);
      b = pyr_down(b);
    }
    out.levels.push_back(level_features(r, g, b));
    out.scales.push_back(1 << l);
  }
  return out;
}

FeaturePyramid extract_features(const ImageBuffer& img, int levels) {
  return HandcraftedExtractor(levels).extract(img);
}

ScalarMap score_map(const FeaturePyramid& query, const FeaturePyramid& aligned, int width, int height,
                    double smooth_sigma) {
  if (query.levels.size() != aligned.levels.size() || query.levels.empty()) {
    throw Error(ErrorCode::ShapeMismatch, "pyramids have different depths");
  }
  ScalarMap acc(width, height);
  const std::size_t n_levels = query.levels.size();
  std::vector<ScalarMap> per_level(n_levels);
  parallel_for(n_levels, [&](std::size_t l) {
    const ImageBuffer& a = query.levels[l];
    const ImageBuffer& b = aligned.levels[l];
    if (!a.same_shape(b)) throw Error(ErrorCode::ShapeMismatch, "pyramid level shapes differ");
    ScalarMap d(a.width, a.height);
    for (std::size_t i = 0; i < a.pixel_count(); ++i) {
      double s = 0.0;
      for (int c = 0; c < a.channels; ++c) {
        const double diff = a.data[i * a.channels + c] - b.data[i * a.channels + c];
        s += diff * diff;
      }
      d.data[i] = s / a.channels;
    }
    per_level[l] = (d.width == width && d.height == height) ? std::move(d) : resize_bilinear(d, width, height);
  });
  for (const auto& m : per_level)
    for (std::size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += m.data[i] / static_cast<double>(n_levels);
  if (smooth_sigma > 0.0) acc = gaussian_blur(acc, smooth_sigma);
  for (double& v : acc.data) v = std::max(v, 0.0);
  return acc;
}

ScalarMap score_map(const ImageBuffer& query, const ImageBuffer& aligned, const AnomalyConfig& cfg,
                    const FeatureExtractor* extractor) {
  cfg.validate();
  if (!query.same_shape(aligned)) throw Error(ErrorCode::ShapeMismatch, "query and aligned render differ in shape");
  HandcraftedExtractor fallback(cfg.levels);
  const FeatureExtractor& ex = extractor ? *extractor : fallback;
  return score_map(ex.extract(query), ex.extract(aligned), query.width, query.height, cfg.smooth_sigma);
}

double image_score(const ScalarMap& map, const AnomalyConfig& cfg) {
  if (map.empty()) throw Error(ErrorCode::EmptyMap, "empty score map");
  if (cfg.aggregator == Aggregator::Max) return *std::max_element(map.data.begin(), map.data.end());
  const std::size_t n = map.data.size();
  const std::size_t top = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(cfg.top_fraction * n)));
  std::vector<double> v = map.data;
  std::nth_element(v.begin(), v.begin() + (top - 1), v.end(), std::greater<>());
  double s = 0.0;
  for (std::size_t i = 0; i < top; ++i) s += v[i];
  return s / static_cast<double>(top);
}

AnomalyResult detect_anomalies(const ImageBuffer& query, const ImageBuffer& aligned, const AnomalyConfig& cfg,
                               const FeatureExtractor* extractor) {
  AnomalyResult r;
  r.score_map = score_map(query, aligned, cfg, extractor);
  r.image_score = image_score(r.score_map, cfg);
  r.aligned_render = aligned;
  return r;
}

}  // namespace gspose
