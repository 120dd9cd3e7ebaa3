#pragma once

#include <memory>
#include <vector>

#include "gspose/image.hpp"

namespace gspose {

/// Feature maps at successively halved resolutions. Each level is an
/// ImageBuffer whose channels are feature dimensions.
struct FeaturePyramid {
  std::vector<ImageBuffer> levels;
  std::vector<int> scales;  // downsample factor of each level
};

class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual FeaturePyramid extract(const ImageBuffer& img) const = 0;
};

/// Gaussian pyramid ([1 4 6 4 1]/16 blur, decimation by 2). Per level the six
/// channels are R, G, B, gradient magnitude, and the gradient direction as
/// (sin, cos) weighted by magnitude, each z-normalized over the image.
class HandcraftedExtractor : public FeatureExtractor {
 public:
  explicit HandcraftedExtractor(int levels = 3) : levels_(levels) {}
  FeaturePyramid extract(const ImageBuffer& img) const override;
  int levels() const { return levels_; }

 private:
  int levels_;
};

enum class Aggregator { Max, TopMean };

struct AnomalyConfig {
  int levels = 3;
  /// Gaussian smoothing applied to the averaged map; 0 disables it.
  double smooth_sigma = 4.0;
  Aggregator aggregator = Aggregator::Max;
  double top_fraction = 0.001;

  void validate() const;
};

struct AnomalyResult {
  ScalarMap score_map;
  double image_score = 0.0;
  ImageBuffer aligned_render;
};

FeaturePyramid extract_features(const ImageBuffer& img, int levels = 3);

/// Mean squared feature difference per pixel and level, bilinearly upsampled
/// to the query size, averaged over levels and smoothed.
ScalarMap score_map(const ImageBuffer& query, const ImageBuffer& aligned, const AnomalyConfig& cfg = {},
                    const FeatureExtractor* extractor = nullptr);
ScalarMap score_map(const FeaturePyramid& query, const FeaturePyramid& aligned, int width, int height,
                    double smooth_sigma);

double image_score(const ScalarMap& map, const AnomalyConfig& cfg = {});

AnomalyResult detect_anomalies(const ImageBuffer& query, const ImageBuffer& aligned,
                               const AnomalyConfig& cfg = {}, const FeatureExtractor* extractor = nullptr);

}  // namespace gspose
