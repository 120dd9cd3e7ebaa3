#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "gspose/anomaly.hpp"
#include "gspose/error.hpp"
#include "support/oracles.hpp"

using namespace gspose;
using namespace gspose::testing;

namespace {

// Axis-aligned rectangles on a flat background, offset by (dx, dy).
ImageBuffer rectangles(int w, int h, int dx = 0, int dy = 0) {
  ImageBuffer img(w, h, 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = 0.2;
  auto fill = [&](int x0, int y0, int x1, int y1, Vec3 col) {
    for (int y = y0 + dy; y < y1 + dy; ++y)
      for (int x = x0 + dx; x < x1 + dx; ++x)
        if (x >= 0 && y >= 0 && x < w && y < h)
          for (int c = 0; c < 3; ++c) img.at(x, y, c) = col[c];
  };
  fill(16, 14, 40, 30, Vec3(0.9, 0.1, 0.1));
  fill(30, 36, 52, 50, Vec3(0.1, 0.6, 0.9));
  return img;
}

}  // namespace

TEST(Features, ConstantImageHasZeroGradientChannels) {
  const ImageBuffer img(40, 40, 3, 0.37);
  const FeaturePyramid p = extract_features(img, 3);
  ASSERT_EQ(p.levels.size(), 3u);
  EXPECT_EQ(p.scales, (std::vector<int>{1, 2, 4}));
  for (const auto& level : p.levels) {
    ASSERT_EQ(level.channels, 6);
    for (std::size_t i = 0; i < level.pixel_count(); ++i)
      for (int c = 3; c < 6; ++c) ASSERT_EQ(level.data[i * 6 + c], 0.0);
  }
}

TEST(Features, IdenticalImagesGiveIdenticalPyramids) {
  Rng rng(1);
  const ImageBuffer img = random_image(rng, 48, 40);
  const FeaturePyramid a = extract_features(img), b = extract_features(img);
  for (std::size_t l = 0; l < a.levels.size(); ++l) EXPECT_EQ(a.levels[l].data, b.levels[l].data);
}

TEST(Features, ImageTooSmall) {
  try {
    extract_features(ImageBuffer(12, 12), 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ImageTooSmall);
  }
}

TEST(Features, TranslationCovariant) {
  // Whole-pyramid shifts need multiples of the coarsest decimation.
  const int shift = 4;
  const ImageBuffer a = rectangles(96, 96), b = rectangles(96, 96, shift, shift);
  const FeaturePyramid pa = extract_features(a), pb = extract_features(b);
  for (std::size_t l = 0; l < pa.levels.size(); ++l) {
    const ImageBuffer& fa = pa.levels[l];
    const ImageBuffer& fb = pb.levels[l];
    const int s = shift / pa.scales[l];
    double worst = 0.0;
    for (int y = 4; y + s < fa.height - 4; ++y)
      for (int x = 4; x + s < fa.width - 4; ++x)
        for (int c = 0; c < fa.channels; ++c) worst = std::max(worst, std::abs(fa.at(x, y, c) - fb.at(x + s, y + s, c)));
    EXPECT_LT(worst, 1e-6) << "level " << l;
  }
}

TEST(Features, OnePixelShiftConcentratesAtEdges) {
  const ImageBuffer a = rectangles(64, 64), b = rectangles(64, 64, 1, 0);
  AnomalyConfig cfg;
  cfg.smooth_sigma = 0.0;
  cfg.levels = 1;
  const ScalarMap d = score_map(a, b, cfg);
  // Edge pixels of either image.
  BinaryMask edges(64, 64);
  for (const ImageBuffer* img : {&a, &b})
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x + 1 < 64; ++x)
        for (int c = 0; c < 3; ++c)
          if (img->at(x, y, c) != img->at(x + 1, y, c) ||
              (y + 1 < 64 && img->at(x, y, c) != img->at(x, y + 1, c))) {
            edges.at(x, y) = edges.at(x + 1, y) = 1;
            if (y + 1 < 64) edges.at(x, y + 1) = 1;
          }
  const BinaryMask near = dilate(edges, 3);
  double total = 0.0, inside = 0.0;
  for (std::size_t i = 0; i < d.data.size(); ++i) {
    total += d.data[i];
    if (near.data[i]) inside += d.data[i];
  }
  EXPECT_GT(total, 0.0);
  EXPECT_GT(inside / total, 0.8);
}

TEST(ScoreMap, ZeroForIdenticalImages) {
  Rng rng(2);
  const ImageBuffer img = random_image(rng, 40, 40);
  const ScalarMap m = score_map(img, img);
  for (double v : m.data) ASSERT_EQ(v, 0.0);
}

TEST(ScoreMap, RecoloredPatchStandsOut) {
  const ImageBuffer aligned = rectangles(64, 64);
  ImageBuffer query = aligned;
  for (int y = 40; y < 50; ++y)
    for (int x = 8; x < 18; ++x) {
      query.at(x, y, 0) = 0.1;
      query.at(x, y, 1) = 0.9;
      query.at(x, y, 2) = 0.2;
    }
  const ScalarMap m = score_map(query, aligned);
  double in = 0, out = 0;
  int nin = 0, nout = 0;
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) {
      const double v = m.at(x, y);
      ASSERT_GE(v, 0.0);
      if (x >= 8 && x < 18 && y >= 40 && y < 50) {
        in += v;
        ++nin;
      } else {
        out += v;
        ++nout;
      }
    }
  EXPECT_GE(in / nin, 5.0 * out / nout);
}

TEST(ScoreMap, ShapeMismatch) { EXPECT_THROW(score_map(ImageBuffer(32, 32), ImageBuffer(32, 33)), Error); }

TEST(ImageScore, Aggregators) {
  EXPECT_EQ(image_score(ScalarMap(10, 10, 0.0)), 0.0);
  ScalarMap spike(10, 10, 0.0);
  spike.at(3, 7) = 2.5;
  EXPECT_EQ(image_score(spike), 2.5);

  Rng rng(3);
  ScalarMap r(50, 40);
  for (auto& v : r.data) v = uniform(rng, 0, 3);
  double oracle = 0.0;
  for (double v : r.data) oracle = v > oracle ? v : oracle;
  EXPECT_EQ(image_score(r), oracle);

  AnomalyConfig top;
  top.aggregator = Aggregator::TopMean;
  top.top_fraction = 0.01;  // 20 of 2000 pixels
  std::vector<double> sorted = r.data;
  std::sort(sorted.rbegin(), sorted.rend());
  double mean = 0.0;
  for (int i = 0; i < 20; ++i) mean += sorted[i] / 20;
  EXPECT_NEAR(image_score(r, top), mean, 1e-12);
}

TEST(ImageScore, EmptyMap) {
  try {
    image_score(ScalarMap{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyMap);
  }
}

TEST(Detect, ResultIsConsistent) {
  Rng rng(4);
  const ImageBuffer q = random_image(rng, 32, 32), a = random_image(rng, 32, 32);
  const AnomalyResult r = detect_anomalies(q, a);
  EXPECT_EQ(r.score_map.width, 32);
  EXPECT_EQ(r.image_score, image_score(r.score_map));
  EXPECT_EQ(r.aligned_render.data, a.data);
}
