#pragma once

#include "gspose/image.hpp"

namespace gspose {

struct LossConfig {
  double lambda = 0.2;
  int ssim_window = 11;
  double ssim_sigma = 1.5;
  double c1 = 0.01 * 0.01;
  double c2 = 0.03 * 0.03;

  void validate() const;
};

struct LossResult {
  double value = 0.0;
  ImageBuffer grad_a;
};

/// Mean absolute error; gradient sign(a - b) / N with 0 at equality.
LossResult l1(const ImageBuffer& a, const ImageBuffer& b);

/// Mean local SSIM over every fully-contained Gaussian window, computed per
/// channel and averaged. Gradient is with respect to `a`.
LossResult ssim(const ImageBuffer& a, const ImageBuffer& b, const LossConfig& cfg = {});

/// (1 - lambda) L1 + lambda (1 - SSIM).
LossResult combined(const ImageBuffer& a, const ImageBuffer& b, const LossConfig& cfg = {});

}  // namespace gspose
