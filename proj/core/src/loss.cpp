#include "gspose/loss.hpp"

#include <cmath>
#include <vector>

#include "gspose/error.hpp"
#include "gspose/parallel.hpp"

namespace gspose {

void LossConfig::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw Error(ErrorCode::InvalidArgument, "lambda must be in [0, 1]");
  if (ssim_window < 3 || ssim_window % 2 == 0) {
    throw Error(ErrorCode::InvalidArgument, "ssim_window must be odd and >= 3");
  }
  if (!(ssim_sigma > 0.0)) throw Error(ErrorCode::InvalidArgument, "ssim_sigma must be positive");
}

LossResult l1(const ImageBuffer& a, const ImageBuffer& b) {
  if (!a.same_shape(b)) throw Error(ErrorCode::ShapeMismatch, "l1: image shapes differ");
  LossResult r;
  r.grad_a = ImageBuffer(a.width, a.height, a.channels);
  const double inv_n = 1.0 / static_cast<double>(a.data.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    acc += std::abs(d);
    r.grad_a.data[i] = d > 0.0 ? inv_n : (d < 0.0 ? -inv_n : 0.0);
  }
  r.value = acc * inv_n;
  return r;
}

namespace {

std::vector<double> window_1d(int size, double sigma) {
  std::vector<double> w(size);
  const int r = size / 2;
  double sum = 0.0;
  for (int i = 0; i < size; ++i) {
    w[i] = std::exp(-0.5 * (i - r) * (i - r) / (sigma * sigma));
    sum += w[i];
  }
  for (auto& v : w) v /= sum;
  return w;
}

// Valid-mode separable correlation: out has (W-k+1) x (H-k+1) entries.
void filter_valid(const std::vector<double>& src, int width, int height, const std::vector<double>& k,
                  std::vector<double>& tmp, std::vector<double>& out) {
  const int ks = static_cast<int>(k.size());
  const int ow = width - ks + 1, oh = height - ks + 1;
  tmp.assign(static_cast<std::size_t>(ow) * height, 0.0);
  for (int y = 0; y < height; ++y) {
    const double* row = &src[static_cast<std::size_t>(y) * width];
    double* dst = &tmp[static_cast<std::size_t>(y) * ow];
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < ks; ++i) acc += k[i] * row[x + i];
      dst[x] = acc;
    }
  }
  out.assign(static_cast<std::size_t>(ow) * oh, 0.0);
  for (int y = 0; y < oh; ++y) {
    double* dst = &out[static_cast<std::size_t>(y) * ow];
    for (int i = 0; i < ks; ++i) {
      const double* row = &tmp[static_cast<std::size_t>(y + i) * ow];
      const double ki = k[i];
      for (int x = 0; x < ow; ++x) dst[x] += ki * row[x];
    }
  }
}

// Adjoint of filter_valid: scatters window values back to full size.
void filter_full(const std::vector<double>& src, int ow, int oh, const std::vector<double>& k,
                 std::vector<double>& tmp, std::vector<double>& out) {
  const int ks = static_cast<int>(k.size());
  const int width = ow + ks - 1, height = oh + ks - 1;
  tmp.assign(static_cast<std::size_t>(ow) * height, 0.0);
  for (int y = 0; y < oh; ++y) {
    const double* row = &src[static_cast<std::size_t>(y) * ow];
    for (int i = 0; i < ks; ++i) {
      double* dst = &tmp[static_cast<std::size_t>(y + i) * ow];
      const double ki = k[i];
      for (int x = 0; x < ow; ++x) dst[x] += ki * row[x];
    }
  }
  out.assign(static_cast<std::size_t>(width) * height, 0.0);
  for (int y = 0; y < height; ++y) {
    const double* row = &tmp[static_cast<std::size_t>(y) * ow];
    double* dst = &out[static_cast<std::size_t>(y) * width];
    for (int x = 0; x < ow; ++x) {
      const double v = row[x];
      for (int i = 0; i < ks; ++i) dst[x + i] += k[i] * v;
    }
  }
}

}  // namespace

LossResult ssim(const ImageBuffer& a, const ImageBuffer& b, const LossConfig& cfg) {
  cfg.validate();
  if (!a.same_shape(b)) throw Error(ErrorCode::ShapeMismatch, "ssim: image shapes differ");
  const int ks = cfg.ssim_window;
  if (a.width < ks || a.height < ks) {
    throw Error(ErrorCode::ImageTooSmall, "ssim: image smaller than the window");
  }
  const auto k = window_1d(ks, cfg.ssim_sigma);
  const int w = a.width, h = a.height, nc = a.channels;
  const int ow = w - ks + 1, oh = h - ks + 1;
  const double windows = static_cast<double>(ow) * oh;

  LossResult r;
  r.grad_a = ImageBuffer(w, h, nc);
  std::vector<double> channel_sums(nc, 0.0);

  parallel_for(static_cast<std::size_t>(nc), [&](std::size_t ci) {
    const int c = static_cast<int>(ci);
    const std::size_t np = static_cast<std::size_t>(w) * h;
    std::vector<double> va(np), vb(np), vaa(np), vbb(np), vab(np);
    for (std::size_t p = 0; p < np; ++p) {
      const double x = a.data[p * nc + c], y = b.data[p * nc + c];
      va[p] = x;
      vb[p] = y;
      vaa[p] = x * x;
      vbb[p] = y * y;
      vab[p] = x * y;
    }
    std::vector<double> tmp, mu_a, mu_b, s_aa, s_bb, s_ab;
    filter_valid(va, w, h, k, tmp, mu_a);
    filter_valid(vb, w, h, k, tmp, mu_b);
    filter_valid(vaa, w, h, k, tmp, s_aa);
    filter_valid(vbb, w, h, k, tmp, s_bb);
    filter_valid(vab, w, h, k, tmp, s_ab);

    const std::size_t nw = mu_a.size();
    std::vector<double> d_mu(nw), d_saa(nw), d_sab(nw);
    double sum = 0.0;
    for (std::size_t i = 0; i < nw; ++i) {
      const double ma = mu_a[i], mb = mu_b[i];
      const double var_a = s_aa[i] - ma * ma;
      const double var_b = s_bb[i] - mb * mb;
      const double cov = s_ab[i] - ma * mb;
      const double n1 = 2.0 * ma * mb + cfg.c1;
      const double n2 = 2.0 * cov + cfg.c2;
      const double d1 = ma * ma + mb * mb + cfg.c1;
      const double d2 = var_a + var_b + cfg.c2;
      const double s = (n1 * n2) / (d1 * d2);
      sum += s;
      // Partials with respect to the raw window moments of `a`.
      d_mu[i] = (2.0 * mb * n2 - 2.0 * mb * n1) / (d1 * d2) - s * (2.0 * ma / d1 - 2.0 * ma / d2);
      d_saa[i] = -s / d2;
      d_sab[i] = 2.0 * n1 / (d1 * d2);
    }
    std::vector<double> g_mu, g_saa, g_sab;
    filter_full(d_mu, ow, oh, k, tmp, g_mu);
    filter_full(d_saa, ow, oh, k, tmp, g_saa);
    filter_full(d_sab, ow, oh, k, tmp, g_sab);
    const double scale = 1.0 / (windows * nc);
    for (std::size_t p = 0; p < np; ++p) {
      r.grad_a.data[p * nc + c] = scale * (g_mu[p] + 2.0 * va[p] * g_saa[p] + vb[p] * g_sab[p]);
    }
    channel_sums[c] = sum;
  });

  double total = 0.0;
  for (double s : channel_sums) total += s;
  r.value = total / (windows * nc);
  return r;
}

LossResult combined(const ImageBuffer& a, const ImageBuffer& b, const LossConfig& cfg) {
  cfg.validate();
  LossResult l = l1(a, b);
  if (cfg.lambda == 0.0) return l;
  LossResult s = ssim(a, b, cfg);
  LossResult r;
  r.value = (1.0 - cfg.lambda) * l.value + cfg.lambda * (1.0 - s.value);
  r.grad_a = ImageBuffer(a.width, a.height, a.channels);
  for (std::size_t i = 0; i < r.grad_a.data.size(); ++i) {
    r.grad_a.data[i] = (1.0 - cfg.lambda) * l.grad_a.data[i] - cfg.lambda * s.grad_a.data[i];
  }
  return r;
}

}  // namespace gspose
