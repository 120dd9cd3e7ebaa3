#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace gspose::testing {

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Vec3 random_unit_vector(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 v(n(rng), n(rng), n(rng));
  while (v.norm() < 1e-6) v = Vec3(n(rng), n(rng), n(rng));
  return v.normalized();
}

Quat random_quat(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Quat q(n(rng), n(rng), n(rng), n(rng));
  return q / q.norm();
}

GaussianCloud random_cloud(Rng& rng, int n, double radius) {
  GaussianCloud cloud;
  for (int i = 0; i < n; ++i) {
    Gaussian3D g;
    g.mean = random_unit_vector(rng) * radius * std::cbrt(uniform(rng, 0.0, 1.0));
    g.log_scale = Vec3(std::log(uniform(rng, 0.08, 0.3)), std::log(uniform(rng, 0.08, 0.3)),
                       std::log(uniform(rng, 0.08, 0.3))) + Vec3::Constant(std::log(radius));
    g.rotation = random_quat(rng);
    g.opacity_logit = uniform(rng, -1.0, 2.0);
    g.color = Vec3(uniform(rng, 0, 1), uniform(rng, 0, 1), uniform(rng, 0, 1));
    cloud.splats.push_back(g);
  }
  cloud.recompute_radius();
  return cloud;
}

Camera random_camera(Rng& rng, int width, int height, double distance, double fov_x) {
  const Vec3 eye = random_unit_vector(rng) * distance;
  return Camera::look_at(eye, Vec3::Zero(), Vec3::UnitZ(), width, height, fov_x);
}

ImageBuffer naive_render(const GaussianCloud& cloud, const Camera& cam, const RenderConfig& cfg) {
  struct Item {
    double depth;
    std::size_t index;
    Vec2 mean;
    Mat2 inv;
    double opacity;
  };
  std::vector<Item> items;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto p = project_gaussian(cloud.splats[i], cam, cfg.low_pass);
    if (!p.visible()) continue;
    items.push_back({p.depth, i, p.mean2d, p.cov2d.inverse(), cloud.splats[i].opacity()});
  }
  ImageBuffer img(cam.width, cam.height, 3);
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      std::vector<const Item*> order;
      for (const auto& it : items) order.push_back(&it);
      std::sort(order.begin(), order.end(), [](const Item* a, const Item* b) {
        return a->depth != b->depth ? a->depth < b->depth : a->index < b->index;
      });
      double t = 1.0;
      Vec3 c = Vec3::Zero();
      for (const Item* it : order) {
        const Vec2 d = Vec2(x, y) - it->mean;
        const double a = it->opacity * std::exp(-0.5 * d.dot(it->inv * d));
        if (a < cfg.alpha_cutoff) continue;
        c += cloud.splats[it->index].color * a * t;
        t *= 1.0 - a;
        if (t < cfg.transmittance_floor) break;
      }
      c += cfg.background * t;
      for (int ch = 0; ch < 3; ++ch) img.at(x, y, ch) = c[ch];
    }
  }
  return img;
}

template <typename M>
static M expm_impl(const M& m, int terms) {
  M sum = M::Identity();
  M term = M::Identity();
  for (int k = 1; k < terms; ++k) {
    term = (term * m / static_cast<double>(k)).eval();
    sum += term;
  }
  return sum;
}

Mat3 expm_series(const Mat3& m, int terms) { return expm_impl(m, terms); }
Mat4 expm_series(const Mat4& m, int terms) { return expm_impl(m, terms); }

double ssim_direct(const ImageBuffer& a, const ImageBuffer& b, const LossConfig& cfg) {
  const int ks = cfg.ssim_window, r = ks / 2;
  std::vector<std::vector<double>> w(ks, std::vector<double>(ks));
  double wsum = 0.0;
  for (int i = 0; i < ks; ++i) {
    for (int j = 0; j < ks; ++j) {
      w[i][j] = std::exp(-((i - r) * (i - r) + (j - r) * (j - r)) / (2.0 * cfg.ssim_sigma * cfg.ssim_sigma));
      wsum += w[i][j];
    }
  }
  double total = 0.0;
  long count = 0;
  for (int c = 0; c < a.channels; ++c) {
    for (int y0 = 0; y0 + ks <= a.height; ++y0) {
      for (int x0 = 0; x0 + ks <= a.width; ++x0) {
        double ma = 0, mb = 0;
        for (int i = 0; i < ks; ++i)
          for (int j = 0; j < ks; ++j) {
            ma += w[i][j] / wsum * a.at(x0 + j, y0 + i, c);
            mb += w[i][j] / wsum * b.at(x0 + j, y0 + i, c);
          }
        double va = 0, vb = 0, cab = 0;
        for (int i = 0; i < ks; ++i)
          for (int j = 0; j < ks; ++j) {
            const double da = a.at(x0 + j, y0 + i, c) - ma;
            const double db = b.at(x0 + j, y0 + i, c) - mb;
            va += w[i][j] / wsum * da * da;
            vb += w[i][j] / wsum * db * db;
            cab += w[i][j] / wsum * da * db;
          }
        total += ((2 * ma * mb + cfg.c1) * (2 * cab + cfg.c2)) /
                 ((ma * ma + mb * mb + cfg.c1) * (va + vb + cfg.c2));
        ++count;
      }
    }
  }
  return total / static_cast<double>(count);
}

double central_difference(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

double rel_err(double a, double b, double floor) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

ImageBuffer random_image(Rng& rng, int w, int h, int c) {
  ImageBuffer img(w, h, c);
  for (auto& v : img.data) v = uniform(rng, 0.0, 1.0);
  return img;
}

}  // namespace gspose::testing

namespace gspose::testing {

double pairwise_auroc(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels) {
  double credit = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!labels[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j]) continue;
      pairs += 1.0;
      if (scores[i] > scores[j]) credit += 1.0;
      else if (scores[i] == scores[j]) credit += 0.5;
    }
  }
  return credit / pairs;
}

namespace {

void flood(const BinaryMask& m, std::vector<int>& lab, int x, int y, int id) {
  if (x < 0 || y < 0 || x >= m.width || y >= m.height) return;
  const int i = y * m.width + x;
  if (!m.data[i] || lab[i]) return;
  lab[i] = id;
  for (int dy = -1; dy <= 1; ++dy)
    for (int dx = -1; dx <= 1; ++dx)
      if (dx || dy) flood(m, lab, x + dx, y + dy, id);
}

}  // namespace

double dense_aupro(const std::vector<ScalarMap>& maps, const std::vector<BinaryMask>& masks, double fpr_limit) {
  std::vector<std::vector<int>> labels;
  std::vector<int> counts;
  for (const auto& m : masks) {
    std::vector<int> lab(m.data.size(), 0);
    int id = 0;
    for (int y = 0; y < m.height; ++y)
      for (int x = 0; x < m.width; ++x)
        if (m.at(x, y) && !lab[y * m.width + x]) flood(m, lab, x, y, ++id);
    labels.push_back(lab);
    counts.push_back(id);
  }
  std::vector<double> values;
  for (const auto& m : maps) values.insert(values.end(), m.data.begin(), m.data.end());
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  std::vector<double> thresholds{values.back() + 1.0};
  for (std::size_t i = values.size(); i-- > 0;) {
    if (i + 1 < values.size()) thresholds.push_back(0.5 * (values[i] + values[i + 1]));
    thresholds.push_back(values[i]);
  }
  std::vector<std::pair<double, double>> curve;
  for (double t : thresholds) {
    double fp = 0.0, normal = 0.0, pro = 0.0;
    int components = 0;
    for (std::size_t k = 0; k < maps.size(); ++k) {
      for (std::size_t i = 0; i < maps[k].data.size(); ++i) {
        if (!masks[k].data[i]) {
          normal += 1.0;
          if (maps[k].data[i] >= t) fp += 1.0;
        }
      }
      for (int c = 1; c <= counts[k]; ++c) {
        double hit = 0.0, size = 0.0;
        for (std::size_t i = 0; i < labels[k].size(); ++i) {
          if (labels[k][i] != c) continue;
          size += 1.0;
          if (maps[k].data[i] >= t) hit += 1.0;
        }
        pro += hit / size;
        ++components;
      }
    }
    curve.emplace_back(fp / normal, pro / components);
  }
  double area = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    auto [x0, y0] = curve[i - 1];
    auto [x1, y1] = curve[i];
    if (x0 >= fpr_limit) break;
    if (x1 > fpr_limit) {
      y1 = y0 + (y1 - y0) * (fpr_limit - x0) / (x1 - x0);
      x1 = fpr_limit;
    }
    area += 0.5 * (x1 - x0) * (y0 + y1);
  }
  return area / fpr_limit;
}

}  // namespace gspose::testing
