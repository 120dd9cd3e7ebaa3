#include "gspose/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "gspose/error.hpp"

namespace gspose {

namespace {

// Sum over positives of (#negatives below + 0.5 #negatives tied), using a
// sort and run-length grouping of equal scores.
double rank_auroc(std::vector<std::pair<double, std::uint8_t>>& items) {
  std::sort(items.begin(), items.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  double pos = 0.0, neg = 0.0;
  for (const auto& it : items) (it.second ? pos : neg) += 1.0;
  if (pos == 0.0 || neg == 0.0) throw Error(ErrorCode::SingleClass, "auroc needs both classes");
  double neg_below = 0.0, credit = 0.0;
  for (std::size_t i = 0; i < items.size();) {
    std::size_t j = i;
    double p = 0.0, n = 0.0;
    while (j < items.size() && items[j].first == items[i].first) {
      (items[j].second ? p : n) += 1.0;
      ++j;
    }
    credit += p * neg_below + 0.5 * p * n;
    neg_below += n;
    i = j;
  }
  return credit / (pos * neg);
}

}  // namespace

double auroc(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels) {
  if (scores.size() != labels.size()) throw Error(ErrorCode::ShapeMismatch, "scores and labels differ in length");
  std::vector<std::pair<double, std::uint8_t>> items(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) throw Error(ErrorCode::InvalidArgument, "non-finite score");
    items[i] = {scores[i], labels[i] ? std::uint8_t{1} : std::uint8_t{0}};
  }
  return rank_auroc(items);
}

double pixel_auroc(const std::vector<ScalarMap>& maps, const std::vector<BinaryMask>& masks) {
  if (maps.size() != masks.size()) throw Error(ErrorCode::ShapeMismatch, "map and mask counts differ");
  std::vector<std::pair<double, std::uint8_t>> items;
  for (std::size_t k = 0; k < maps.size(); ++k) {
    if (maps[k].width != masks[k].width || maps[k].height != masks[k].height) {
      throw Error(ErrorCode::ShapeMismatch, "map and mask sizes differ");
    }
    for (std::size_t i = 0; i < maps[k].data.size(); ++i) {
      items.emplace_back(maps[k].data[i], masks[k].data[i] ? 1 : 0);
    }
  }
  return rank_auroc(items);
}

std::vector<int> connected_components(const BinaryMask& mask, int* count) {
  const int w = mask.width, h = mask.height;
  std::vector<int> label(static_cast<std::size_t>(w) * h, 0);
  int next = 0;
  std::vector<int> stack;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int idx = y * w + x;
      if (!mask.data[idx] || label[idx]) continue;
      ++next;
      label[idx] = next;
      stack.push_back(idx);
      while (!stack.empty()) {
        const int cur = stack.back();
        stack.pop_back();
        const int cx = cur % w, cy = cur / w;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = cx + dx, ny = cy + dy;
            if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
            const int n = ny * w + nx;
            if (mask.data[n] && !label[n]) {
              label[n] = next;
              stack.push_back(n);
            }
          }
        }
      }
    }
  }
  if (count) *count = next;
  return label;
}

std::vector<ProCurvePoint> pro_curve(const std::vector<ScalarMap>& maps, const std::vector<BinaryMask>& masks) {
  if (maps.size() != masks.size()) throw Error(ErrorCode::ShapeMismatch, "map and mask counts differ");
  struct Pixel {
    double score;
    int component;  // -1 for normal pixels
  };
  std::vector<Pixel> pixels;
  std::vector<double> comp_size;
  for (std::size_t k = 0; k < maps.size(); ++k) {
    if (maps[k].width != masks[k].width || maps[k].height != masks[k].height) {
      throw Error(ErrorCode::ShapeMismatch, "map and mask sizes differ");
    }
    int n = 0;
    const std::vector<int> lab = connected_components(masks[k], &n);
    const int base = static_cast<int>(comp_size.size());
    comp_size.resize(comp_size.size() + n, 0.0);
    for (std::size_t i = 0; i < lab.size(); ++i) {
      const int c = lab[i] ? base + lab[i] - 1 : -1;
      if (c >= 0) comp_size[c] += 1.0;
      pixels.push_back({maps[k].data[i], c});
    }
  }
  if (comp_size.empty()) throw Error(ErrorCode::NoAnomalousPixels, "no anomalous pixels in any mask");
  double normal = 0.0;
  for (const auto& p : pixels) normal += p.component < 0 ? 1.0 : 0.0;
  if (normal == 0.0) throw Error(ErrorCode::InvalidArgument, "no normal pixels to measure false positives");

  std::sort(pixels.begin(), pixels.end(), [](const Pixel& a, const Pixel& b) { return a.score > b.score; });
  const double n_comp = static_cast<double>(comp_size.size());
  std::vector<ProCurvePoint> curve{{0.0, 0.0}};
  double fp = 0.0, overlap_sum = 0.0;
  for (std::size_t i = 0; i < pixels.size();) {
    std::size_t j = i;
    while (j < pixels.size() && pixels[j].score == pixels[i].score) {
      if (pixels[j].component < 0) {
        fp += 1.0;
      } else {
        overlap_sum += 1.0 / comp_size[pixels[j].component];
      }
      ++j;
    }
    curve.push_back({fp / normal, overlap_sum / n_comp});
    i = j;
  }
  return curve;
}

double integrate_to_limit(const std::vector<ProCurvePoint>& curve, double x_limit) {
  if (!(x_limit > 0.0)) throw Error(ErrorCode::InvalidArgument, "integration limit must be > 0");
  double area = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    const ProCurvePoint a = curve[i - 1], b = curve[i];
    if (a.fpr >= x_limit) break;
    if (b.fpr <= x_limit) {
      area += 0.5 * (b.fpr - a.fpr) * (a.pro + b.pro);
    } else {
      const double t = (x_limit - a.fpr) / (b.fpr - a.fpr);
      const double y = a.pro + t * (b.pro - a.pro);
      area += 0.5 * (x_limit - a.fpr) * (a.pro + y);
      break;
    }
  }
  return area / x_limit;
}

double aupro(const std::vector<ScalarMap>& maps, const std::vector<BinaryMask>& masks, double fpr_limit) {
  if (!(fpr_limit > 0.0 && fpr_limit <= 1.0)) throw Error(ErrorCode::InvalidArgument, "fpr_limit must be in (0, 1]");
  return integrate_to_limit(pro_curve(maps, masks), fpr_limit);
}

double rotation_error(const Quat& q1, const Quat& q2) {
  const Quat a = normalized(q1);
  Quat b = normalized(q2);
  if (a.dot(b) < 0.0) b = -b;
  return 4.0 * std::atan2((a - b).norm(), (a + b).norm());
}

double translation_error(const Vec3& p1, const Vec3& p2) { return (p1 - p2).norm(); }

PoseError camera_pose_error(const Camera& estimate, const Camera& truth) {
  return {rotation_error(matrix_to_quat(estimate.rotation), matrix_to_quat(truth.rotation)),
          translation_error(estimate.center(), truth.center())};
}

CategoryReport evaluate_category(const EvalInput& in, double fpr_limit) {
  CategoryReport r;
  r.name = in.category;
  r.images = in.image_scores.size();
  r.image_auroc = auroc(in.image_scores, in.image_labels);
  if (!in.maps.empty()) {
    r.pixel_auroc = pixel_auroc(in.maps, in.masks);
    r.aupro = aupro(in.maps, in.masks, fpr_limit);
  }
  if (!in.pose_errors.empty()) {
    for (const auto& e : in.pose_errors) {
      r.rotation_error_mean += e.rotation;
      r.translation_error_mean += e.translation;
    }
    r.rotation_error_mean /= static_cast<double>(in.pose_errors.size());
    r.translation_error_mean /= static_cast<double>(in.pose_errors.size());
  }
  return r;
}

EvalReport evaluate(const std::vector<EvalInput>& inputs, double fpr_limit) {
  if (inputs.empty()) throw Error(ErrorCode::InvalidArgument, "nothing to evaluate");
  EvalReport rep;
  for (const auto& in : inputs) rep.categories.push_back(evaluate_category(in, fpr_limit));
  const double n = static_cast<double>(rep.categories.size());
  for (const auto& c : rep.categories) {
    rep.image_auroc += c.image_auroc / n;
    rep.pixel_auroc += c.pixel_auroc / n;
    rep.aupro += c.aupro / n;
    rep.rotation_error_mean += c.rotation_error_mean / n;
    rep.translation_error_mean += c.translation_error_mean / n;
  }
  return rep;
}

std::string format_table(const EvalReport& report) {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-16s %7s %9s %9s %7s %10s %10s\n", "category", "images", "img_auroc",
                "pix_auroc", "aupro", "rot_err", "trans_err");
  os << line;
  auto row = [&](const std::string& name, std::size_t images, double ia, double pa, double ap, double re,
                 double te) {
    std::snprintf(line, sizeof line, "%-16s %7zu %9.4f %9.4f %7.4f %10.5f %10.5f\n", name.c_str(), images, ia, pa,
                  ap, re, te);
    os << line;
  };
  std::size_t total = 0;
  for (const auto& c : report.categories) {
    row(c.name, c.images, c.image_auroc, c.pixel_auroc, c.aupro, c.rotation_error_mean, c.translation_error_mean);
    total += c.images;
  }
  row("mean", total, report.image_auroc, report.pixel_auroc, report.aupro, report.rotation_error_mean,
      report.translation_error_mean);
  return os.str();
}

}  // namespace gspose
