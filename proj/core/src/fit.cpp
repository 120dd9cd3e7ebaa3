#include "gspose/fit.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <numeric>
#include <random>

#include "gspose/error.hpp"
#include "gspose/optim.hpp"
#include "gspose/parallel.hpp"

namespace gspose {

void FitConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(ErrorCode::Config, what);
  };
  require(iterations >= 0, "iterations must be >= 0");
  require(lr_mean > 0 && lr_mean_final > 0 && lr_scale > 0 && lr_rotation > 0 && lr_opacity > 0 &&
              lr_color > 0,
          "learning rates must be > 0");
  require(densify_interval > 0, "densify_interval must be > 0");
  require(densify_grad_threshold > 0, "densify_grad_threshold must be > 0");
  require(prune_opacity_threshold > 0 && prune_opacity_threshold < 1,
          "prune_opacity_threshold must be in (0, 1)");
  require(max_splats > 0, "max_splats must be > 0");
  require(init_count > 0, "init_count must be > 0");
  require(init_radius > 0, "init_radius must be > 0");
  require(init_opacity > 0 && init_opacity < 1, "init_opacity must be in (0, 1)");
  require(scene_extent >= 0, "scene_extent must be >= 0");
  loss.validate();
  render.validate();
}

namespace {

double mean_knn_distance(const std::vector<Vec3>& pts, std::size_t i, int k) {
  std::vector<double> best(k, std::numeric_limits<double>::infinity());
  for (std::size_t j = 0; j < pts.size(); ++j) {
    if (j == i) continue;
    const double d = (pts[j] - pts[i]).squaredNorm();
    if (d < best.back()) {
      best.back() = d;
      std::sort(best.begin(), best.end());
    }
  }
  double sum = 0.0;
  int n = 0;
  for (double d : best) {
    if (std::isfinite(d)) {
      sum += std::sqrt(d);
      ++n;
    }
  }
  return n > 0 ? sum / n : 0.0;
}

struct Packed {
  std::vector<double> mean, log_scale, rotation, opacity, color;
};

void pack(const GaussianCloud& c, Packed& p) {
  const std::size_t n = c.size();
  p.mean.resize(3 * n);
  p.log_scale.resize(3 * n);
  p.rotation.resize(4 * n);
  p.opacity.resize(n);
  p.color.resize(3 * n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& g = c.splats[i];
    for (int k = 0; k < 3; ++k) {
      p.mean[3 * i + k] = g.mean[k];
      p.log_scale[3 * i + k] = g.log_scale[k];
      p.color[3 * i + k] = g.color[k];
    }
    for (int k = 0; k < 4; ++k) p.rotation[4 * i + k] = g.rotation[k];
    p.opacity[i] = g.opacity_logit;
  }
}

void unpack(const Packed& p, GaussianCloud& c) {
  for (std::size_t i = 0; i < c.size(); ++i) {
    auto& g = c.splats[i];
    for (int k = 0; k < 3; ++k) {
      g.mean[k] = p.mean[3 * i + k];
      g.log_scale[k] = p.log_scale[3 * i + k];
      g.color[k] = p.color[3 * i + k];
    }
    for (int k = 0; k < 4; ++k) g.rotation[k] = p.rotation[4 * i + k];
    g.rotation = normalized(g.rotation);
    g.opacity_logit = p.opacity[i];
  }
}

void pack_grads(const CloudGradients& g, Packed& p) {
  const std::size_t n = g.size();
  p.mean.resize(3 * n);
  p.log_scale.resize(3 * n);
  p.rotation.resize(4 * n);
  p.opacity.resize(n);
  p.color.resize(3 * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (int k = 0; k < 3; ++k) {
      p.mean[3 * i + k] = g.mean[i][k];
      p.log_scale[3 * i + k] = g.log_scale[i][k];
      p.color[3 * i + k] = g.color[i][k];
    }
    for (int k = 0; k < 4; ++k) p.rotation[4 * i + k] = g.rotation[i][k];
    p.opacity[i] = g.opacity_logit[i];
  }
}

AdamConfig adam_with_lr(double lr) {
  AdamConfig c;
  c.lr = lr;
  c.eps = 1e-15;
  return c;
}

}  // namespace

GaussianCloud init_from_points(const std::vector<Vec3>& points, const std::vector<Vec3>& colors,
                               double opacity) {
  if (points.empty()) throw Error(ErrorCode::EmptyCloud, "no initialization points");
  if (!colors.empty() && colors.size() != points.size()) {
    throw Error(ErrorCode::ShapeMismatch, "point and color counts differ");
  }
  GaussianCloud cloud;
  cloud.splats.resize(points.size());
  std::vector<double> dist(points.size());
  parallel_for(points.size(), [&](std::size_t i) { dist[i] = mean_knn_distance(points, i, 3); });
  double fallback = 0.0;
  for (double d : dist) fallback = std::max(fallback, d);
  if (fallback <= 0.0) fallback = 0.01;
  for (std::size_t i = 0; i < points.size(); ++i) {
    auto& g = cloud.splats[i];
    g.mean = points[i];
    const double s = dist[i] > 0.0 ? dist[i] : fallback;
    g.log_scale = Vec3::Constant(std::log(s));
    g.opacity_logit = logit(opacity);
    g.color = colors.empty() ? Vec3::Constant(0.5) : colors[i];
  }
  cloud.recompute_radius();
  return cloud;
}

GaussianCloud init_random_in_sphere(std::size_t count, const Vec3& center, double radius,
                                    double opacity, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit;
  std::vector<Vec3> pts(count);
  for (auto& p : pts) {
    Vec3 d(normal(rng), normal(rng), normal(rng));
    if (d.norm() < 1e-12) d = Vec3::UnitX();
    p = center + d.normalized() * radius * std::cbrt(unit(rng));
  }
  return init_from_points(pts, {}, opacity);
}

GaussianCloud backproject_view(const View& view, double depth, int stride, double opacity) {
  if (stride < 1) throw Error(ErrorCode::InvalidArgument, "stride must be >= 1");
  const Camera& cam = view.camera;
  const Mat3 rt = cam.rotation.transpose();
  std::vector<Vec3> pts, colors;
  for (int y = 0; y < view.image.height; y += stride) {
    for (int x = 0; x < view.image.width; x += stride) {
      const Vec3 pc((x - cam.cx) / cam.fx * depth, (y - cam.cy) / cam.fy * depth, depth);
      pts.push_back(rt * (pc - cam.translation));
      colors.emplace_back(view.image.at(x, y, 0), view.image.at(x, y, 1), view.image.at(x, y, 2));
    }
  }
  return init_from_points(pts, colors, opacity);
}

double camera_extent(const std::vector<View>& views) {
  if (views.empty()) throw Error(ErrorCode::NoViews, "no views");
  Vec3 c = Vec3::Zero();
  for (const auto& v : views) c += v.camera.center();
  c /= static_cast<double>(views.size());
  double r = 0.0;
  for (const auto& v : views) r = std::max(r, (v.camera.center() - c).norm());
  return 1.1 * std::max(r, 1e-6);
}

std::pair<Gaussian3D, Gaussian3D> split_splat(const Gaussian3D& g) {
  int axis = 0;
  g.log_scale.maxCoeff(&axis);
  const Vec3 dir = quat_to_matrix(g.rotation).col(axis);
  const double offset = 0.5 * std::exp(g.log_scale[axis]);
  Gaussian3D a = g, b = g;
  a.mean += offset * dir;
  b.mean -= offset * dir;
  a.log_scale[axis] -= std::log(1.6);
  b.log_scale[axis] -= std::log(1.6);
  return {a, b};
}

DensifyOutcome densify_and_prune(GaussianCloud& cloud, const std::vector<double>& avg_grad,
                                 const FitConfig& cfg) {
  if (avg_grad.size() != cloud.size()) throw Error(ErrorCode::ShapeMismatch, "gradient stats size");
  DensifyOutcome out;
  const std::size_t n = cloud.size();
  std::vector<std::uint8_t> prune(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (cloud.splats[i].opacity() < cfg.prune_opacity_threshold) prune[i] = 1;
  }
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < n; ++i) {
    if (!prune[i] && avg_grad[i] > cfg.densify_grad_threshold) candidates.push_back(i);
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [&](std::size_t a, std::size_t b) { return avg_grad[a] > avg_grad[b]; });
  std::size_t survivors = 0;
  for (auto p : prune) survivors += p ? 0 : 1;
  // Each split replaces one splat with two.
  const std::size_t room = cfg.max_splats > survivors ? cfg.max_splats - survivors : 0;
  if (candidates.size() > room) candidates.resize(room);
  std::vector<std::uint8_t> split(n, 0);
  for (auto i : candidates) split[i] = 1;

  std::vector<Gaussian3D> next;
  next.reserve(survivors + candidates.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (prune[i]) {
      ++out.pruned;
    } else if (!split[i]) {
      out.kept.push_back(i);
      next.push_back(cloud.splats[i]);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!split[i]) continue;
    auto [a, b] = split_splat(cloud.splats[i]);
    next.push_back(a);
    next.push_back(b);
    out.appended += 2;
    ++out.split;
  }
  cloud.splats = std::move(next);
  return out;
}

FitResult fit_cloud(const std::vector<View>& views, const FitConfig& cfg, const GaussianCloud* initial,
                    const FitCallbacks& callbacks) {
  cfg.validate();
  if (views.empty()) throw Error(ErrorCode::NoViews, "fit_cloud needs at least one view");
  for (const auto& v : views) {
    v.camera.validate();
    if (v.image.width != v.camera.width || v.image.height != v.camera.height || v.image.channels != 3) {
      throw Error(ErrorCode::ShapeMismatch, "view image does not match its camera");
    }
  }

  FitResult result;
  if (initial) {
    result.cloud = *initial;
  } else if (cfg.init == FitInit::RandomInSphere) {
    result.cloud = init_random_in_sphere(cfg.init_count, cfg.init_center, cfg.init_radius,
                                         cfg.init_opacity, cfg.seed);
  } else {
    throw Error(ErrorCode::Config, "from_points initialization needs an initial cloud");
  }
  GaussianCloud& cloud = result.cloud;
  if (cloud.empty()) throw Error(ErrorCode::EmptyCloud, "initial cloud is empty");
  if (cfg.iterations == 0) return result;

  const double extent = cfg.scene_extent > 0.0 ? cfg.scene_extent : camera_extent(views);
  const int densify_until = cfg.densify_until < 0 ? cfg.iterations / 2 : cfg.densify_until;

  AdamState s_mean(3 * cloud.size(), adam_with_lr(cfg.lr_mean * extent));
  AdamState s_scale(3 * cloud.size(), adam_with_lr(cfg.lr_scale));
  AdamState s_rot(4 * cloud.size(), adam_with_lr(cfg.lr_rotation));
  AdamState s_opac(cloud.size(), adam_with_lr(cfg.lr_opacity));
  AdamState s_color(3 * cloud.size(), adam_with_lr(cfg.lr_color));

  std::vector<double> grad_accum(cloud.size(), 0.0);
  std::vector<double> grad_count(cloud.size(), 0.0);

  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
  std::vector<std::size_t> order;
  std::size_t cursor = 0;

  Packed params, grads;
  for (int it = 1; it <= cfg.iterations; ++it) {
    if (cursor == order.size()) {
      order.resize(views.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::shuffle(order.begin(), order.end(), rng);
      cursor = 0;
    }
    const View& view = views[order[cursor++]];

    const double t = cfg.iterations > 1 ? static_cast<double>(it - 1) / (cfg.iterations - 1) : 0.0;
    s_mean.lr = extent * std::exp((1.0 - t) * std::log(cfg.lr_mean) + t * std::log(cfg.lr_mean_final));

    const RenderOutput fwd = render_forward(cloud, view.camera, cfg.render);
    const LossResult loss = combined(fwd.image, view.image, cfg.loss);
    if (!std::isfinite(loss.value)) {
      throw Error(ErrorCode::DivergedFit, "loss is not finite at iteration " + std::to_string(it));
    }
    result.losses.push_back(loss.value);
    const CloudGradients g = render_backward(cloud, view.camera, cfg.render, fwd, loss.grad_a);

    const double ndc_x = 0.5 * view.camera.width, ndc_y = 0.5 * view.camera.height;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      if (!g.visible[i]) continue;
      grad_accum[i] += std::hypot(g.mean2d[i].x() * ndc_x, g.mean2d[i].y() * ndc_y);
      grad_count[i] += 1.0;
    }

    pack(cloud, params);
    pack_grads(g, grads);
    try {
      adam_step(s_mean, params.mean, grads.mean);
      adam_step(s_scale, params.log_scale, grads.log_scale);
      adam_step(s_rot, params.rotation, grads.rotation);
      adam_step(s_opac, params.opacity, grads.opacity);
      adam_step(s_color, params.color, grads.color);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::NonFiniteGradient) {
        throw Error(ErrorCode::DivergedFit, e.detail() + " at iteration " + std::to_string(it));
      }
      throw;
    }
    unpack(params, cloud);

    if (it >= cfg.densify_from && it <= densify_until && it % cfg.densify_interval == 0) {
      std::vector<double> avg(cloud.size());
      for (std::size_t i = 0; i < cloud.size(); ++i) {
        avg[i] = grad_count[i] > 0.0 ? grad_accum[i] / grad_count[i] : 0.0;
      }
      const DensifyOutcome d = densify_and_prune(cloud, avg, cfg);
      if (cloud.empty()) throw Error(ErrorCode::DivergedFit, "every splat was pruned");
      s_mean.keep(d.kept, 3);
      s_scale.keep(d.kept, 3);
      s_rot.keep(d.kept, 4);
      s_opac.keep(d.kept, 1);
      s_color.keep(d.kept, 3);
      s_mean.grow(3 * d.appended);
      s_scale.grow(3 * d.appended);
      s_rot.grow(4 * d.appended);
      s_opac.grow(d.appended);
      s_color.grow(3 * d.appended);
      grad_accum.assign(cloud.size(), 0.0);
      grad_count.assign(cloud.size(), 0.0);
    }

    if (cfg.log_interval > 0 && (it % cfg.log_interval == 0 || it == cfg.iterations)) {
      FitLogEntry e{it, loss.value, psnr(fwd.image, view.image), cloud.size()};
      result.log.push_back(e);
      if (callbacks.on_log) callbacks.on_log(e);
    }
    if (cfg.checkpoint_interval > 0 && it % cfg.checkpoint_interval == 0 && callbacks.on_checkpoint) {
      callbacks.on_checkpoint(it, cloud);
    }
  }
  cloud.recompute_radius();
  return result;
}

}  // namespace gspose
