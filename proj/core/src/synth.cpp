#include "gspose/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "gspose/error.hpp"

namespace gspose {

std::string to_string(ViewMode m) { return m == ViewMode::Orbit ? "orbit" : "uniform_sphere"; }

std::string to_string(AnomalyKind k) {
  switch (k) {
    case AnomalyKind::MissingCluster: return "missing_cluster";
    case AnomalyKind::RecolorCluster: return "recolor_cluster";
    case AnomalyKind::ExtraCluster: return "extra_cluster";
  }
  return "unknown";
}

ViewMode parse_view_mode(const std::string& s) {
  if (s == "uniform_sphere") return ViewMode::UniformSphere;
  if (s == "orbit") return ViewMode::Orbit;
  throw Error(ErrorCode::Parse, "unknown view mode '" + s + "'");
}

AnomalyKind parse_anomaly_kind(const std::string& s) {
  if (s == "missing_cluster") return AnomalyKind::MissingCluster;
  if (s == "recolor_cluster") return AnomalyKind::RecolorCluster;
  if (s == "extra_cluster") return AnomalyKind::ExtraCluster;
  throw Error(ErrorCode::Parse, "unknown anomaly kind '" + s + "'");
}

std::vector<AnomalySpec> SynthConfig::default_anomalies() {
  return {{AnomalyKind::MissingCluster, 10, 20, 0.0, 0.0},
          {AnomalyKind::RecolorCluster, 10, 20, 0.7, 1.0},
          {AnomalyKind::ExtraCluster, 6, 12, 0.1, 0.2}};
}

void SynthConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(ErrorCode::Config, what);
  };
  require(n_primitives > 0 && splats_per_primitive > 0, "primitive counts must be > 0");
  require(object_radius > 0, "object_radius must be > 0");
  require(n_train_views > 0, "n_train_views must be > 0");
  require(n_test_normal >= 0 && n_test_anomalous >= 0, "test view counts must be >= 0");
  require(n_test_normal + n_test_anomalous > 0, "at least one test view is required");
  require(camera_distance > object_radius, "camera must sit outside the object");
  require(fov_x > 0 && fov_x < std::numbers::pi, "fov_x must be in (0, pi)");
  require(orbit_elevation_min <= orbit_elevation_max, "orbit elevation range is inverted");
  require(width >= 16 && height >= 16, "images must be at least 16x16");
  require(sparsity > 0 && sparsity <= 1, "sparsity must be in (0, 1]");
  require(n_test_anomalous == 0 || !anomalies.empty(), "anomalous views need anomaly specs");
  for (const auto& a : anomalies) {
    require(a.size_min >= 1 && a.size_min <= a.size_max, "anomaly size range invalid");
    require(a.strength_min >= 0 && a.strength_min <= a.strength_max, "anomaly strength range invalid");
  }
  require(min_mask_fraction >= 0 && min_mask_fraction < 1, "min_mask_fraction must be in [0, 1)");
  require(init_points >= 0, "init_points must be >= 0");
}

namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

Vec3 random_direction(Rng& rng) {
  std::normal_distribution<double> n;
  for (;;) {
    Vec3 v(n(rng), n(rng), n(rng));
    if (v.norm() > 1e-9) return v.normalized();
  }
}

Quat random_rotation(Rng& rng) {
  std::normal_distribution<double> n;
  Quat q(n(rng), n(rng), n(rng), n(rng));
  q = normalized(q);
  return q[0] < 0 ? Quat(-q) : q;
}

const std::array<Vec3, 8> kPalette = {Vec3(0.85, 0.20, 0.15), Vec3(0.15, 0.55, 0.85), Vec3(0.95, 0.80, 0.15),
                                      Vec3(0.20, 0.70, 0.30), Vec3(0.60, 0.30, 0.75), Vec3(0.95, 0.55, 0.10),
                                      Vec3(0.80, 0.80, 0.80), Vec3(0.35, 0.25, 0.20)};

Vec3 clamp_color(const Vec3& c) { return c.cwiseMax(0.0).cwiseMin(1.0); }

Camera camera_from_direction(const Vec3& dir, const SynthConfig& cfg) {
  const Vec3 up = std::abs(dir.z()) > 0.999 ? Vec3::UnitX() : Vec3::UnitZ();
  return Camera::look_at(dir * cfg.camera_distance, Vec3::Zero(), up, cfg.width, cfg.height, cfg.fov_x);
}


}  // namespace

std::vector<Camera> sample_cameras(std::uint64_t seed, int count, ViewMode mode, const SynthConfig& cfg) {
  Rng rng(seed);
  std::vector<Camera> cams;
  cams.reserve(count);
  for (int i = 0; i < count; ++i) {
    Vec3 dir;
    if (mode == ViewMode::UniformSphere) {
      dir = random_direction(rng);
    } else {
      const double az = uniform(rng, 0.0, 2.0 * std::numbers::pi);
      const double el = uniform(rng, cfg.orbit_elevation_min, cfg.orbit_elevation_max);
      dir = Vec3(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
    }
    cams.push_back(camera_from_direction(dir, cfg));
  }
  return cams;
}

GaussianCloud generate_object(const SynthConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  const double r = cfg.object_radius;
  GaussianCloud cloud;
  for (int p = 0; p < cfg.n_primitives; ++p) {
    const Vec3 center = random_direction(rng) * r * 0.55 * std::cbrt(uniform(rng, 0.0, 1.0));
    const Vec3 base = kPalette[std::uniform_int_distribution<std::size_t>(0, kPalette.size() - 1)(rng)];
    const bool box = uniform(rng, 0.0, 1.0) < 0.5;
    const Mat3 frame = quat_to_matrix(random_rotation(rng));
    const Vec3 half(uniform(rng, 0.12, 0.3) * r, uniform(rng, 0.12, 0.3) * r, uniform(rng, 0.12, 0.3) * r);
    std::normal_distribution<double> normal;
    for (int s = 0; s < cfg.splats_per_primitive; ++s) {
      Gaussian3D g;
      Vec3 local;
      if (box) {
        local = Vec3(uniform(rng, -1, 1) * half.x(), uniform(rng, -1, 1) * half.y(), uniform(rng, -1, 1) * half.z());
      } else {
        local = Vec3(normal(rng) * half.x(), normal(rng) * half.y(), normal(rng) * half.z()) * 0.6;
      }
      g.mean = center + frame * local;
      g.log_scale = Vec3(std::log(uniform(rng, 0.03, 0.08) * r), std::log(uniform(rng, 0.03, 0.08) * r),
                         std::log(uniform(rng, 0.03, 0.08) * r));
      g.rotation = random_rotation(rng);
      g.opacity_logit = logit(uniform(rng, 0.7, 0.95));
      g.color = clamp_color(base + Vec3(uniform(rng, -0.08, 0.08), uniform(rng, -0.08, 0.08),
                                        uniform(rng, -0.08, 0.08)));
      cloud.splats.push_back(g);
    }
  }
  cloud.recompute_radius();
  return cloud;
}

std::vector<std::size_t> apply_anomaly(GaussianCloud& cloud, AnomalyKind kind, std::size_t seed_splat, int size,
                                       double strength, std::uint64_t rng_seed) {
  if (seed_splat >= cloud.size()) throw Error(ErrorCode::InvalidArgument, "anomaly seed out of range");
  if (size < 1) throw Error(ErrorCode::InvalidArgument, "anomaly size must be >= 1");
  const Vec3 seed = cloud.splats[seed_splat].mean;
  std::vector<std::size_t> idx(cloud.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const std::size_t m = std::min<std::size_t>(static_cast<std::size_t>(size), idx.size());
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return (cloud.splats[a].mean - seed).squaredNorm() < (cloud.splats[b].mean - seed).squaredNorm();
  });
  idx.resize(m);
  std::sort(idx.begin(), idx.end());

  Rng rng(rng_seed);
  switch (kind) {
    case AnomalyKind::MissingCluster: {
      if (m == cloud.size()) throw Error(ErrorCode::InvalidArgument, "anomaly would remove every splat");
      std::vector<Gaussian3D> kept;
      std::size_t j = 0;
      for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (j < idx.size() && idx[j] == i) {
          ++j;
          continue;
        }
        kept.push_back(cloud.splats[i]);
      }
      cloud.splats = std::move(kept);
      break;
    }
    case AnomalyKind::RecolorCluster: {
      Vec3 mean_color = Vec3::Zero();
      for (auto i : idx) mean_color += cloud.splats[i].color;
      mean_color /= static_cast<double>(m);
      // Farthest palette entry from the current color.
      Vec3 target = kPalette[0];
      for (const auto& p : kPalette)
        if ((p - mean_color).norm() > (target - mean_color).norm()) target = p;
      for (auto i : idx) {
        auto& c = cloud.splats[i].color;
        c = clamp_color((1.0 - strength) * c + strength * target);
      }
      break;
    }
    case AnomalyKind::ExtraCluster: {
      const Vec3 centroid = cloud.centroid();
      Vec3 out = seed - centroid;
      out = out.norm() > 1e-9 ? out.normalized() : Vec3::UnitZ();
      const Vec3 color = kPalette[std::uniform_int_distribution<std::size_t>(0, kPalette.size() - 1)(rng)];
      const double offset = strength * cloud.scene_radius;
      for (auto i : idx) {
        Gaussian3D g = cloud.splats[i];
        g.mean += out * offset;
        g.color = clamp_color(0.5 * g.color + 0.5 * (Vec3::Ones() - color));
        g.opacity_logit = logit(0.9);
        cloud.splats.push_back(g);
      }
      break;
    }
  }
  return idx;
}

BinaryMask difference_mask(const ImageBuffer& a, const ImageBuffer& b, double threshold) {
  if (!a.same_shape(b)) throw Error(ErrorCode::ShapeMismatch, "difference_mask shapes differ");
  BinaryMask m(a.width, a.height);
  for (std::size_t i = 0; i < a.pixel_count(); ++i) {
    for (int c = 0; c < a.channels; ++c) {
      if (std::abs(a.data[i * a.channels + c] - b.data[i * a.channels + c]) > threshold) {
        m.data[i] = 1;
        break;
      }
    }
  }
  return close3x3(m);
}

SynthScene generate_scene(const SynthConfig& cfg) {
  cfg.validate();
  SynthScene scene;
  scene.render.background = cfg.background;
  scene.cloud_gt = generate_object(cfg, cfg.seed * 7919 + 1);
  scene.cloud_gt.scene_radius = std::max(scene.cloud_gt.scene_radius, cfg.object_radius);

  // Train views are generated at full density and then thinned, so every
  // sparsity level on a seed is a subset of the dense split.
  const auto train_cams = sample_cameras(cfg.seed * 7919 + 2, cfg.n_train_views, cfg.train_mode, cfg);
  const auto train_keep = sparsify_indices(train_cams.size(), cfg.sparsity);
  for (auto i : train_keep) scene.train.push_back({render(scene.cloud_gt, train_cams[i], scene.render), train_cams[i]});

  const auto normal_cams = sample_cameras(cfg.seed * 7919 + 3, cfg.n_test_normal, cfg.test_mode, cfg);
  for (const auto& cam : normal_cams) {
    TestView tv;
    tv.view = {render(scene.cloud_gt, cam, scene.render), cam};
    tv.mask = BinaryMask(cam.width, cam.height);
    scene.test_normal.push_back(std::move(tv));
  }

  const auto anomalous_cams = sample_cameras(cfg.seed * 7919 + 4, cfg.n_test_anomalous, cfg.test_mode, cfg);
  Rng rng(cfg.seed * 7919 + 5);
  const std::size_t min_pixels =
      static_cast<std::size_t>(std::ceil(cfg.min_mask_fraction * cfg.width * cfg.height));
  for (int v = 0; v < cfg.n_test_anomalous; ++v) {
    const Camera& cam = anomalous_cams[v];
    const AnomalySpec& spec = cfg.anomalies[v % cfg.anomalies.size()];
    const ImageBuffer clean = render(scene.cloud_gt, cam, scene.render);
    // Seeds on the camera-facing half of the object are tried first.
    std::vector<std::size_t> order(scene.cloud_gt.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    std::stable_partition(order.begin(), order.end(), [&](std::size_t i) {
      return (cam.rotation * scene.cloud_gt.splats[i].mean + cam.translation).z() < cfg.camera_distance;
    });
    TestView best;
    std::size_t best_pixels = 0;
    const int attempts = std::min<int>(40, static_cast<int>(order.size()));
    for (int a = 0; a < attempts; ++a) {
      const int size = std::uniform_int_distribution<int>(spec.size_min, spec.size_max)(rng);
      const double strength = uniform(rng, spec.strength_min, std::nextafter(spec.strength_max, 1e300));
      const std::uint64_t op_seed = rng();
      GaussianCloud mutated = scene.cloud_gt;
      apply_anomaly(mutated, spec.kind, order[a], size, strength, op_seed);
      ImageBuffer img = render(mutated, cam, scene.render);
      BinaryMask mask = difference_mask(img, clean);
      const std::size_t pixels = mask.count();
      if (pixels > best_pixels) {
        best_pixels = pixels;
        best.view = {std::move(img), cam};
        best.mask = std::move(mask);
        best.anomalous = true;
        best.kind = spec.kind;
        best.seed_splat = order[a];
        best.cluster_size = size;
        best.strength = strength;
      }
      if (best_pixels >= std::max<std::size_t>(min_pixels, 1)) break;
    }
    if (best_pixels == 0) {
      throw Error(ErrorCode::InvalidArgument, "could not place a visible anomaly for test view " + std::to_string(v));
    }
    scene.test_anomalous.push_back(std::move(best));
  }

  if (cfg.init_points > 0) {
    Rng prng(cfg.seed * 7919 + 6);
    std::normal_distribution<double> noise(0.0, 0.02 * cfg.object_radius);
    std::uniform_int_distribution<std::size_t> pick(0, scene.cloud_gt.size() - 1);
    for (int i = 0; i < cfg.init_points; ++i) {
      const auto& g = scene.cloud_gt.splats[pick(prng)];
      scene.init_points.push_back(g.mean + Vec3(noise(prng), noise(prng), noise(prng)));
      scene.init_colors.push_back(g.color);
    }
  }
  return scene;
}

std::vector<std::size_t> sparsify_indices(std::size_t n, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw Error(ErrorCode::InvalidArgument, "fraction must be in (0, 1]");
  if (n == 0) return {};
  const std::size_t k = std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(fraction * n)), 1, n);
  std::vector<std::size_t> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = i * n / k;
  return out;
}

std::vector<View> sparsify(const std::vector<View>& views, double fraction) {
  std::vector<View> out;
  for (auto i : sparsify_indices(views.size(), fraction)) out.push_back(views[i]);
  return out;
}

}  // namespace gspose
