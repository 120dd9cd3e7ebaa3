#include "gspose/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "gspose/error.hpp"
#include "gspose/parallel.hpp"

namespace gspose {

void RenderConfig::validate() const {
  if (tile_size < 1) throw Error(ErrorCode::InvalidArgument, "tile_size must be >= 1");
  if (!(alpha_cutoff >= 0.0 && alpha_cutoff < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "alpha_cutoff must be in [0, 1)");
  }
  if (!(transmittance_floor >= 0.0 && transmittance_floor < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "transmittance_floor must be in [0, 1)");
  }
  if (!(low_pass >= 0.0)) throw Error(ErrorCode::InvalidArgument, "low_pass must be >= 0");
}

void CloudGradients::resize(std::size_t n) {
  mean.assign(n, Vec3::Zero());
  log_scale.assign(n, Vec3::Zero());
  rotation.assign(n, Quat::Zero());
  opacity_logit.assign(n, 0.0);
  color.assign(n, Vec3::Zero());
  mean2d.assign(n, Vec2::Zero());
  visible.assign(n, 0);
}

namespace {

struct Splat2D {
  ProjectedGaussian proj;
  Mat2 conic = Mat2::Zero();
  double opacity = 0.0;
  int tile_x0 = 0, tile_y0 = 0, tile_x1 = -1, tile_y1 = -1;  // inclusive
};

struct Entry {
  std::uint32_t local;  // index into the tile's splat list
  double a;
  double transmittance;  // before this splat
};

struct TileData {
  std::vector<std::uint32_t> splats;    // global indices in depth order
  std::vector<std::uint32_t> offsets;   // per pixel start into entries, size pixels+1
  std::vector<Entry> entries;
};

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

template <typename T>
std::uint64_t mix(std::uint64_t h, const T& v) {
  return fnv1a(h, &v, sizeof(T));
}

std::uint64_t fingerprint(const GaussianCloud& cloud, const Camera& cam, const RenderConfig& cfg) {
  std::uint64_t h = 1469598103934665603ull;
  h = mix(h, cloud.splats.size());
  for (const auto& s : cloud.splats) {
    h = fnv1a(h, s.mean.data(), sizeof(double) * 3);
    h = fnv1a(h, s.log_scale.data(), sizeof(double) * 3);
    h = fnv1a(h, s.rotation.data(), sizeof(double) * 4);
    h = mix(h, s.opacity_logit);
    h = fnv1a(h, s.color.data(), sizeof(double) * 3);
  }
  h = mix(h, cam.width);
  h = mix(h, cam.height);
  for (double v : {cam.fx, cam.fy, cam.cx, cam.cy, cam.near, cam.far}) h = mix(h, v);
  h = fnv1a(h, cam.rotation.data(), sizeof(double) * 9);
  h = fnv1a(h, cam.translation.data(), sizeof(double) * 3);
  h = fnv1a(h, cfg.background.data(), sizeof(double) * 3);
  h = mix(h, cfg.tile_size);
  h = mix(h, cfg.alpha_cutoff);
  h = mix(h, cfg.transmittance_floor);
  h = mix(h, cfg.low_pass);
  return h;
}

}  // namespace

class RenderState {
 public:
  std::uint64_t fingerprint = 0;
  int tiles_x = 0, tiles_y = 0;
  std::vector<Splat2D> splats;  // indexed like the cloud
  std::vector<TileData> tiles;
};

RenderOutput render_forward(const GaussianCloud& cloud, const Camera& cam, const RenderConfig& cfg) {
  if (cloud.empty()) throw Error(ErrorCode::EmptyCloud, "cannot render an empty cloud");
  cfg.validate();
  cam.validate();

  auto state = std::make_shared<RenderState>();
  state->fingerprint = fingerprint(cloud, cam, cfg);
  const int ts = cfg.tile_size;
  state->tiles_x = (cam.width + ts - 1) / ts;
  state->tiles_y = (cam.height + ts - 1) / ts;

  const std::size_t n = cloud.size();
  state->splats.resize(n);
  std::vector<std::uint8_t> status(n, 0);  // 0 visible, 1 culled, 2 degenerate, 3 empty footprint
  parallel_for(n, [&](std::size_t i) {
    Splat2D& s = state->splats[i];
    s.proj = project_gaussian(cloud.splats[i], cam, cfg.low_pass);
    if (!s.proj.visible()) {
      status[i] = 1;
      return;
    }
    const Mat2& cov = s.proj.cov2d;
    const double det = cov.determinant();
    if (!std::isfinite(det) || det <= 1e-12 || !s.proj.mean2d.allFinite()) {
      status[i] = 2;
      return;
    }
    s.conic << cov(1, 1) / det, -cov(0, 1) / det, -cov(1, 0) / det, cov(0, 0) / det;
    s.opacity = cloud.splats[i].opacity();

    double x0 = 0, y0 = 0, x1 = cam.width - 1, y1 = cam.height - 1;
    if (cfg.alpha_cutoff > 0.0) {
      if (s.opacity < cfg.alpha_cutoff) {
        status[i] = 3;
        return;
      }
      // a >= cutoff only inside dT cov^-1 d <= 2 ln(alpha / cutoff), which
      // lies within a circle of radius sqrt(2 ln(alpha/cutoff) lambda_max).
      const double mid = 0.5 * (cov(0, 0) + cov(1, 1));
      const double lambda_max = mid + std::sqrt(std::max(0.0, mid * mid - det));
      const double radius = std::sqrt(2.0 * std::log(s.opacity / cfg.alpha_cutoff) * lambda_max) + 1.0;
      x0 = std::max(x0, std::floor(s.proj.mean2d.x() - radius));
      y0 = std::max(y0, std::floor(s.proj.mean2d.y() - radius));
      x1 = std::min(x1, std::ceil(s.proj.mean2d.x() + radius));
      y1 = std::min(y1, std::ceil(s.proj.mean2d.y() + radius));
      if (x0 > x1 || y0 > y1) {
        status[i] = 3;
        return;
      }
    }
    s.tile_x0 = static_cast<int>(x0) / ts;
    s.tile_y0 = static_cast<int>(y0) / ts;
    s.tile_x1 = static_cast<int>(x1) / ts;
    s.tile_y1 = static_cast<int>(y1) / ts;
  });

  RenderOutput out;
  std::vector<std::uint32_t> order;
  order.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (status[i] == 0) {
      order.push_back(static_cast<std::uint32_t>(i));
      ++out.stats.visible;
    } else if (status[i] == 1) {
      ++out.stats.culled;
    } else if (status[i] == 2) {
      ++out.stats.degenerate;
    }
  }
  std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    return state->splats[a].proj.depth < state->splats[b].proj.depth;
  });

  state->tiles.resize(static_cast<std::size_t>(state->tiles_x) * state->tiles_y);
  for (std::uint32_t idx : order) {
    const Splat2D& s = state->splats[idx];
    for (int ty = s.tile_y0; ty <= s.tile_y1; ++ty) {
      for (int tx = s.tile_x0; tx <= s.tile_x1; ++tx) {
        state->tiles[static_cast<std::size_t>(ty) * state->tiles_x + tx].splats.push_back(idx);
      }
    }
  }

  out.image = ImageBuffer(cam.width, cam.height, 3);
  out.alpha = ScalarMap(cam.width, cam.height);
  std::vector<std::size_t> tile_contrib(state->tiles.size(), 0);

  parallel_for(state->tiles.size(), [&](std::size_t t) {
    TileData& tile = state->tiles[t];
    const int tx = static_cast<int>(t % state->tiles_x);
    const int ty = static_cast<int>(t / state->tiles_x);
    const int px0 = tx * ts, py0 = ty * ts;
    const int px1 = std::min(px0 + ts, cam.width), py1 = std::min(py0 + ts, cam.height);
    const int tw = px1 - px0;
    tile.offsets.assign(static_cast<std::size_t>(tw) * (py1 - py0) + 1, 0);

    for (int py = py0; py < py1; ++py) {
      for (int px = px0; px < px1; ++px) {
        const std::size_t local_pixel = static_cast<std::size_t>(py - py0) * tw + (px - px0);
        tile.offsets[local_pixel] = static_cast<std::uint32_t>(tile.entries.size());
        double transmittance = 1.0;
        double c[3] = {0.0, 0.0, 0.0};
        for (std::size_t j = 0; j < tile.splats.size(); ++j) {
          const std::uint32_t idx = tile.splats[j];
          const Splat2D& s = state->splats[idx];
          const double dx = px - s.proj.mean2d.x();
          const double dy = py - s.proj.mean2d.y();
          const double power =
              -0.5 * (s.conic(0, 0) * dx * dx + 2.0 * s.conic(0, 1) * dx * dy + s.conic(1, 1) * dy * dy);
          const double a = s.opacity * std::exp(power);
          if (a < cfg.alpha_cutoff) continue;
          tile.entries.push_back({static_cast<std::uint32_t>(j), a, transmittance});
          const Vec3& col = cloud.splats[idx].color;
          const double w = a * transmittance;
          c[0] += col.x() * w;
          c[1] += col.y() * w;
          c[2] += col.z() * w;
          transmittance *= (1.0 - a);
          if (transmittance < cfg.transmittance_floor) break;
        }
        for (int ch = 0; ch < 3; ++ch) out.image.at(px, py, ch) = c[ch] + cfg.background[ch] * transmittance;
        out.alpha.at(px, py) = 1.0 - transmittance;
      }
    }
    tile.offsets.back() = static_cast<std::uint32_t>(tile.entries.size());
    tile_contrib[t] = tile.entries.size();
  });
  out.stats.contributions = std::accumulate(tile_contrib.begin(), tile_contrib.end(), std::size_t{0});
  out.state = std::move(state);
  return out;
}

ImageBuffer render(const GaussianCloud& cloud, const Camera& cam, const RenderConfig& cfg) {
  return render_forward(cloud, cam, cfg).image;
}

namespace {

// Accumulated screen-space gradients for one splat.
struct Grad2D {
  double mean2d[2];
  double conic[3];  // full-matrix gradient entries (00, 01 == 10, 11)
  double opacity;
  double color[3];
};

Quat rotation_matrix_grad_to_quat(const Quat& q_stored, const Mat3& g) {
  const double n = q_stored.norm();
  const Quat q = q_stored / n;
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Quat gq;
  gq[0] = 2 * (-z * g(0, 1) + y * g(0, 2) + z * g(1, 0) - x * g(1, 2) - y * g(2, 0) + x * g(2, 1));
  gq[1] = 2 * (y * g(0, 1) + z * g(0, 2) + y * g(1, 0) - 2 * x * g(1, 1) - w * g(1, 2) + z * g(2, 0) +
               w * g(2, 1) - 2 * x * g(2, 2));
  gq[2] = 2 * (-2 * y * g(0, 0) + x * g(0, 1) + w * g(0, 2) + x * g(1, 0) + z * g(1, 2) - w * g(2, 0) +
               z * g(2, 1) - 2 * y * g(2, 2));
  gq[3] = 2 * (-2 * z * g(0, 0) - w * g(0, 1) + x * g(0, 2) + w * g(1, 0) - 2 * z * g(1, 1) +
               y * g(1, 2) + x * g(2, 0) + y * g(2, 1));
  return (gq - q * q.dot(gq)) / n;
}

}  // namespace

CloudGradients render_backward(const GaussianCloud& cloud, const Camera& cam, const RenderConfig& cfg,
                               const RenderOutput& forward, const ImageBuffer& upstream) {
  if (!forward.state || forward.state->fingerprint != fingerprint(cloud, cam, cfg)) {
    throw Error(ErrorCode::StaleForwardState, "forward state does not match backward inputs");
  }
  if (upstream.width != cam.width || upstream.height != cam.height || upstream.channels != 3) {
    throw Error(ErrorCode::ShapeMismatch, "upstream gradient must be W x H x 3");
  }
  const RenderState& state = *forward.state;
  const int ts = cfg.tile_size;
  const std::size_t n = cloud.size();

  std::vector<std::vector<Grad2D>> tile_grads(state.tiles.size());
  parallel_for(state.tiles.size(), [&](std::size_t t) {
    const TileData& tile = state.tiles[t];
    auto& grads = tile_grads[t];
    grads.assign(tile.splats.size(), Grad2D{});
    if (tile.entries.empty()) return;
    const int tx = static_cast<int>(t % state.tiles_x);
    const int ty = static_cast<int>(t / state.tiles_x);
    const int px0 = tx * ts, py0 = ty * ts;
    const int px1 = std::min(px0 + ts, cam.width), py1 = std::min(py0 + ts, cam.height);
    const int tw = px1 - px0;

    for (int py = py0; py < py1; ++py) {
      for (int px = px0; px < px1; ++px) {
        const std::size_t local_pixel = static_cast<std::size_t>(py - py0) * tw + (px - px0);
        const std::uint32_t begin = tile.offsets[local_pixel];
        const std::uint32_t end = tile.offsets[local_pixel + 1];
        if (begin == end) continue;
        const double g[3] = {upstream.at(px, py, 0), upstream.at(px, py, 1), upstream.at(px, py, 2)};
        if (g[0] == 0.0 && g[1] == 0.0 && g[2] == 0.0) continue;

        // Normalized suffix: color seen behind splat i divided by the
        // transmittance right behind it. Starts at the background.
        double suffix[3] = {cfg.background.x(), cfg.background.y(), cfg.background.z()};
        for (std::uint32_t e = end; e-- > begin;) {
          const Entry& entry = tile.entries[e];
          const std::uint32_t idx = tile.splats[entry.local];
          const Splat2D& s = state.splats[idx];
          const Vec3& col = cloud.splats[idx].color;
          const double a = entry.a;
          const double tr = entry.transmittance;
          Grad2D& gs = grads[entry.local];

          double d_a = 0.0;
          for (int ch = 0; ch < 3; ++ch) {
            gs.color[ch] += g[ch] * a * tr;
            d_a += g[ch] * tr * (col[ch] - suffix[ch]);
            suffix[ch] = col[ch] * a + (1.0 - a) * suffix[ch];
          }

          const double dx = px - s.proj.mean2d.x();
          const double dy = py - s.proj.mean2d.y();
          const double gauss = s.opacity > 0.0 ? a / s.opacity : 0.0;
          gs.opacity += d_a * gauss;
          const double d_power = d_a * a;
          gs.mean2d[0] += d_power * (s.conic(0, 0) * dx + s.conic(0, 1) * dy);
          gs.mean2d[1] += d_power * (s.conic(0, 1) * dx + s.conic(1, 1) * dy);
          gs.conic[0] += d_power * (-0.5 * dx * dx);
          gs.conic[1] += d_power * (-0.5 * dx * dy);
          gs.conic[2] += d_power * (-0.5 * dy * dy);
        }
      }
    }
  });

  // Fixed tile order reduction.
  std::vector<Grad2D> total(n, Grad2D{});
  for (std::size_t t = 0; t < state.tiles.size(); ++t) {
    const auto& tile = state.tiles[t];
    for (std::size_t j = 0; j < tile.splats.size(); ++j) {
      Grad2D& dst = total[tile.splats[j]];
      const Grad2D& src = tile_grads[t][j];
      for (int k = 0; k < 2; ++k) dst.mean2d[k] += src.mean2d[k];
      for (int k = 0; k < 3; ++k) dst.conic[k] += src.conic[k];
      dst.opacity += src.opacity;
      for (int k = 0; k < 3; ++k) dst.color[k] += src.color[k];
    }
  }

  std::vector<std::uint8_t> listed(n, 0);
  for (const auto& tile : state.tiles) {
    for (auto idx : tile.splats) listed[idx] = 1;
  }

  CloudGradients out;
  out.resize(n);
  parallel_for(n, [&](std::size_t i) {
    if (!listed[i]) return;
    const Splat2D& s = state.splats[i];
    const Gaussian3D& g = cloud.splats[i];
    const Grad2D& gs = total[i];
    out.visible[i] = 1;

    out.color[i] = Vec3(gs.color[0], gs.color[1], gs.color[2]);
    out.opacity_logit[i] = gs.opacity * s.opacity * (1.0 - s.opacity);
    out.mean2d[i] = Vec2(gs.mean2d[0], gs.mean2d[1]);

    // conic = cov2d^-1  =>  dL/dcov2d = -conic G conic.
    Mat2 g_conic;
    g_conic << gs.conic[0], gs.conic[1], gs.conic[1], gs.conic[2];
    const Mat2 g_cov2d = -s.conic * g_conic * s.conic;

    const Mat3& w = cam.rotation;
    const Mat23& j = s.proj.jacobian;
    const Mat3 cov_cam = w * s.proj.cov3d * w.transpose();
    const Mat3 g_cov_cam = j.transpose() * g_cov2d * j;
    Mat3 g_cov3d = w.transpose() * g_cov_cam * w;
    g_cov3d = 0.5 * (g_cov3d + g_cov3d.transpose()).eval();
    const Mat23 g_j = 2.0 * g_cov2d * j * cov_cam;

    const Vec3& p = s.proj.cam_point;
    const double iz = 1.0 / p.z(), iz2 = iz * iz, iz3 = iz2 * iz;
    Vec3 g_p = Vec3::Zero();
    g_p.x() += gs.mean2d[0] * cam.fx * iz;
    g_p.y() += gs.mean2d[1] * cam.fy * iz;
    g_p.z() += -gs.mean2d[0] * cam.fx * p.x() * iz2 - gs.mean2d[1] * cam.fy * p.y() * iz2;
    g_p.x() += g_j(0, 2) * (-cam.fx * iz2);
    g_p.y() += g_j(1, 2) * (-cam.fy * iz2);
    g_p.z() += g_j(0, 0) * (-cam.fx * iz2) + g_j(0, 2) * (2.0 * cam.fx * p.x() * iz3) +
               g_j(1, 1) * (-cam.fy * iz2) + g_j(1, 2) * (2.0 * cam.fy * p.y() * iz3);
    out.mean[i] = w.transpose() * g_p;

    // cov3d = M M^T with M = R S.
    const Mat3 rot = quat_to_matrix(g.rotation);
    const Vec3 scale = g.scale();
    const Mat3 m = rot * scale.asDiagonal();
    const Mat3 g_m = 2.0 * g_cov3d * m;
    const Mat3 g_rot = g_m * scale.asDiagonal();
    const Mat3 rt_gm = rot.transpose() * g_m;
    for (int k = 0; k < 3; ++k) out.log_scale[i][k] = rt_gm(k, k) * scale[k];
    out.rotation[i] = rotation_matrix_grad_to_quat(g.rotation, g_rot);
  });
  return out;
}

CloudGradients render_backward(const GaussianCloud& cloud, const Camera& cam, const RenderConfig& cfg,
                               const ImageBuffer& upstream) {
  return render_backward(cloud, cam, cfg, render_forward(cloud, cam, cfg), upstream);
}

}  // namespace gspose
