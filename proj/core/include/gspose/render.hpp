#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <vector>

#include "gspose/image.hpp"
#include "gspose/scene.hpp"

namespace gspose {

struct RenderConfig {
  Vec3 background = Vec3::Zero();
  int tile_size = 16;
  /// Per-splat contributions a_i below this are skipped. 0 disables the
  /// cutoff (and with it the finite splat footprint).
  double alpha_cutoff = 1.0 / 255.0;
  /// Blending stops once transmittance drops below this. 0 disables it.
  double transmittance_floor = 1e-4;
  /// Additive diagonal floor on projected covariances, in px^2.
  double low_pass = kDefaultLowPass;

  void validate() const;
};

struct RenderStats {
  std::size_t visible = 0;
  std::size_t culled = 0;
  std::size_t degenerate = 0;
  std::size_t contributions = 0;
};

/// Forward intermediates kept for the exact backward pass. Opaque to
/// callers; tied to the inputs that produced it by a fingerprint.
class RenderState;

struct RenderOutput {
  ImageBuffer image;
  ScalarMap alpha;  // 1 - final transmittance
  RenderStats stats;
  std::shared_ptr<const RenderState> state;
};

/// Per-splat gradients in storage parametrization.
struct CloudGradients {
  std::vector<Vec3> mean;
  std::vector<Vec3> log_scale;
  std::vector<Quat> rotation;
  std::vector<double> opacity_logit;
  std::vector<Vec3> color;
  /// Screen-space gradient of the projected mean (px), used for density
  /// control.
  std::vector<Vec2> mean2d;
  std::vector<std::uint8_t> visible;

  void resize(std::size_t n);
  std::size_t size() const { return mean.size(); }
};

/// Tiled front-to-back alpha compositing of the splats sorted by camera
/// depth (ties by storage index).
RenderOutput render_forward(const GaussianCloud& cloud, const Camera& cam, const RenderConfig& cfg);
ImageBuffer render(const GaussianCloud& cloud, const Camera& cam, const RenderConfig& cfg);

/// Exact gradients of the blended image given dL/dC. `forward` must come
/// from render_forward on the same inputs, else StaleForwardState.
CloudGradients render_backward(const GaussianCloud& cloud, const Camera& cam, const RenderConfig& cfg,
                               const RenderOutput& forward, const ImageBuffer& upstream);
CloudGradients render_backward(const GaussianCloud& cloud, const Camera& cam, const RenderConfig& cfg,
                               const ImageBuffer& upstream);

}  // namespace gspose
