#include "gradcheck.hpp"

#include <cmath>
#include <sstream>

namespace gspose::testing {

const char* param_class_name(int c) {
  static const char* names[] = {"mean", "log_scale", "rotation", "opacity_logit", "color"};
  return names[c];
}

double sum_squares(const ImageBuffer& img) {
  double s = 0.0;
  for (double v : img.data) s += v * v;
  return s;
}

namespace {

double* param_ptr(Gaussian3D& g, int cls, int k) {
  switch (cls) {
    case kMean: return &g.mean[k];
    case kLogScale: return &g.log_scale[k];
    case kRotation: return &g.rotation[k];
    case kOpacity: return &g.opacity_logit;
    default: return &g.color[k];
  }
}

int param_dims(int cls) {
  switch (cls) {
    case kRotation: return 4;
    case kOpacity: return 1;
    default: return 3;
  }
}

double analytic_entry(const CloudGradients& g, std::size_t i, int cls, int k) {
  switch (cls) {
    case kMean: return g.mean[i][k];
    case kLogScale: return g.log_scale[i][k];
    case kRotation: return g.rotation[i][k];
    case kOpacity: return g.opacity_logit[i];
    default: return g.color[i][k];
  }
}

}  // namespace

GradCheckResult check_render_gradients(const GaussianCloud& cloud, const Camera& cam, const RenderConfig& cfg) {
  const RenderOutput fwd = render_forward(cloud, cam, cfg);
  ImageBuffer upstream = fwd.image;
  for (auto& v : upstream.data) v *= 2.0;
  const CloudGradients grads = render_backward(cloud, cam, cfg, fwd, upstream);

  // Entries whose magnitude is below this fraction of the class maximum are
  // compared in absolute terms against it instead.
  constexpr double kRelFloor = 1e-6;

  GradCheckResult result;
  double worst = -1.0;
  for (int cls = 0; cls < kParamClassCount; ++cls) {
    double class_max = 0.0;
    for (std::size_t i = 0; i < cloud.size(); ++i)
      for (int k = 0; k < param_dims(cls); ++k) class_max = std::max(class_max, std::abs(analytic_entry(grads, i, cls, k)));

    const double h = cls == kMean ? 1e-6 * cloud.scene_radius : 1e-6;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      for (int k = 0; k < param_dims(cls); ++k) {
        GaussianCloud probe = cloud;
        double* p = param_ptr(probe.splats[i], cls, k);
        const double x0 = *p;
        const double numeric = central_difference(
            [&](double x) {
              *p = x;
              return sum_squares(render(probe, cam, cfg));
            },
            x0, h);
        const double analytic = analytic_entry(grads, i, cls, k);
        const double err = rel_err(analytic, numeric, std::max(1e-12, kRelFloor * class_max));
        result.max_rel[cls] = std::max(result.max_rel[cls], err);
        ++result.checked[cls];
        if (err > worst) {
          worst = err;
          std::ostringstream os;
          os << param_class_name(cls) << "[" << i << "][" << k << "] analytic=" << analytic
             << " numeric=" << numeric;
          result.worst = os.str();
        }
      }
    }
  }
  return result;
}

PoseGradCheckResult check_pose_gradients(const ScrewTransform& t, const GaussianCloud& cloud, const Camera& cam,
                                         const RenderConfig& cfg, double h) {
  const GaussianCloud moved = apply_to_cloud(t, cloud);
  const RenderOutput fwd = render_forward(moved, cam, cfg);
  ImageBuffer upstream = fwd.image;
  for (auto& v : upstream.data) v *= 2.0;
  const CloudGradients g = render_backward(moved, cam, cfg, fwd, upstream);
  const ScrewGradient sg = pose_jacobian(t, cloud, {g.mean, g.rotation});

  PoseGradCheckResult r;
  r.analytic = sg.to_params();
  const auto base = t.to_params();
  double max_abs = 0.0;
  for (double v : r.analytic) max_abs = std::max(max_abs, std::abs(v));
  for (int k = 0; k < 7; ++k) {
    auto params = base;
    r.numeric[k] = central_difference(
        [&](double x) {
          params[k] = x;
          return sum_squares(render(apply_to_cloud(ScrewTransform::from_params(params), cloud), cam, cfg));
        },
        base[k], h);
    r.max_rel = std::max(r.max_rel, rel_err(r.analytic[k], r.numeric[k], std::max(1e-12, 1e-6 * max_abs)));
  }
  return r;
}

}  // namespace gspose::testing
