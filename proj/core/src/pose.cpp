#include "gspose/pose.hpp"

#include <cmath>
#include <limits>

#include "gspose/error.hpp"

namespace gspose {

void NccMatcher::prepare(const std::vector<View>& train) {
  train_.clear();
  train_.reserve(train.size());
  for (const auto& v : train) train_.push_back(descriptor(v.image));
}

std::vector<double> NccMatcher::descriptor(const ImageBuffer& img) const {
  if (img.empty()) throw Error(ErrorCode::InvalidArgument, "empty image");
  ScalarMap g = gaussian_blur(resize_area(to_gray(img), size_, size_), sigma_);
  double mean = 0.0, energy = 0.0;
  for (double v : g.data) {
    mean += v;
    energy += v * v;
  }
  mean /= static_cast<double>(g.data.size());
  double sq = 0.0;
  for (double& v : g.data) {
    v -= mean;
    sq += v * v;
  }
  const double norm = std::sqrt(sq);
  if (norm <= 1e-10 * std::sqrt(energy) || norm < 1e-300) return std::vector<double>(g.data.size(), 0.0);
  for (double& v : g.data) v /= norm;
  return g.data;
}

std::vector<double> NccMatcher::scores(const ImageBuffer& query) const {
  const std::vector<double> q = descriptor(query);
  std::vector<double> out(train_.size(), 0.0);
  for (std::size_t i = 0; i < train_.size(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < q.size(); ++j) s += q[j] * train_[i][j];
    out[i] = s;
  }
  return out;
}

CoarsePose coarse_pose(const ImageBuffer& query, const std::vector<View>& train,
                       const CoarseMatcher& matcher) {
  if (train.empty()) throw Error(ErrorCode::EmptyTrainingSet, "no training views to match against");
  CoarsePose out;
  out.scores = matcher.scores(query);
  if (out.scores.size() != train.size()) {
    throw Error(ErrorCode::ShapeMismatch, "matcher was prepared on a different training set");
  }
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < out.scores.size(); ++i) {
    if (out.scores[i] > best) {
      best = out.scores[i];
      out.index = i;
    }
  }
  out.camera = train[out.index].camera;
  return out;
}

CoarsePose coarse_pose(const ImageBuffer& query, const std::vector<View>& train) {
  NccMatcher m;
  m.prepare(train);
  return coarse_pose(query, train, m);
}

void RefineConfig::validate() const {
  if (k < 0) throw Error(ErrorCode::Config, "k must be >= 0");
  if (adam.lr <= 0) throw Error(ErrorCode::Config, "pose learning rate must be > 0");
  if (plateau_window < 1) throw Error(ErrorCode::Config, "plateau_window must be >= 1");
  loss.validate();
  render.validate();
}

Camera PoseEstimate::effective_camera() const {
  Camera c = camera;
  c.set_world_to_camera(effective_pose);
  return c;
}

namespace {

struct Evaluation {
  double loss = 0.0;
  ScrewGradient grad;
  bool finite = true;
};

Evaluation evaluate(const ScrewTransform& t, const ImageBuffer& query, const Camera& cam,
                    const GaussianCloud& cloud, GaussianCloud& moved, const RefineConfig& cfg,
                    bool with_gradient) {
  Evaluation e;
  apply_to_cloud(t, cloud, moved);
  const RenderOutput fwd = render_forward(moved, cam, cfg.render);
  const LossResult loss = combined(fwd.image, query, cfg.loss);
  e.loss = loss.value;
  if (!std::isfinite(e.loss)) {
    e.finite = false;
    return e;
  }
  if (!with_gradient) return e;
  const CloudGradients g = render_backward(moved, cam, cfg.render, fwd, loss.grad_a);
  e.grad = pose_jacobian(t, cloud, {g.mean, g.rotation});
  for (double v : e.grad.to_params()) e.finite = e.finite && std::isfinite(v);
  return e;
}

}  // namespace

PoseEstimate refine_pose(const ImageBuffer& query, const Camera& coarse, const GaussianCloud& cloud,
                         const RefineConfig& cfg, const PoseEstimate* resume) {
  cfg.validate();
  coarse.validate();
  if (cloud.empty()) throw Error(ErrorCode::EmptyCloud, "cannot refine against an empty cloud");
  if (query.width != coarse.width || query.height != coarse.height) {
    throw Error(ErrorCode::ShapeMismatch, "query size differs from the camera");
  }

  PoseEstimate est;
  ScrewTransform best = ScrewTransform::identity();
  double best_loss = std::numeric_limits<double>::infinity();
  if (resume) {
    est = *resume;
    est.camera = coarse;
    est.degraded = false;
    est.diagnostic.clear();
    best = resume->transform;
    best_loss = resume->final_loss;
  } else {
    est.camera = coarse;
    est.current = ScrewTransform::identity();
    est.optimizer = AdamState(7, cfg.adam);
  }
  est.optimizer.lr = cfg.adam.lr;

  GaussianCloud moved;
  auto consider = [&](const ScrewTransform& t, double loss) {
    if (loss < best_loss) {
      best_loss = loss;
      best = t;
    }
  };

  for (int step = 0; step < cfg.k; ++step) {
    const Evaluation e = evaluate(est.current, query, coarse, cloud, moved, cfg, true);
    if (!e.finite) {
      est.degraded = true;
      est.diagnostic = "non-finite loss or gradient at step " + std::to_string(est.steps);
      break;
    }
    consider(est.current, e.loss);
    est.loss_trace.push_back(e.loss);
    ++est.steps;
    auto params = est.current.to_params();
    const auto grads = e.grad.to_params();
    adam_step(est.optimizer, params, grads);
    est.current = ScrewTransform::from_params(params);

    if (cfg.early_stop && static_cast<int>(est.loss_trace.size()) > cfg.plateau_window) {
      const double then = est.loss_trace[est.loss_trace.size() - 1 - cfg.plateau_window];
      if (then - e.loss <= cfg.plateau_tol * std::abs(then)) break;
    }
  }

  if (!est.degraded) {
    const Evaluation last = evaluate(est.current, query, coarse, cloud, moved, cfg, false);
    if (last.finite) {
      consider(est.current, last.loss);
    } else {
      est.degraded = true;
      est.diagnostic = "non-finite loss after the final step";
    }
  }
  est.transform = best;
  est.final_loss = best_loss;
  est.effective_pose = coarse.world_to_camera() * to_matrix(est.transform);
  return est;
}

ImageBuffer render_aligned(const PoseEstimate& estimate, const GaussianCloud& cloud,
                           const RenderConfig& cfg) {
  return render(apply_to_cloud(estimate.transform, cloud), estimate.camera, cfg);
}

}  // namespace gspose
