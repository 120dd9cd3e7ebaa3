#include "gspose/optim.hpp"

#include <cmath>
#include <sstream>

#include "gspose/error.hpp"

namespace gspose {

AdamState::AdamState(std::size_t n, const AdamConfig& cfg)
    : m(n, 0.0),
      v(n, 0.0),
      lr(cfg.lr),
      beta1(cfg.beta1),
      beta2(cfg.beta2),
      eps(cfg.eps),
      max_grad_norm(cfg.max_grad_norm) {}

void AdamState::keep(std::span<const std::size_t> indices, std::size_t stride) {
  std::vector<double> nm, nv;
  nm.reserve(indices.size() * stride);
  nv.reserve(indices.size() * stride);
  for (std::size_t idx : indices) {
    for (std::size_t k = 0; k < stride; ++k) {
      nm.push_back(m[idx * stride + k]);
      nv.push_back(v[idx * stride + k]);
    }
  }
  m = std::move(nm);
  v = std::move(nv);
}

void AdamState::grow(std::size_t count) {
  m.resize(m.size() + count, 0.0);
  v.resize(v.size() + count, 0.0);
}

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw Error(ErrorCode::ShapeMismatch, "adam_step: parameter, gradient and moment lengths differ");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      std::ostringstream msg;
      msg << "gradient " << i << " is " << grads[i] << " at step " << state.step;
      throw Error(ErrorCode::NonFiniteGradient, msg.str());
    }
  }
  double clip = 1.0;
  if (state.max_grad_norm > 0.0) {
    double sq = 0.0;
    for (double g : grads) sq += g * g;
    const double norm = std::sqrt(sq);
    if (norm > state.max_grad_norm) clip = state.max_grad_norm / norm;
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i] * clip;
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    params[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
  }
}

std::size_t GroupedAdam::add_group(std::string name, std::size_t size, const AdamConfig& cfg) {
  groups_.push_back({std::move(name), AdamState(size, cfg)});
  return groups_.size() - 1;
}

void GroupedAdam::step(std::size_t group, std::span<double> params, std::span<const double> grads) {
  adam_step(groups_.at(group).state, params, grads);
}

}  // namespace gspose
