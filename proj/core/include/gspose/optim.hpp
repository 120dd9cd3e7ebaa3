#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace gspose {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Gradient max-norm clip; 0 disables clipping.
  double max_grad_norm = 0.0;
};

/// Bias-corrected Adam moments over a flat parameter vector.
struct AdamState {
  std::size_t step = 0;
  std::vector<double> m;
  std::vector<double> v;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double max_grad_norm = 0.0;

  AdamState() = default;
  AdamState(std::size_t n, const AdamConfig& cfg);

  std::size_t size() const { return m.size(); }
  /// Keeps moments of the retained entries, in order. Used after pruning.
  void keep(std::span<const std::size_t> indices, std::size_t stride);
  /// Appends zeroed moments for `count` new entries.
  void grow(std::size_t count);
};

/// One Adam update in place. Throws ShapeMismatch on length mismatch and
/// NonFiniteGradient (with the offending index) on NaN/inf gradients.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads);

/// Named parameter groups, each with its own learning rate and moments.
class GroupedAdam {
 public:
  struct Group {
    std::string name;
    AdamState state;
  };

  std::size_t add_group(std::string name, std::size_t size, const AdamConfig& cfg);
  Group& group(std::size_t i) { return groups_[i]; }
  const Group& group(std::size_t i) const { return groups_[i]; }
  std::size_t group_count() const { return groups_.size(); }
  void step(std::size_t group, std::span<double> params, std::span<const double> grads);

 private:
  std::vector<Group> groups_;
};

}  // namespace gspose
