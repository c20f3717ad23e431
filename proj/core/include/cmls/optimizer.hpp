#pragma once

#include <vector>

#include "cmls/tensor.hpp"

namespace cmls {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.98;
  double epsilon = 1e-9;
};

/// Adam with per-group learning rates. Parameters with trainable == false are skipped.
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  /// Returns the group index.
  std::size_t add_group(ParameterRefs params, double lr);
  void set_lr(std::size_t group, double lr) { groups_.at(group).lr = lr; }
  double lr(std::size_t group) const { return groups_.at(group).lr; }
  std::size_t num_groups() const { return groups_.size(); }
  const ParameterRefs& group_params(std::size_t group) const { return groups_.at(group).params; }

  void zero_grad();
  void step();
  /// Updates only one group; other groups keep their moments untouched.
  void step_group(std::size_t group);
  long steps_taken(std::size_t group) const { return groups_.at(group).t; }

 private:
  struct Group {
    ParameterRefs params;
    double lr = 0.0;
    long t = 0;
    std::vector<Matrix> m, v;
  };
  AdamConfig cfg_;
  std::vector<Group> groups_;
};

/// Rescales gradients so their global L2 norm is at most max_norm; returns the pre-clip norm.
double clip_grad_norm(const ParameterRefs& params, double max_norm);

}  // namespace cmls
