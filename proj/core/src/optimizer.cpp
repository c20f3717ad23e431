#include "cmls/optimizer.hpp"

#include <cmath>

#include "cmls/errors.hpp"

namespace cmls {

std::size_t Adam::add_group(ParameterRefs params, double lr) {
  if (!(lr > 0.0)) throw ValidationError("adam: learning rate must be positive");
  Group g;
  g.lr = lr;
  for (Parameter* p : params) {
    g.m.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    g.v.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
  g.params = std::move(params);
  groups_.push_back(std::move(g));
  return groups_.size() - 1;
}

void Adam::zero_grad() {
  for (auto& g : groups_) zero_grads(g.params);
}

void Adam::step() {
  for (std::size_t i = 0; i < groups_.size(); ++i) step_group(i);
}

void Adam::step_group(std::size_t index) {
  Group& g = groups_.at(index);
  ++g.t;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(g.t));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(g.t));
  for (std::size_t k = 0; k < g.params.size(); ++k) {
    Parameter& p = *g.params[k];
    if (!p.trainable) continue;
    if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols()) continue;
    g.m[k] = cfg_.beta1 * g.m[k] + (1.0 - cfg_.beta1) * p.grad;
    g.v[k] = cfg_.beta2 * g.v[k] + (1.0 - cfg_.beta2) * p.grad.cwiseAbs2();
    p.value.array() -= g.lr * (g.m[k].array() / bc1) / ((g.v[k].array() / bc2).sqrt() + cfg_.epsilon);
  }
}

double clip_grad_norm(const ParameterRefs& params, double max_norm) {
  double sq = 0.0;
  for (const Parameter* p : params)
    if (p->trainable && p->grad.size() == p->value.size()) sq += p->grad.squaredNorm();
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / (norm + 1e-12);
    for (Parameter* p : params)
      if (p->trainable) p->grad *= s;
  }
  return norm;
}

}  // namespace cmls
