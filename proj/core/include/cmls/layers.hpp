#pragma once

#include <string>

#include "cmls/autograd.hpp"

namespace cmls {

/// y = x W + b with W stored as (in x out).
struct Linear {
  Parameter weight;
  Parameter bias;

  Linear() = default;
  Linear(const std::string& name, int in, int out, Rng& rng);
  static Linear zeros(const std::string& name, int in, int out);

  int in_features() const { return static_cast<int>(weight.value.rows()); }
  int out_features() const { return static_cast<int>(weight.value.cols()); }

  ag::Var forward(ag::Tape& tape, ag::Var x) const;
  Matrix apply(const Matrix& x) const;
  void collect(ConstParameterRefs& out) const { out.push_back(&weight); out.push_back(&bias); }
  void collect(ParameterRefs& out) { out.push_back(&weight); out.push_back(&bias); }
};

}  // namespace cmls
