#include "cmls/layers.hpp"

namespace cmls {

Linear::Linear(const std::string& name, int in, int out, Rng& rng)
    : weight(name + ".weight", fan_in_uniform(in, out, in, rng)), bias(name + ".bias", fan_in_uniform(1, out, in, rng)) {}

Linear Linear::zeros(const std::string& name, int in, int out) {
  Linear l;
  l.weight = Parameter(name + ".weight", Matrix::Zero(in, out));
  l.bias = Parameter(name + ".bias", Matrix::Zero(1, out));
  return l;
}

ag::Var Linear::forward(ag::Tape& tape, ag::Var x) const {
  return ag::add_row(ag::matmul(x, tape.param(weight)), tape.param(bias));
}

Matrix Linear::apply(const Matrix& x) const { return (x * weight.value).rowwise() + bias.value.row(0); }

}  // namespace cmls
