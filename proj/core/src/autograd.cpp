#include "cmls/autograd.hpp"

#include <cassert>
#include <cmath>
#include <numbers>

#include "cmls/errors.hpp"

namespace cmls::ag {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ValidationError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                          std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                          std::to_string(b.cols()));
}

}  // namespace

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::input(Matrix value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = record_;
  return push(std::move(n));
}

Var Tape::param(const Parameter& p) {
  Node n;
  n.ref = &p.value;
  n.requires_grad = record_ && p.trainable;
  n.param = n.requires_grad ? &p : nullptr;
  return push(std::move(n));
}

Var Tape::record(Matrix value, std::initializer_list<Var> parents, BackwardFn fn) {
  return record(std::move(value), std::span<const Var>(parents.begin(), parents.size()), std::move(fn));
}

Var Tape::record(Matrix value, std::span<const Var> parents, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  if (record_) {
    for (const Var& p : parents) {
      assert(p.tape_ == this);
      if (nodes_[p.id_].requires_grad) {
        n.requires_grad = true;
        break;
      }
    }
  }
  if (n.requires_grad) n.backward = std::move(fn);
  return push(std::move(n));
}

Matrix Tape::grad(Var v) const {
  const Node& n = nodes_[v.id_];
  if (!n.has_grad) return Matrix::Zero(value(v).rows(), value(v).cols());
  return n.grad;
}

void Tape::accumulate(Var v, const Matrix& g) {
  Node& n = nodes_[v.id_];
  if (!n.requires_grad) return;
  if (!n.has_grad) {
    n.grad = g;
    n.has_grad = true;
  } else {
    n.grad += g;
  }
}

void Tape::backward(Var scalar_out) {
  if (value(scalar_out).size() != 1) throw ValidationError("backward: output is not a scalar");
  backward(scalar_out, Matrix::Ones(1, 1));
}

void Tape::backward(Var out, const Matrix& seed) {
  if (!record_) throw ValidationError("backward: tape was built without recording");
  require_same_shape(value(out), seed, "backward seed");
  accumulate(out, seed);
  for (int i = out.id_; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.has_grad) continue;
    if (n.backward) n.backward(*this, n.ref != nullptr ? *n.ref : n.value, n.grad);
    if (n.param != nullptr) n.param->grad += n.grad;
  }
}

Var detach(Var a) { return a.tape().constant(a.value()); }

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) throw ValidationError("matmul: inner dimension mismatch");
  Matrix out = a.value() * b.value();
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, const Matrix&, const Matrix& g) {
    if (t.requires_grad(a)) t.accumulate(a, g * b.value().transpose());
    if (t.requires_grad(b)) t.accumulate(b, a.value().transpose() * g);
  });
}

Var matmul_nt(Var a, Var b) {
  if (a.cols() != b.cols()) throw ValidationError("matmul_nt: inner dimension mismatch");
  Matrix out = a.value() * b.value().transpose();
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, const Matrix&, const Matrix& g) {
    if (t.requires_grad(a)) t.accumulate(a, g * b.value());
    if (t.requires_grad(b)) t.accumulate(b, g.transpose() * a.value());
  });
}

Var add(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "add");
  Matrix out = a.value() + b.value();
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, const Matrix&, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "sub");
  Matrix out = a.value() - b.value();
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, const Matrix&, const Matrix& g) {
    t.accumulate(a, g);
    if (t.requires_grad(b)) t.accumulate(b, -g);
  });
}

Var mul(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "mul");
  Matrix out = a.value().cwiseProduct(b.value());
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, const Matrix&, const Matrix& g) {
    if (t.requires_grad(a)) t.accumulate(a, g.cwiseProduct(b.value()));
    if (t.requires_grad(b)) t.accumulate(b, g.cwiseProduct(a.value()));
  });
}

Var add_row(Var a, Var row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw ValidationError("add_row: bias must be 1 x cols");
  Matrix out = a.value().rowwise() + row.value().row(0);
  return a.tape().record(std::move(out), {a, row}, [a, row](Tape& t, const Matrix&, const Matrix& g) {
    t.accumulate(a, g);
    if (t.requires_grad(row)) t.accumulate(row, g.colwise().sum());
  });
}

Var scale(Var a, Real s) {
  Matrix out = a.value() * s;
  return a.tape().record(std::move(out), {a}, [a, s](Tape& t, const Matrix&, const Matrix& g) { t.accumulate(a, g * s); });
}

Var add_scalar(Var a, Real s) {
  Matrix out = a.value().array() + s;
  return a.tape().record(std::move(out), {a}, [a](Tape& t, const Matrix&, const Matrix& g) { t.accumulate(a, g); });
}

Var tanh(Var a) {
  Matrix out = a.value().array().tanh();
  return a.tape().record(std::move(out), {a}, [a](Tape& t, const Matrix& y, const Matrix& g) {
    t.accumulate(a, (g.array() * (1.0 - y.array().square())).matrix());
  });
}

Var sigmoid(Var a) {
  Matrix out = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  return a.tape().record(std::move(out), {a}, [a](Tape& t, const Matrix& y, const Matrix& g) {
    t.accumulate(a, (g.array() * y.array() * (1.0 - y.array())).matrix());
  });
}

Var relu(Var a) {
  Matrix out = a.value().cwiseMax(0.0);
  return a.tape().record(std::move(out), {a}, [a](Tape& t, const Matrix&, const Matrix& g) {
    t.accumulate(a, (a.value().array() > 0.0).select(g, 0.0).matrix());
  });
}

Var gelu(Var a) {
  const Matrix& x = a.value();
  Matrix out = x.unaryExpr([](Real v) { return 0.5 * v * (1.0 + std::erf(v / std::numbers::sqrt2)); });
  return a.tape().record(std::move(out), {a}, [a](Tape& t, const Matrix&, const Matrix& g) {
    constexpr Real inv_sqrt_2pi = 0.3989422804014327;
    Matrix d = a.value().unaryExpr([](Real v) {
      return 0.5 * (1.0 + std::erf(v / std::numbers::sqrt2)) + v * inv_sqrt_2pi * std::exp(-0.5 * v * v);
    });
    t.accumulate(a, g.cwiseProduct(d));
  });
}

Var softmax_rows(Var a) {
  const Matrix& x = a.value();
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Real mx = x.row(i).maxCoeff();
    out.row(i) = (x.row(i).array() - mx).exp().matrix();
    out.row(i) /= out.row(i).sum();
  }
  return a.tape().record(std::move(out), {a}, [a](Tape& t, const Matrix& y, const Matrix& g) {
    Matrix dx(y.rows(), y.cols());
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      const Real dot = g.row(i).dot(y.row(i));
      dx.row(i) = (y.row(i).array() * (g.row(i).array() - dot)).matrix();
    }
    t.accumulate(a, dx);
  });
}

Var log_softmax_rows(Var a) {
  const Matrix& x = a.value();
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Real mx = x.row(i).maxCoeff();
    const Real lse = mx + std::log((x.row(i).array() - mx).exp().sum());
    out.row(i) = x.row(i).array() - lse;
  }
  return a.tape().record(std::move(out), {a}, [a](Tape& t, const Matrix& y, const Matrix& g) {
    Matrix dx(y.rows(), y.cols());
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      dx.row(i) = g.row(i).array() - y.row(i).array().exp() * g.row(i).sum();
    }
    t.accumulate(a, dx);
  });
}

Var layer_norm_rows(Var x, Var gamma, Var beta, Real eps) {
  const Matrix& xv = x.value();
  const Eigen::Index n = xv.rows(), c = xv.cols();
  if (gamma.rows() != 1 || gamma.cols() != c || beta.rows() != 1 || beta.cols() != c)
    throw ValidationError("layer_norm_rows: gamma/beta must be 1 x cols");
  Matrix xhat(n, c);
  Vector inv_std(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Real mean = xv.row(i).mean();
    const Real var = (xv.row(i).array() - mean).square().mean();
    inv_std(i) = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = (xv.row(i).array() - mean) * inv_std(i);
  }
  Matrix out = (xhat.array().rowwise() * gamma.value().row(0).array()).rowwise() + beta.value().row(0).array();
  return x.tape().record(std::move(out), {x, gamma, beta},
                         [x, gamma, beta, xhat, inv_std](Tape& t, const Matrix&, const Matrix& g) {
                           if (t.requires_grad(gamma)) t.accumulate(gamma, g.cwiseProduct(xhat).colwise().sum());
                           if (t.requires_grad(beta)) t.accumulate(beta, g.colwise().sum());
                           if (t.requires_grad(x)) {
                             const Eigen::Index c = g.cols();
                             Matrix gx = g.array().rowwise() * gamma.value().row(0).array();
                             Matrix dx(g.rows(), c);
                             for (Eigen::Index i = 0; i < g.rows(); ++i) {
                               const Real m1 = gx.row(i).mean();
                               const Real m2 = gx.row(i).dot(xhat.row(i)) / static_cast<Real>(c);
                               dx.row(i) = (gx.row(i).array() - m1 - xhat.row(i).array() * m2) * inv_std(i);
                             }
                             t.accumulate(x, dx);
                           }
                         });
}

Var col_slice(Var a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw ValidationError("col_slice: out of range");
  Matrix out = a.value().middleCols(start, count);
  return a.tape().record(std::move(out), {a}, [a, start, count](Tape& t, const Matrix&, const Matrix& g) {
    Matrix full = Matrix::Zero(a.rows(), a.cols());
    full.middleCols(start, count) = g;
    t.accumulate(a, full);
  });
}

Var row_slice(Var a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) throw ValidationError("row_slice: out of range");
  Matrix out = a.value().middleRows(start, count);
  return a.tape().record(std::move(out), {a}, [a, start, count](Tape& t, const Matrix&, const Matrix& g) {
    Matrix full = Matrix::Zero(a.rows(), a.cols());
    full.middleRows(start, count) = g;
    t.accumulate(a, full);
  });
}

Var hconcat(std::span<const Var> parts) {
  if (parts.empty()) throw ValidationError("hconcat: no inputs");
  const Eigen::Index rows = parts[0].rows();
  Eigen::Index cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) throw ValidationError("hconcat: row mismatch");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Eigen::Index off = 0;
  for (const Var& p : parts) {
    out.middleCols(off, p.cols()) = p.value();
    off += p.cols();
  }
  std::vector<Var> saved(parts.begin(), parts.end());
  return parts[0].tape().record(std::move(out), parts, [saved](Tape& t, const Matrix&, const Matrix& g) {
    Eigen::Index off = 0;
    for (const Var& p : saved) {
      if (t.requires_grad(p)) t.accumulate(p, g.middleCols(off, p.cols()));
      off += p.cols();
    }
  });
}

Var vconcat(std::span<const Var> parts) {
  if (parts.empty()) throw ValidationError("vconcat: no inputs");
  const Eigen::Index cols = parts[0].cols();
  Eigen::Index rows = 0;
  for (const Var& p : parts) {
    if (p.cols() != cols) throw ValidationError("vconcat: column mismatch");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  Eigen::Index off = 0;
  for (const Var& p : parts) {
    out.middleRows(off, p.rows()) = p.value();
    off += p.rows();
  }
  std::vector<Var> saved(parts.begin(), parts.end());
  return parts[0].tape().record(std::move(out), parts, [saved](Tape& t, const Matrix&, const Matrix& g) {
    Eigen::Index off = 0;
    for (const Var& p : saved) {
      if (t.requires_grad(p)) t.accumulate(p, g.middleRows(off, p.rows()));
      off += p.rows();
    }
  });
}

Var gather_rows(Var a, std::span<const int> index) {
  const Matrix& av = a.value();
  Matrix out(static_cast<Eigen::Index>(index.size()), av.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || index[i] >= av.rows()) throw ValidationError("gather_rows: index out of range");
    out.row(static_cast<Eigen::Index>(i)) = av.row(index[i]);
  }
  std::vector<int> idx(index.begin(), index.end());
  return a.tape().record(std::move(out), {a}, [a, idx](Tape& t, const Matrix&, const Matrix& g) {
    Matrix full = Matrix::Zero(a.rows(), a.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) full.row(idx[i]) += g.row(static_cast<Eigen::Index>(i));
    t.accumulate(a, full);
  });
}

Var sum_all(Var a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape().record(std::move(out), {a}, [a](Tape& t, const Matrix&, const Matrix& g) {
    t.accumulate(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0)));
  });
}

Var mean_all(Var a) {
  const auto n = static_cast<Real>(a.value().size());
  if (n == 0) throw ValidationError("mean_all: empty input");
  Matrix out(1, 1);
  out(0, 0) = a.value().sum() / n;
  return a.tape().record(std::move(out), {a}, [a, n](Tape& t, const Matrix&, const Matrix& g) {
    t.accumulate(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0) / n));
  });
}

Var squared_distance_rows(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "squared_distance_rows");
  Matrix diff = a.value() - b.value();
  Matrix out = diff.rowwise().squaredNorm();
  return a.tape().record(std::move(out), {a, b}, [a, b, diff](Tape& t, const Matrix&, const Matrix& g) {
    Matrix d = 2.0 * (diff.array().colwise() * g.col(0).array()).matrix();
    t.accumulate(a, d);
    if (t.requires_grad(b)) t.accumulate(b, -d);
  });
}

Var cross_entropy_logits(Var logits, std::span<const int> targets) {
  const Matrix& z = logits.value();
  if (static_cast<Eigen::Index>(targets.size()) != z.rows())
    throw ValidationError("cross_entropy_logits: target count mismatch");
  if (z.rows() == 0) throw ValidationError("cross_entropy_logits: empty batch");
  Matrix probs(z.rows(), z.cols());
  Real total = 0.0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const int y = targets[static_cast<std::size_t>(i)];
    if (y < 0 || y >= z.cols()) throw ValidationError("cross_entropy_logits: target out of range");
    const Real mx = z.row(i).maxCoeff();
    probs.row(i) = (z.row(i).array() - mx).exp().matrix();
    const Real s = probs.row(i).sum();
    probs.row(i) /= s;
    total += -(z(i, y) - mx - std::log(s));
  }
  const auto n = static_cast<Real>(z.rows());
  Matrix out(1, 1);
  out(0, 0) = total / n;
  std::vector<int> ys(targets.begin(), targets.end());
  return logits.tape().record(std::move(out), {logits}, [logits, probs, ys, n](Tape& t, const Matrix&, const Matrix& g) {
    Matrix d = probs;
    for (std::size_t i = 0; i < ys.size(); ++i) d(static_cast<Eigen::Index>(i), ys[i]) -= 1.0;
    t.accumulate(logits, d * (g(0, 0) / n));
  });
}

Var bce_logits_clipped(Var logits, std::span<const Real> targets, Real eps) {
  const Matrix& z = logits.value();
  if (z.cols() != 1 || static_cast<Eigen::Index>(targets.size()) != z.rows())
    throw ValidationError("bce_logits_clipped: expected n x 1 logits matching targets");
  if (z.rows() == 0) throw ValidationError("bce_logits_clipped: empty batch");
  const Eigen::Index n = z.rows();
  Vector p(n);
  Real total = 0.0;
  std::vector<char> clipped(static_cast<std::size_t>(n), 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    Real pi = 1.0 / (1.0 + std::exp(-z(i, 0)));
    if (pi < eps) {
      pi = eps;
      clipped[static_cast<std::size_t>(i)] = 1;
    } else if (pi > 1.0 - eps) {
      pi = 1.0 - eps;
      clipped[static_cast<std::size_t>(i)] = 1;
    }
    p(i) = pi;
    const Real y = targets[static_cast<std::size_t>(i)];
    total += -(y * std::log(pi) + (1.0 - y) * std::log(1.0 - pi));
  }
  Matrix out(1, 1);
  out(0, 0) = total / static_cast<Real>(n);
  std::vector<Real> ys(targets.begin(), targets.end());
  return logits.tape().record(std::move(out), {logits}, [logits, p, ys, clipped](Tape& t, const Matrix&, const Matrix& g) {
    const auto n = static_cast<Eigen::Index>(ys.size());
    Matrix d(n, 1);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(i);
      d(i, 0) = clipped[k] ? 0.0 : (p(i) - ys[k]) * g(0, 0) / static_cast<Real>(n);
    }
    t.accumulate(logits, d);
  });
}

}  // namespace cmls::ag
