#pragma once

#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

#include "cmls/tensor.hpp"

namespace cmls::ag {

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Tape& tape() const { return *tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }
  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }

 private:
  friend class Tape;
  Var(Tape* t, int id) : tape_(t), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Reverse-mode autodiff tape over dense matrices.
///
/// Nodes are appended in evaluation order, so a single reverse sweep in
/// backward() visits every consumer before its producers. A tape built with
/// record = false evaluates values only and keeps no closures.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Matrix& out, const Matrix& grad_out)>;

  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }

  Var constant(Matrix value);
  /// Differentiable leaf not bound to a Parameter; read its gradient with grad().
  Var input(Matrix value);
  /// Leaf bound to a Parameter; backward() adds into p.grad when p.trainable.
  Var param(const Parameter& p);

  /// Records an op result. fn is kept only when some parent requires grad.
  Var record(Matrix value, std::initializer_list<Var> parents, BackwardFn fn);
  Var record(Matrix value, std::span<const Var> parents, BackwardFn fn);

  const Matrix& value(Var v) const {
    const Node& n = nodes_[v.id_];
    return n.ref != nullptr ? *n.ref : n.value;
  }
  /// Gradient accumulated at v by the last backward(); zeros if none reached it.
  Matrix grad(Var v) const;
  bool requires_grad(Var v) const { return nodes_[v.id_].requires_grad; }
  void accumulate(Var v, const Matrix& g);

  void backward(Var scalar_out);
  void backward(Var out, const Matrix& seed);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    const Matrix* ref = nullptr;  // parameter leaves alias the parameter's storage
    Matrix grad;
    bool requires_grad = false;
    bool has_grad = false;
    const Parameter* param = nullptr;
    BackwardFn backward;
  };
  Var push(Node node);

  bool record_;
  std::vector<Node> nodes_;
};

inline const Matrix& Var::value() const { return tape_->value(*this); }

Var detach(Var a);

Var matmul(Var a, Var b);
/// a * b^T
Var matmul_nt(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
/// a + broadcast(row) where row is 1 x cols(a).
Var add_row(Var a, Var row);
Var scale(Var a, Real s);
Var add_scalar(Var a, Real s);

Var tanh(Var a);
Var sigmoid(Var a);
Var relu(Var a);
/// Exact (erf-based) GELU.
Var gelu(Var a);

Var softmax_rows(Var a);
Var log_softmax_rows(Var a);
Var layer_norm_rows(Var x, Var gamma, Var beta, Real eps);

Var col_slice(Var a, Eigen::Index start, Eigen::Index count);
Var row_slice(Var a, Eigen::Index start, Eigen::Index count);
Var hconcat(std::span<const Var> parts);
Var vconcat(std::span<const Var> parts);
/// out.row(i) = a.row(index[i]); gradients scatter-add back.
Var gather_rows(Var a, std::span<const int> index);

Var sum_all(Var a);
Var mean_all(Var a);
/// Per-row squared Euclidean distance, result is rows x 1.
Var squared_distance_rows(Var a, Var b);

/// Mean cross-entropy of row-wise softmax(logits) against integer targets.
Var cross_entropy_logits(Var logits, std::span<const int> targets);
/// Mean binary cross-entropy of sigmoid(logits) (n x 1) against 0/1 targets,
/// with probabilities clipped to [eps, 1 - eps] before the log.
Var bce_logits_clipped(Var logits, std::span<const Real> targets, Real eps);

}  // namespace cmls::ag
