#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "resgin/rng.hpp"
#include "resgin/tensor.hpp"

namespace resgin::diff {

/// A named learnable tensor. `grad` always matches `value`'s shape and is
/// rewritten (not accumulated) by each Tape::backward pass.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)) {
    grad = Tensor(value.rows, value.cols);
  }

  void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), 0.0); }
};

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
struct Var {
  Tape* tape = nullptr;
  int id = -1;
};

class NonScalarOutput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Records a forward pass as a sequence of nodes; backward() visits them in
/// reverse creation order exactly once. One tape per forward/backward pass.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Constant leaf; gradients are not propagated into it.
  Var input(Tensor v);

  /// Differentiable leaf bound to `p`. Binding the same Parameter again
  /// returns the existing node, so shared weights accumulate correctly.
  Var param(Parameter& p);

  /// Propagates d(output)/d(node) from a 1x1 output into every bound
  /// Parameter's grad. Bound parameters are zeroed first; parameters not
  /// reachable from `output` end up with zero grad.
  void backward(Var output);

  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  const Tensor& grad(Var v) const { return nodes_[v.id].grad; }
  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    Parameter* bound = nullptr;
    // Accumulates into parent grad buffers given this node's grad.
    std::function<void(Tape&, const Tensor&)> backprop;
  };

  std::vector<Node> nodes_;
  std::vector<std::pair<Parameter*, int>> bound_;

  Var emit(Tensor value, bool requires_grad, std::function<void(Tape&, const Tensor&)> backprop);
  Tensor& grad_buffer(int id);
  bool needs_grad(Var v) const { return nodes_[v.id].requires_grad; }

  friend Var matmul(Var a, Var b);
  friend Var transpose(Var a);
  friend Var add(Var a, Var b);
  friend Var sub(Var a, Var b);
  friend Var mul(Var a, Var b);
  friend Var scale(Var a, double c);
  friend Var add_const(Var a, double c);
  friend Var add_rowvec(Var m, Var r);
  friend Var scalar_mul(Var s, Var m);
  friend Var relu(Var a);
  friend Var tanh(Var a);
  friend Var sigmoid(Var a);
  friend Var log(Var a);
  friend Var clamp(Var a, double lo, double hi);
  friend Var dropout(Var a, double rate, Rng& rng, bool training);
  friend Var rowwise_softmax(Var a);
  friend Var row_sums(Var a);
  friend Var sum_all(Var a);
  friend Var concat_cols(Var a, Var b);
  friend Var segment_sum(Var values, const std::vector<int>& segment_of,
                         const std::vector<int>& gather_from, int n_out,
                         const std::vector<double>& weights);
};

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double c);
Var add_const(Var a, double c);
/// Broadcast-add a 1xC row vector to every row of an NxC matrix.
Var add_rowvec(Var m, Var r);
/// Broadcast-multiply a 1x1 scalar node into a matrix.
Var scalar_mul(Var s, Var m);
Var relu(Var a);
Var tanh(Var a);
Var sigmoid(Var a);
Var log(Var a);
/// Clamp into [lo, hi]; gradient passes through only where unclamped.
Var clamp(Var a, double lo, double hi);
/// Inverted dropout: train-time survivors scaled by 1/(1-rate); identity when
/// not training or rate == 0.
Var dropout(Var a, double rate, Rng& rng, bool training);
/// Numerically stable softmax along each row; rows sum to 1.
Var rowwise_softmax(Var a);
/// NxM -> Nx1 sums along each row.
Var row_sums(Var a);
/// Full reduction to 1x1.
Var sum_all(Var a);
/// [A | B] along columns; row counts must match.
Var concat_cols(Var a, Var b);
/// out[segment_of[m]] += weights[m] * values[gather_from[m]] for each pair m,
/// accumulated in pair order. Empty segments stay zero. Empty `weights` means
/// all ones.
Var segment_sum(Var values, const std::vector<int>& segment_of,
                const std::vector<int>& gather_from, int n_out,
                const std::vector<double>& weights = {});

/// Central-difference check of reverse-mode gradients. `build` must construct
/// the same scalar loss on any fresh tape from the current parameter values.
/// Returns max over entries of |analytic - numeric| / max(|analytic|,
/// |numeric|, 1e-8).
double grad_check(std::span<Parameter* const> params, const std::function<Var(Tape&)>& build,
                  double h = 1e-5);

}  // namespace resgin::diff
