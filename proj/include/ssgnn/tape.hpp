#pragma once

#include <deque>
#include <functional>
#include <optional>
#include <vector>

#include "ssgnn/dense.hpp"
#include "ssgnn/random.hpp"

namespace ssgnn::ad {

// Reverse-mode differentiation over dense matrices, recorded on a dynamically
// built tape. A Tape owns its nodes; Var is a cheap non-owning handle. One
// tape serves one forward/backward pass and is discarded afterwards; distinct
// tapes may run fully in parallel.

class Tape;

struct Node {
  Matrix value;
  Matrix grad;  // lazily allocated on first accumulation
  bool requires_grad = false;
  std::size_t index = 0;
  const char* op = "leaf";
  Tape* tape = nullptr;
  std::function<void(Node&)> backward;

  bool has_grad() const { return grad.size() != 0; }
};

class Var {
 public:
  Var() = default;

  const Matrix& value() const { return node_->value; }
  // Accumulated gradient; zeros if nothing flowed here.
  Matrix grad() const {
    if (node_->has_grad()) return node_->grad;
    return Matrix::Zero(node_->value.rows(), node_->value.cols());
  }
  bool requires_grad() const { return node_->requires_grad; }
  bool valid() const { return node_ != nullptr; }

 private:
  friend class Tape;
  friend Node& node_of(Var v);
  explicit Var(Node* n) : node_(n) {}
  Node* node_ = nullptr;
};

inline Node& node_of(Var v) { return *v.node_; }

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Matrix value, bool requires_grad = false);
  Var constant(Matrix value) { return leaf(std::move(value), false); }

  // Records an op node. `backward` receives the completed node and must
  // accumulate into the parents it captured.
  Var record(Matrix value, const char* op, bool requires_grad,
             std::function<void(Node&)> backward);

  // Seeds d(loss)/d(loss) = 1 and sweeps the tape once in reverse creation
  // order from `loss` (which must be 1x1). Leaves not on a path to the loss
  // end with exactly zero gradient.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  std::deque<Node> nodes_;  // stable addresses; creation order = topological order
};

// --- Differentiable kernels ------------------------------------------------

Var matmul(Var a, Var b);
// Sparse constant times dense; `s` must outlive the tape's backward pass.
Var spmm(const SpMatrix& s, Var x);
// Adds row vector b (1 x C) to every row of x.
Var add_bias(Var x, Var b);
Var relu(Var x);          // subgradient at 0 defined as 0
Var abs_elem(Var x);      // subgradient at 0 defined as 0
Var sub_elem(Var a, Var b);
Var add(Var a, Var b);    // same-shape elementwise sum
Var scale(Var a, double s);
// out.row(r) = x.row(idx[r]); backward scatter-adds.
Var gather_rows(Var x, std::vector<int> idx);
// Inverted dropout: train mode zeroes entries with probability `rate` and
// scales survivors by 1/(1-rate); eval mode and rate 0 are the identity.
Var dropout(Var x, double rate, bool train, RngStream& rng);

// --- Losses (scalar 1x1 outputs) -------------------------------------------

// Mean over `mask` rows of -log softmax(logits)[label], max-subtracted.
Var softmax_cross_entropy(Var logits, const std::vector<int>& labels,
                          const std::vector<int>& mask);
// (1/|mask|) sum over mask rows of squared L2 row difference.
Var mse_rows(Var pred, const Matrix& target, const std::vector<int>& mask);
// Stable binary cross-entropy on a P x 1 logit column. Default reduction is
// the mean; explicit per-instance weights switch to a weighted sum.
Var bce_with_logits(Var logits, const std::vector<double>& targets,
                    const std::vector<double>* weights = nullptr);

}  // namespace ssgnn::ad
