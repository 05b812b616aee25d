#include "ssgnn/tape.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>

namespace ssgnn::ad {

namespace {

[[noreturn]] void shape_error(const char* op, const Matrix& a, const Matrix& b) {
  throw std::invalid_argument(std::string(op) + ": incompatible shapes " +
                              std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                              " and " + std::to_string(b.rows()) + "x" +
                              std::to_string(b.cols()));
}

void ensure_grad(Node& n) {
  if (!n.has_grad()) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
}

void accumulate(Node& n, const Matrix& g) {
  ensure_grad(n);
  n.grad += g;
}

Tape& tape_of(Var v) {
  Tape* t = node_of(v).tape;
  if (!t) throw std::logic_error("variable is not attached to a tape");
  return *t;
}

}  // namespace

Var Tape::leaf(Matrix value, bool requires_grad) {
  require_finite(value, "tape leaf");
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  n.index = nodes_.size();
  n.tape = this;
  nodes_.push_back(std::move(n));
  return Var(&nodes_.back());
}

Var Tape::record(Matrix value, const char* op, bool requires_grad,
                 std::function<void(Node&)> backward) {
  if (!value.allFinite()) {
    throw std::runtime_error(std::string(op) + ": non-finite value produced");
  }
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  n.op = op;
  n.index = nodes_.size();
  n.tape = this;
  if (requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(&nodes_.back());
}

void Tape::backward(Var loss) {
  Node& root = node_of(loss);
  if (root.value.rows() != 1 || root.value.cols() != 1) {
    throw std::invalid_argument("backward: loss must be a 1x1 scalar");
  }
  if (!root.requires_grad) return;
  ensure_grad(root);
  root.grad(0, 0) += 1.0;
  for (std::size_t i = root.index + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.requires_grad && n.backward && n.has_grad()) n.backward(n);
  }
}

Var matmul(Var a, Var b) {
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols() != bv.rows()) shape_error("matmul", av, bv);
  const bool rg = a.requires_grad() || b.requires_grad();
  Node* pa = &node_of(a);
  Node* pb = &node_of(b);
  return tape_of(a).record(av * bv, "matmul", rg, [pa, pb](Node& self) {
    if (pa->requires_grad) accumulate(*pa, self.grad * pb->value.transpose());
    if (pb->requires_grad) accumulate(*pb, pa->value.transpose() * self.grad);
  });
}

Var spmm(const SpMatrix& s, Var x) {
  const Matrix& xv = x.value();
  if (s.cols() != xv.rows()) {
    throw std::invalid_argument("spmm: sparse cols " + std::to_string(s.cols()) +
                                " != dense rows " + std::to_string(xv.rows()));
  }
  Node* px = &node_of(x);
  const SpMatrix* ps = &s;
  return tape_of(x).record(s * xv, "spmm", x.requires_grad(), [px, ps](Node& self) {
    if (px->requires_grad) accumulate(*px, ps->transpose() * self.grad);
  });
}

Var add_bias(Var x, Var b) {
  const Matrix& xv = x.value();
  const Matrix& bv = b.value();
  if (bv.rows() != 1 || bv.cols() != xv.cols()) shape_error("add_bias", xv, bv);
  Node* px = &node_of(x);
  Node* pb = &node_of(b);
  Matrix out = xv.rowwise() + bv.row(0);
  const bool rg = x.requires_grad() || b.requires_grad();
  return tape_of(x).record(std::move(out), "add_bias", rg, [px, pb](Node& self) {
    if (px->requires_grad) accumulate(*px, self.grad);
    if (pb->requires_grad) accumulate(*pb, self.grad.colwise().sum());
  });
}

Var relu(Var x) {
  Node* px = &node_of(x);
  Matrix out = px->value.cwiseMax(0.0);
  return tape_of(x).record(std::move(out), "relu", x.requires_grad(), [px](Node& self) {
    if (!px->requires_grad) return;
    Matrix g = ((px->value.array() > 0.0).cast<double>() * self.grad.array()).matrix();
    accumulate(*px, g);
  });
}

Var abs_elem(Var x) {
  Node* px = &node_of(x);
  Matrix out = px->value.cwiseAbs();
  return tape_of(x).record(std::move(out), "abs_elem", x.requires_grad(), [px](Node& self) {
    if (!px->requires_grad) return;
    Matrix g = (px->value.array().sign() * self.grad.array()).matrix();  // sign(0) == 0
    accumulate(*px, g);
  });
}

Var sub_elem(Var a, Var b) {
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.rows() != bv.rows() || av.cols() != bv.cols()) shape_error("sub_elem", av, bv);
  Node* pa = &node_of(a);
  Node* pb = &node_of(b);
  const bool rg = a.requires_grad() || b.requires_grad();
  return tape_of(a).record(av - bv, "sub_elem", rg, [pa, pb](Node& self) {
    if (pa->requires_grad) accumulate(*pa, self.grad);
    if (pb->requires_grad) accumulate(*pb, -self.grad);
  });
}

Var add(Var a, Var b) {
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.rows() != bv.rows() || av.cols() != bv.cols()) shape_error("add", av, bv);
  Node* pa = &node_of(a);
  Node* pb = &node_of(b);
  const bool rg = a.requires_grad() || b.requires_grad();
  return tape_of(a).record(av + bv, "add", rg, [pa, pb](Node& self) {
    if (pa->requires_grad) accumulate(*pa, self.grad);
    if (pb->requires_grad) accumulate(*pb, self.grad);
  });
}

Var scale(Var a, double s) {
  Node* pa = &node_of(a);
  return tape_of(a).record(s * pa->value, "scale", a.requires_grad(), [pa, s](Node& self) {
    if (pa->requires_grad) accumulate(*pa, s * self.grad);
  });
}

Var gather_rows(Var x, std::vector<int> idx) {
  Node* px = &node_of(x);
  const Matrix& xv = px->value;
  Matrix out(static_cast<Eigen::Index>(idx.size()), xv.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const int i = idx[r];
    if (i < 0 || i >= xv.rows()) {
      throw std::out_of_range("gather_rows: index " + std::to_string(i) + " out of range");
    }
    out.row(static_cast<Eigen::Index>(r)) = xv.row(i);
  }
  auto shared_idx = std::make_shared<std::vector<int>>(std::move(idx));
  return tape_of(x).record(std::move(out), "gather_rows", x.requires_grad(),
                           [px, shared_idx](Node& self) {
                             if (!px->requires_grad) return;
                             ensure_grad(*px);
                             for (std::size_t r = 0; r < shared_idx->size(); ++r) {
                               px->grad.row((*shared_idx)[r]) +=
                                   self.grad.row(static_cast<Eigen::Index>(r));
                             }
                           });
}

Var dropout(Var x, double rate, bool train, RngStream& rng) {
  if (rate < 0.0 || rate >= 1.0) {
    throw std::invalid_argument("dropout: rate must be in [0, 1)");
  }
  if (!train || rate == 0.0) return x;
  Node* px = &node_of(x);
  const Matrix& xv = px->value;
  auto mask = std::make_shared<Matrix>(xv.rows(), xv.cols());
  const double keep_scale = 1.0 / (1.0 - rate);
  for (Eigen::Index i = 0; i < xv.rows(); ++i) {
    for (Eigen::Index j = 0; j < xv.cols(); ++j) {
      (*mask)(i, j) = rng.bernoulli(rate) ? 0.0 : keep_scale;
    }
  }
  Matrix out = (xv.array() * mask->array()).matrix();
  return tape_of(x).record(std::move(out), "dropout", x.requires_grad(),
                           [px, mask](Node& self) {
                             if (!px->requires_grad) return;
                             Matrix g = (self.grad.array() * mask->array()).matrix();
                             accumulate(*px, g);
                           });
}

Var softmax_cross_entropy(Var logits, const std::vector<int>& labels,
                          const std::vector<int>& mask) {
  if (mask.empty()) throw std::invalid_argument("softmax_cross_entropy: empty mask");
  Node* pl = &node_of(logits);
  const Matrix& lv = pl->value;
  const Eigen::Index k = lv.cols();
  auto probs = std::make_shared<Matrix>(static_cast<Eigen::Index>(mask.size()), k);
  double loss = 0.0;
  for (std::size_t r = 0; r < mask.size(); ++r) {
    const int i = mask[r];
    if (i < 0 || i >= lv.rows()) {
      throw std::out_of_range("softmax_cross_entropy: mask index out of range");
    }
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= k) {
      throw std::invalid_argument("softmax_cross_entropy: invalid label " + std::to_string(y) +
                                  " at node " + std::to_string(i));
    }
    const double mx = lv.row(i).maxCoeff();
    Eigen::RowVectorXd shifted = lv.row(i).array() - mx;
    const double lse = std::log(shifted.array().exp().sum());
    probs->row(static_cast<Eigen::Index>(r)) = (shifted.array() - lse).exp();
    loss += lse - shifted(y);
  }
  loss /= static_cast<double>(mask.size());
  auto shared_mask = std::make_shared<std::vector<int>>(mask);
  auto shared_labels = std::make_shared<std::vector<int>>(labels);
  Matrix out(1, 1);
  out(0, 0) = loss;
  return tape_of(logits).record(
      std::move(out), "softmax_cross_entropy", logits.requires_grad(),
      [pl, probs, shared_mask, shared_labels](Node& self) {
        if (!pl->requires_grad) return;
        ensure_grad(*pl);
        const double g = self.grad(0, 0) / static_cast<double>(shared_mask->size());
        for (std::size_t r = 0; r < shared_mask->size(); ++r) {
          const int i = (*shared_mask)[r];
          pl->grad.row(i) += g * probs->row(static_cast<Eigen::Index>(r));
          pl->grad(i, (*shared_labels)[static_cast<std::size_t>(i)]) -= g;
        }
      });
}

Var mse_rows(Var pred, const Matrix& target, const std::vector<int>& mask) {
  if (mask.empty()) throw std::invalid_argument("mse_rows: empty mask");
  Node* pp = &node_of(pred);
  const Matrix& pv = pp->value;
  if (pv.rows() != target.rows() || pv.cols() != target.cols()) {
    shape_error("mse_rows", pv, target);
  }
  double loss = 0.0;
  for (int i : mask) {
    if (i < 0 || i >= pv.rows()) throw std::out_of_range("mse_rows: mask index out of range");
    loss += (pv.row(i) - target.row(i)).squaredNorm();
  }
  loss /= static_cast<double>(mask.size());
  auto shared_mask = std::make_shared<std::vector<int>>(mask);
  auto shared_target = std::make_shared<Matrix>(target);
  Matrix out(1, 1);
  out(0, 0) = loss;
  return tape_of(pred).record(std::move(out), "mse_rows", pred.requires_grad(),
                              [pp, shared_mask, shared_target](Node& self) {
                                if (!pp->requires_grad) return;
                                ensure_grad(*pp);
                                const double g =
                                    2.0 * self.grad(0, 0) / static_cast<double>(shared_mask->size());
                                for (int i : *shared_mask) {
                                  pp->grad.row(i) +=
                                      g * (pp->value.row(i) - shared_target->row(i));
                                }
                              });
}

Var bce_with_logits(Var logits, const std::vector<double>& targets,
                    const std::vector<double>* weights) {
  Node* pl = &node_of(logits);
  const Matrix& lv = pl->value;
  if (lv.cols() != 1 || lv.rows() != static_cast<Eigen::Index>(targets.size())) {
    throw std::invalid_argument("bce_with_logits: logits must be P x 1 matching targets");
  }
  if (weights && weights->size() != targets.size()) {
    throw std::invalid_argument("bce_with_logits: weights length mismatch");
  }
  const std::size_t p = targets.size();
  auto w = std::make_shared<std::vector<double>>(p);
  for (std::size_t i = 0; i < p; ++i) {
    (*w)[i] = weights ? (*weights)[i] : 1.0 / static_cast<double>(p);
  }
  double loss = 0.0;
  for (std::size_t i = 0; i < p; ++i) {
    const double x = lv(static_cast<Eigen::Index>(i), 0);
    const double y = targets[i];
    // max(x,0) - x*y + log(1 + exp(-|x|))
    loss += (*w)[i] * (std::max(x, 0.0) - x * y + std::log1p(std::exp(-std::abs(x))));
  }
  auto shared_targets = std::make_shared<std::vector<double>>(targets);
  Matrix out(1, 1);
  out(0, 0) = loss;
  return tape_of(logits).record(std::move(out), "bce_with_logits", logits.requires_grad(),
                                [pl, shared_targets, w](Node& self) {
                                  if (!pl->requires_grad) return;
                                  ensure_grad(*pl);
                                  const double g = self.grad(0, 0);
                                  for (std::size_t i = 0; i < shared_targets->size(); ++i) {
                                    const double x = pl->value(static_cast<Eigen::Index>(i), 0);
                                    const double sigma = 1.0 / (1.0 + std::exp(-x));
                                    pl->grad(static_cast<Eigen::Index>(i), 0) +=
                                        g * (*w)[i] * (sigma - (*shared_targets)[i]);
                                  }
                                });
}

}  // namespace ssgnn::ad
