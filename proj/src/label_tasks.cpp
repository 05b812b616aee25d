#include "ssgnn/label_tasks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace ssgnn {

namespace {

void require_all_classes_labeled(const Graph& g, const SplitMasks& masks, const char* who) {
  std::vector<int> count(static_cast<std::size_t>(g.num_classes), 0);
  for (int v : masks.train) ++count[static_cast<std::size_t>(g.labels[static_cast<std::size_t>(v)])];
  for (int c = 0; c < g.num_classes; ++c) {
    if (count[static_cast<std::size_t>(c)] == 0) {
      throw std::runtime_error(std::string(who) + ": class " + std::to_string(c) +
                               " has no labeled training node");
    }
  }
}

std::vector<int> hard_from_probs(const Matrix& probs) {
  std::vector<int> hard(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    hard[static_cast<std::size_t>(i)] = argmax_row(probs, i);
  }
  return hard;
}

}  // namespace

WeakLabels label_propagation(const Graph& g, const SplitMasks& masks, double tol,
                             int max_iter) {
  require_all_classes_labeled(g, masks, "label_propagation");
  const int n = g.num_nodes;
  const int k = g.num_classes;

  std::vector<char> clamped(static_cast<std::size_t>(n), 0);
  for (int v : masks.train) clamped[static_cast<std::size_t>(v)] = 1;

  Matrix f = Matrix::Zero(n, k);
  auto clamp_rows = [&](Matrix& m) {
    for (int v : masks.train) {
      m.row(v).setZero();
      m(v, g.labels[static_cast<std::size_t>(v)]) = 1.0;
    }
  };
  clamp_rows(f);

  // Row-normalized (A + I).
  SpMatrix p(n, n);
  {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(g.col_idx.size() + static_cast<std::size_t>(n));
    for (int u = 0; u < n; ++u) {
      const double inv = 1.0 / static_cast<double>(g.degree(u) + 1);
      trip.emplace_back(u, u, inv);
      for (int v : g.neighbors(u)) trip.emplace_back(u, v, inv);
    }
    p.setFromTriplets(trip.begin(), trip.end());
  }

  for (int it = 0; it < max_iter; ++it) {
    Matrix next = p * f;
    clamp_rows(next);
    const double change = (next - f).cwiseAbs().maxCoeff();
    f = std::move(next);
    if (change < tol) break;
  }

  // Renormalize; rows that never received mass become uniform.
  for (int v = 0; v < n; ++v) {
    const double s = f.row(v).sum();
    if (s > 0.0) {
      f.row(v) /= s;
    } else {
      f.row(v).setConstant(1.0 / static_cast<double>(k));
    }
  }
  clamp_rows(f);

  WeakLabels out;
  out.probs = std::move(f);
  out.hard = hard_from_probs(out.probs);
  return out;
}

SoftmaxRegression fit_softmax_regression(const Matrix& x, const std::vector<int>& labels,
                                         const std::vector<int>& rows, int num_classes,
                                         int steps, double lr, double l2) {
  if (rows.empty()) throw std::invalid_argument("fit_softmax_regression: no training rows");
  const Eigen::Index d = x.cols();
  Matrix x_sub(static_cast<Eigen::Index>(rows.size()), d);
  std::vector<int> y_sub(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    x_sub.row(static_cast<Eigen::Index>(r)) = x.row(rows[r]);
    y_sub[r] = labels[static_cast<std::size_t>(rows[r])];
  }
  std::vector<int> all(rows.size());
  std::iota(all.begin(), all.end(), 0);

  SoftmaxRegression model;
  model.w = Matrix::Zero(d, num_classes);
  model.b = Matrix::Zero(1, num_classes);
  for (int step = 0; step < steps; ++step) {
    ad::Tape tape;
    ad::Var xv = tape.constant(x_sub);
    ad::Var wv = tape.leaf(model.w, true);
    ad::Var bv = tape.leaf(model.b, true);
    ad::Var logits = ad::add_bias(ad::matmul(xv, wv), bv);
    ad::Var loss = ad::softmax_cross_entropy(logits, y_sub, all);
    tape.backward(loss);
    model.w -= lr * (wv.grad() + l2 * model.w);
    model.b -= lr * bv.grad();
  }
  return model;
}

Matrix softmax_regression_probs(const SoftmaxRegression& model, const Matrix& x) {
  Matrix logits = (x * model.w).rowwise() + model.b.row(0);
  return softmax_rows(logits);
}

namespace {

// Neighbor-label proportion vector for one node under a total assignment.
Eigen::RowVectorXd relational_features(const Graph& g, const std::vector<int>& labels_cur,
                                       int v, int k) {
  Eigen::RowVectorXd rel = Eigen::RowVectorXd::Zero(k);
  const auto nb = g.neighbors(v);
  if (nb.empty()) return rel;
  for (int u : nb) rel(labels_cur[static_cast<std::size_t>(u)]) += 1.0;
  rel /= static_cast<double>(nb.size());
  return rel;
}

}  // namespace

WeakLabels ica(const Graph& g, const SplitMasks& masks, int rounds, std::uint64_t seed) {
  require_all_classes_labeled(g, masks, "ica");
  const int n = g.num_nodes;
  const int k = g.num_classes;
  const Eigen::Index f_dim = g.features.cols();

  // Bootstrap labels from an attribute-only classifier.
  SoftmaxRegression attr_clf =
      fit_softmax_regression(g.features, g.labels, masks.train, k);
  Matrix attr_probs = softmax_regression_probs(attr_clf, g.features);
  std::vector<int> labels_cur(static_cast<std::size_t>(n));
  std::vector<char> is_train(static_cast<std::size_t>(n), 0);
  for (int v : masks.train) is_train[static_cast<std::size_t>(v)] = 1;
  for (int v = 0; v < n; ++v) {
    labels_cur[static_cast<std::size_t>(v)] = is_train[static_cast<std::size_t>(v)]
                                                  ? g.labels[static_cast<std::size_t>(v)]
                                                  : argmax_row(attr_probs, v);
  }

  // Relational classifier on [x || neighbor-label proportions].
  auto build_input = [&](const std::vector<int>& assignment) {
    Matrix xin(n, f_dim + k);
    xin.leftCols(f_dim) = g.features;
    for (int v = 0; v < n; ++v) {
      xin.row(v).rightCols(k) = relational_features(g, assignment, v, k);
    }
    return xin;
  };
  Matrix x_rel = build_input(labels_cur);
  SoftmaxRegression clf = fit_softmax_regression(x_rel, g.labels, masks.train, k);

  std::vector<int> order;
  for (int v = 0; v < n; ++v) {
    if (!is_train[static_cast<std::size_t>(v)]) order.push_back(v);
  }
  Eigen::RowVectorXd row(f_dim + k);
  for (int pass = 0; pass < rounds; ++pass) {
    std::vector<int> shuffled = order;
    RngStream rng(seed, "ica/order", static_cast<std::uint64_t>(pass));
    rng.shuffle(shuffled);
    for (int v : shuffled) {
      row.leftCols(f_dim) = g.features.row(v);
      row.rightCols(k) = relational_features(g, labels_cur, v, k);
      Matrix logits = (row * clf.w) + clf.b;
      labels_cur[static_cast<std::size_t>(v)] = argmax_row(softmax_rows(logits), 0);
    }
  }

  WeakLabels out;
  out.probs = softmax_regression_probs(clf, build_input(labels_cur));
  for (int v : masks.train) {
    out.probs.row(v).setZero();
    out.probs(v, g.labels[static_cast<std::size_t>(v)]) = 1.0;
  }
  out.hard = hard_from_probs(out.probs);
  return out;
}

std::vector<int> ensemble_labels(const WeakLabels& lp, const WeakLabels& ica_labels,
                                 const Graph& g, const SplitMasks& masks) {
  if (lp.probs.rows() != ica_labels.probs.rows() || lp.probs.cols() != ica_labels.probs.cols()) {
    throw std::invalid_argument("ensemble_labels: weak label shapes differ");
  }
  Matrix sum = lp.probs + ica_labels.probs;
  std::vector<int> out(static_cast<std::size_t>(sum.rows()));
  for (Eigen::Index v = 0; v < sum.rows(); ++v) out[static_cast<std::size_t>(v)] = argmax_row(sum, v);
  for (int v : masks.train) out[static_cast<std::size_t>(v)] = g.labels[static_cast<std::size_t>(v)];
  return out;
}

Matrix distance2labeled_targets(const Graph& g, const SplitMasks& masks) {
  require_all_classes_labeled(g, masks, "distance2labeled");
  const int n = g.num_nodes;
  const int k = g.num_classes;
  Matrix out(n, 3 * k);
  std::vector<double> sum(static_cast<std::size_t>(n));
  std::vector<double> mn(static_cast<std::size_t>(n));
  std::vector<double> mx(static_cast<std::size_t>(n));
  std::vector<int> cnt(static_cast<std::size_t>(n));

  auto rows = bfs_distances(g, masks.train);
  for (int c = 0; c < k; ++c) {
    std::fill(sum.begin(), sum.end(), 0.0);
    std::fill(mn.begin(), mn.end(), std::numeric_limits<double>::infinity());
    std::fill(mx.begin(), mx.end(), 0.0);
    std::fill(cnt.begin(), cnt.end(), 0);
    for (std::size_t s = 0; s < masks.train.size(); ++s) {
      const int seed_node = masks.train[s];
      if (g.labels[static_cast<std::size_t>(seed_node)] != c) continue;
      const auto& dist = rows[s];
      for (int v = 0; v < n; ++v) {
        const int d = dist[static_cast<std::size_t>(v)];
        if (d == kNoPath) continue;
        sum[static_cast<std::size_t>(v)] += d;
        mn[static_cast<std::size_t>(v)] = std::min(mn[static_cast<std::size_t>(v)], static_cast<double>(d));
        mx[static_cast<std::size_t>(v)] = std::max(mx[static_cast<std::size_t>(v)], static_cast<double>(d));
        ++cnt[static_cast<std::size_t>(v)];
      }
    }
    for (int v = 0; v < n; ++v) {
      if (cnt[static_cast<std::size_t>(v)] == 0) {
        out(v, 3 * c) = out(v, 3 * c + 1) = out(v, 3 * c + 2) = static_cast<double>(n);
      } else {
        out(v, 3 * c) = sum[static_cast<std::size_t>(v)] / cnt[static_cast<std::size_t>(v)];
        out(v, 3 * c + 1) = mn[static_cast<std::size_t>(v)];
        out(v, 3 * c + 2) = mx[static_cast<std::size_t>(v)];
      }
    }
  }
  return out;
}

Matrix context_label_targets(const Graph& g, const std::vector<int>& labels_all, int k_hop) {
  const int n = g.num_nodes;
  const int k = g.num_classes;
  if (static_cast<int>(labels_all.size()) != n) {
    throw std::invalid_argument("context_label_targets: label assignment length mismatch");
  }
  for (int v = 0; v < n; ++v) {
    const int y = labels_all[static_cast<std::size_t>(v)];
    if (y < 0 || y >= k) {
      throw std::invalid_argument("context_label_targets: node " + std::to_string(v) +
                                  " has no class assigned");
    }
  }
  Eigen::RowVectorXd global = Eigen::RowVectorXd::Zero(k);
  for (int v = 0; v < n; ++v) global(labels_all[static_cast<std::size_t>(v)]) += 1.0;
  global /= static_cast<double>(n);

  Matrix out(n, k);
  for (int v = 0; v < n; ++v) {
    const auto context = khop_neighbors(g, v, k_hop);
    if (context.empty()) {
      out.row(v) = global;
      continue;
    }
    Eigen::RowVectorXd hist = Eigen::RowVectorXd::Zero(k);
    for (int u : context) hist(labels_all[static_cast<std::size_t>(u)]) += 1.0;
    out.row(v) = hist / static_cast<double>(context.size());
  }
  return out;
}

std::vector<int> correct_labels(const Matrix& z, const std::vector<int>& labels_all,
                                const SplitMasks& masks, int num_classes, int m, int p,
                                std::uint64_t seed) {
  const int n = static_cast<int>(z.rows());
  if (static_cast<int>(labels_all.size()) != n) {
    throw std::invalid_argument("correct_labels: label assignment length mismatch");
  }
  require_finite(z, "correct_labels embeddings");

  std::vector<char> is_train(static_cast<std::size_t>(n), 0);
  for (int v : masks.train) is_train[static_cast<std::size_t>(v)] = 1;

  // Unit-normalized embeddings so cosine similarity is a dot product.
  Matrix zn = z;
  for (int v = 0; v < n; ++v) {
    const double norm = zn.row(v).norm();
    if (norm > 0.0) zn.row(v) /= norm;
    else zn.row(v).setZero();
  }

  std::vector<std::vector<int>> prototypes(static_cast<std::size_t>(num_classes));
  for (int c = 0; c < num_classes; ++c) {
    std::vector<int> pool;
    for (int v = 0; v < n; ++v) {
      if (labels_all[static_cast<std::size_t>(v)] == c) pool.push_back(v);
    }
    if (pool.empty()) {
      throw std::runtime_error("correct_labels: class " + std::to_string(c) +
                               " has no members under the current assignment");
    }
    RngStream rng(seed, "correct/class", static_cast<std::uint64_t>(c));
    const int m_eff = std::min<int>(m, static_cast<int>(pool.size()));
    std::vector<int> sample;
    for (int idx : rng.sample_without_replacement(static_cast<int>(pool.size()), m_eff)) {
      sample.push_back(pool[static_cast<std::size_t>(idx)]);
    }

    Matrix s(m_eff, m_eff);
    for (int i = 0; i < m_eff; ++i) {
      for (int j = 0; j < m_eff; ++j) {
        s(i, j) = zn.row(sample[static_cast<std::size_t>(i)])
                      .dot(zn.row(sample[static_cast<std::size_t>(j)]));
      }
    }
    // Threshold S_c: value ranked at ceil(0.4 * count) (descending, 1-based)
    // among the unordered off-diagonal similarities.
    double s_c = 0.0;
    if (m_eff > 1) {
      std::vector<double> off;
      off.reserve(static_cast<std::size_t>(m_eff) * (m_eff - 1) / 2);
      for (int i = 0; i < m_eff; ++i) {
        for (int j = i + 1; j < m_eff; ++j) off.push_back(s(i, j));
      }
      std::sort(off.begin(), off.end(), std::greater<double>());
      const auto rank = static_cast<std::size_t>(
          std::ceil(0.4 * static_cast<double>(off.size())));
      s_c = off[std::min(off.size(), std::max<std::size_t>(rank, 1)) - 1];
    }
    // Density: sign sum over the sampled peers, including j == i.
    std::vector<double> rho(static_cast<std::size_t>(m_eff), 0.0);
    for (int i = 0; i < m_eff; ++i) {
      for (int j = 0; j < m_eff; ++j) {
        const double d = s(i, j) - s_c;
        rho[static_cast<std::size_t>(i)] += d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
      }
    }
    std::vector<int> order(static_cast<std::size_t>(m_eff));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (rho[static_cast<std::size_t>(a)] != rho[static_cast<std::size_t>(b)]) {
        return rho[static_cast<std::size_t>(a)] > rho[static_cast<std::size_t>(b)];
      }
      return sample[static_cast<std::size_t>(a)] < sample[static_cast<std::size_t>(b)];
    });
    const int p_eff = std::min<int>(p, m_eff);
    for (int i = 0; i < p_eff; ++i) {
      prototypes[static_cast<std::size_t>(c)].push_back(sample[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]);
    }
  }

  // Re-label every non-training node by average prototype similarity.
  std::vector<int> corrected(labels_all);
  for (int v = 0; v < n; ++v) {
    if (is_train[static_cast<std::size_t>(v)]) continue;
    int best_c = 0;
    double best_sim = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < num_classes; ++c) {
      double sim = 0.0;
      for (int proto : prototypes[static_cast<std::size_t>(c)]) {
        sim += zn.row(v).dot(zn.row(proto));
      }
      sim /= static_cast<double>(prototypes[static_cast<std::size_t>(c)].size());
      if (sim > best_sim) {
        best_sim = sim;
        best_c = c;
      }
    }
    corrected[static_cast<std::size_t>(v)] = best_c;
  }
  return corrected;
}

ad::Var corrected_context_loss(ad::Var pred, const Matrix& ybar, const Matrix& yhat_context,
                               double alpha, const std::vector<int>& unlabeled) {
  if (alpha < 0.0) throw std::invalid_argument("corrected_context_loss: alpha must be >= 0");
  ad::Var base = ad::mse_rows(pred, ybar, unlabeled);
  if (alpha == 0.0) return base;
  ad::Var corrected = ad::mse_rows(pred, yhat_context, unlabeled);
  return ad::add(base, ad::scale(corrected, alpha));
}

nlohmann::json weak_labels_to_json(const WeakLabels& wl) {
  nlohmann::json j;
  nlohmann::json probs = nlohmann::json::array();
  for (Eigen::Index i = 0; i < wl.probs.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < wl.probs.cols(); ++c) row.push_back(wl.probs(i, c));
    probs.push_back(std::move(row));
  }
  j["probs"] = std::move(probs);
  j["hard"] = wl.hard;
  return j;
}

}  // namespace ssgnn
