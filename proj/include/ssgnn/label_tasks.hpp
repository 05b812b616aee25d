#pragma once

#include <cstdint>
#include <vector>

#include "ssgnn/graph.hpp"
#include "ssgnn/tape.hpp"

#include <json.hpp>

namespace ssgnn {

// Class probabilities extended to every node by a weak labeler. Rows are
// probability vectors; rows of labeled training nodes are their one-hot truth.
struct WeakLabels {
  Matrix probs;           // N x K
  std::vector<int> hard;  // argmax, ties to lowest class
};

// Iterates F <- P F with P the row-normalized (A + I), clamping labeled rows
// to one-hot each iteration, until the max entry change drops below tol.
// Nodes that never receive mass (isolated or in seedless components) get the
// uniform distribution.
WeakLabels label_propagation(const Graph& g, const SplitMasks& masks, double tol = 1e-6,
                             int max_iter = 1000);

// Iterative classification: a multinomial logistic regression on
// [features || neighbor-label proportions], bootstrapped from an
// attribute-only classifier, then `rounds` passes of collective re-prediction
// over the unlabeled nodes in seeded random order.
WeakLabels ica(const Graph& g, const SplitMasks& masks, int rounds, std::uint64_t seed);

// Per-node class from argmax of summed LP and ICA probabilities (ties to the
// lowest class); labeled training nodes keep their true labels.
std::vector<int> ensemble_labels(const WeakLabels& lp, const WeakLabels& ica_labels,
                                 const Graph& g, const SplitMasks& masks);

// N x 3K matrix: per class c, columns (3c, 3c+1, 3c+2) hold the average,
// minimum and maximum hop distance to the reachable labeled nodes of class c;
// all three are N when none is reachable.
Matrix distance2labeled_targets(const Graph& g, const SplitMasks& masks);

// N x K context label distributions: row i is the class histogram of i's
// k-hop neighborhood under `labels_all` (which must be total). Nodes with an
// empty context get the global label distribution.
Matrix context_label_targets(const Graph& g, const std::vector<int>& labels_all, int k_hop);

// Density-based label correction. Per class: sample min(m, population) nodes,
// rank pairwise cosine similarities, keep the top-p densest nodes as
// prototypes, then re-label every non-training node by its average prototype
// similarity. Training nodes always keep their labels.
std::vector<int> correct_labels(const Matrix& z, const std::vector<int>& labels_all,
                                const SplitMasks& masks, int num_classes, int m, int p,
                                std::uint64_t seed);

// mse(pred, ybar) + alpha * mse(pred, yhat_context), both over `unlabeled`.
// alpha = 0 returns the first term unchanged.
ad::Var corrected_context_loss(ad::Var pred, const Matrix& ybar, const Matrix& yhat_context,
                               double alpha, const std::vector<int>& unlabeled);

// Multinomial logistic regression trained by full-batch gradient descent on
// the tape; shared by ICA and the representation probe.
struct SoftmaxRegression {
  Matrix w;  // D x K
  Matrix b;  // 1 x K
};
SoftmaxRegression fit_softmax_regression(const Matrix& x, const std::vector<int>& labels,
                                         const std::vector<int>& rows, int num_classes,
                                         int steps = 200, double lr = 0.1, double l2 = 1e-4);
Matrix softmax_regression_probs(const SoftmaxRegression& model, const Matrix& x);

nlohmann::json weak_labels_to_json(const WeakLabels& wl);

}  // namespace ssgnn
