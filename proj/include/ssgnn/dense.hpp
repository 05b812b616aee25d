#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "ssgnn/random.hpp"

namespace ssgnn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using SpMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// Throws std::runtime_error naming `what` if any entry is NaN/Inf.
void require_finite(const Matrix& m, const char* what);

// Uniform in [-s, s] with s = sqrt(6 / (rows + cols)).
Matrix glorot_init(Eigen::Index rows, Eigen::Index cols, RngStream& rng);

// Projection of mean-centered X onto its top-d principal directions, found by
// simultaneous power iteration with QR orthonormalization on the covariance
// (or the Gram matrix when N < F). Column signs are fixed so each direction's
// largest-magnitude coordinate is positive; output is deterministic in (X, d).
Matrix pca_reduce(const Matrix& x, Eigen::Index d);

// a.b / (|a||b|); 0 when either norm is 0.
double cosine_sim(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b);

// Row-wise cosine similarity of x against itself (N x N). Zero rows yield
// zero similarity against everything.
Matrix cosine_similarity_matrix(const Matrix& x);

// argmax over a row, ties broken by lowest column index.
int argmax_row(const Matrix& m, Eigen::Index row);

// Stable row-wise softmax (max subtraction).
Matrix softmax_rows(const Matrix& logits);

}  // namespace ssgnn
