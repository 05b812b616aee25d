#include "ssgnn/dense.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace ssgnn {

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) {
    throw std::runtime_error(std::string(what) + ": non-finite value encountered");
  }
}

Matrix glorot_init(Eigen::Index rows, Eigen::Index cols, RngStream& rng) {
  if (rows <= 0 || cols <= 0) {
    throw std::invalid_argument("glorot_init: dimensions must be positive");
  }
  const double s = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      m(i, j) = rng.uniform(-s, s);
    }
  }
  return m;
}

namespace {

// One orthonormalization step; thin Q of the input.
Matrix thin_q(const Matrix& m) {
  Eigen::HouseholderQR<Matrix> qr(m);
  Matrix q = qr.householderQ() * Matrix::Identity(m.rows(), m.cols());
  return q;
}

// Frobenius norm of the component of q_new outside the span of q_old.
double subspace_change(const Matrix& q_old, const Matrix& q_new) {
  Matrix resid = q_new - q_old * (q_old.transpose() * q_new);
  return resid.norm();
}

void fix_column_signs(Matrix& q) {
  for (Eigen::Index j = 0; j < q.cols(); ++j) {
    Eigen::Index imax = 0;
    double best = -1.0;
    for (Eigen::Index i = 0; i < q.rows(); ++i) {
      const double a = std::abs(q(i, j));
      if (a > best) {
        best = a;
        imax = i;
      }
    }
    if (q(imax, j) < 0.0) q.col(j) = -q.col(j);
  }
}

}  // namespace

Matrix pca_reduce(const Matrix& x, Eigen::Index d) {
  const Eigen::Index n = x.rows();
  const Eigen::Index f = x.cols();
  if (d < 1 || d > std::min(n, f)) {
    throw std::invalid_argument("pca_reduce: d must satisfy 1 <= d <= min(N, F)");
  }
  Matrix xc = x.rowwise() - x.colwise().mean();
  if (xc.norm() == 0.0) {
    return Matrix::Zero(n, d);
  }

  constexpr int kMaxIter = 500;
  constexpr double kTol = 1e-9;
  RngStream rng(0x5CA1AB1EULL, "pca-start");

  const bool use_gram = n < f;
  // Iterate on the smaller of X'X (F x F) and XX' (N x N).
  Matrix c = use_gram ? Matrix(xc * xc.transpose()) : Matrix(xc.transpose() * xc);
  const Eigen::Index dim = c.rows();

  Matrix q(dim, d);
  for (Eigen::Index i = 0; i < dim; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) q(i, j) = rng.uniform(-1.0, 1.0);
  }
  q = thin_q(q);
  for (int it = 0; it < kMaxIter; ++it) {
    Matrix q_next = thin_q(c * q);
    const double delta = subspace_change(q, q_next);
    q = std::move(q_next);
    if (delta < kTol) break;
  }

  // Order columns by Rayleigh quotient, descending.
  Vector ray(d);
  Matrix cq = c * q;
  for (Eigen::Index j = 0; j < d; ++j) ray(j) = q.col(j).dot(cq.col(j));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return ray(a) > ray(b); });
  Matrix q_sorted(dim, d);
  for (Eigen::Index j = 0; j < d; ++j) q_sorted.col(j) = q.col(order[static_cast<std::size_t>(j)]);

  Matrix directions;  // F x d
  if (use_gram) {
    // Gram eigenvector u maps to direction X'u / |X'u|.
    directions.resize(f, d);
    for (Eigen::Index j = 0; j < d; ++j) {
      Vector v = xc.transpose() * q_sorted.col(j);
      const double norm = v.norm();
      directions.col(j) = norm > 0.0 ? Vector(v / norm) : Vector(Vector::Zero(f));
    }
  } else {
    directions = q_sorted;
  }
  fix_column_signs(directions);
  Matrix out = xc * directions;
  require_finite(out, "pca_reduce");
  return out;
}

double cosine_sim(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("cosine_sim: vector lengths differ");
  }
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

Matrix cosine_similarity_matrix(const Matrix& x) {
  Matrix normed = x;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double n = x.row(i).norm();
    if (n > 0.0) {
      normed.row(i) /= n;
    } else {
      normed.row(i).setZero();
    }
  }
  return normed * normed.transpose();
}

int argmax_row(const Matrix& m, Eigen::Index row) {
  int best = 0;
  double best_val = m(row, 0);
  for (Eigen::Index j = 1; j < m.cols(); ++j) {
    if (m(row, j) > best_val) {
      best_val = m(row, j);
      best = static_cast<int>(j);
    }
  }
  return best;
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    Eigen::RowVectorXd e = (logits.row(i).array() - mx).exp();
    out.row(i) = e / e.sum();
  }
  return out;
}

}  // namespace ssgnn
