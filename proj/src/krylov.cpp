#include "bec/krylov.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

#include "bec/errors.hpp"

namespace bec {

KrylovPropagator::KrylovPropagator(const SparseMatrixC& h, double tolerance, int max_dim)
    : h_(h), tol_(tolerance), max_dim_(max_dim) {
  if (h.rows() != h.cols()) throw DimensionError("Krylov propagator needs a square matrix");
  if (max_dim < 2) throw DomainError("Krylov subspace must allow at least 2 vectors");
  if (!(tolerance > 0.0)) throw DomainError("Krylov tolerance must be positive");
}

void KrylovPropagator::step(Eigen::VectorXcd& v, double dt, PropagationStats& stats) const {
  if (try_step(v, dt, stats)) return;
  ++stats.refinements;
  step(v, 0.5 * dt, stats);
  step(v, 0.5 * dt, stats);
}

bool KrylovPropagator::try_step(Eigen::VectorXcd& v, double dt, PropagationStats& stats) const {
  const double beta0 = v.norm();
  if (beta0 == 0.0) return true;
  const Eigen::Index n = v.size();
  const int mmax = static_cast<int>(std::min<Eigen::Index>(max_dim_, n));

  Eigen::MatrixXcd basis(n, mmax);
  std::vector<double> alpha, beta;
  basis.col(0) = v / beta0;
  Eigen::VectorXcd w(n);

  for (int j = 0; j < mmax; ++j) {
    w.noalias() = h_ * basis.col(j);
    alpha.push_back(basis.col(j).dot(w).real());
    // Full reorthogonalization, two passes.
    for (int pass = 0; pass < 2; ++pass)
      for (int k = 0; k <= j; ++k) w -= basis.col(k).dot(w) * basis.col(k);
    const double b = w.norm();

    const int m = j + 1;
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
    for (int k = 0; k < m; ++k) t(k, k) = alpha[static_cast<std::size_t>(k)];
    for (int k = 0; k + 1 < m; ++k) t(k, k + 1) = t(k + 1, k) = beta[static_cast<std::size_t>(k)];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
    const Eigen::VectorXd& ev = es.eigenvalues();
    const Eigen::MatrixXd& u = es.eigenvectors();
    Eigen::VectorXcd y(m);
    for (int r = 0; r < m; ++r) {
      cplx acc = 0.0;
      for (int k = 0; k < m; ++k) acc += u(r, k) * std::polar(1.0, -dt * ev[k]) * u(0, k);
      y[r] = acc;
    }

    const bool breakdown = b <= 1e-13 * std::max(1.0, std::abs(alpha.back()));
    const double err = breakdown ? 0.0 : beta0 * b * std::abs(y[m - 1]);
    const bool exhausted = m == n;
    if (breakdown || err < tol_ || exhausted) {
      v = beta0 * (basis.leftCols(m) * y);
      ++stats.substeps;
      stats.max_krylov_dim = std::max(stats.max_krylov_dim, m);
      stats.max_error_estimate = std::max(stats.max_error_estimate, err);
      return true;
    }
    if (m == mmax) return false;
    beta.push_back(b);
    basis.col(m) = w / b;
  }
  return false;
}

DensePropagator::DensePropagator(const SparseMatrixC& h) {
  Eigen::MatrixXcd dense(h);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(dense);
  if (es.info() != Eigen::Success) throw Error("dense eigendecomposition failed");
  vectors_ = es.eigenvectors();
  values_ = es.eigenvalues();
}

void DensePropagator::step(Eigen::VectorXcd& v, double dt) const {
  Eigen::VectorXcd c = vectors_.adjoint() * v;
  for (Eigen::Index k = 0; k < c.size(); ++k) c[k] *= std::polar(1.0, -dt * values_[k]);
  v = vectors_ * c;
}

}  // namespace bec
