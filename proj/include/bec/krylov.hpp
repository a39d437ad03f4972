#ifndef BEC_KRYLOV_HPP
#define BEC_KRYLOV_HPP

#include "bec/manybody.hpp"

namespace bec {

/// exp(-i dt H) v by Lanczos with full reorthogonalization. The subspace
/// grows until the a posteriori estimate beta_m |e_m^T exp(-i dt T) e_1|
/// drops below the tolerance; if max_dim is reached the step is split.
class KrylovPropagator {
 public:
  KrylovPropagator(const SparseMatrixC& h, double tolerance = 1e-10, int max_dim = 40);

  void step(Eigen::VectorXcd& v, double dt, PropagationStats& stats) const;

 private:
  // One attempt; false if the subspace budget was exhausted.
  bool try_step(Eigen::VectorXcd& v, double dt, PropagationStats& stats) const;

  const SparseMatrixC& h_;
  double tol_;
  int max_dim_;
};

/// exp(-i dt H) v from a full Hermitian eigendecomposition.
class DensePropagator {
 public:
  explicit DensePropagator(const SparseMatrixC& h);
  void step(Eigen::VectorXcd& v, double dt) const;

 private:
  Eigen::MatrixXcd vectors_;
  Eigen::VectorXd values_;
};

}  // namespace bec

#endif  // BEC_KRYLOV_HPP
