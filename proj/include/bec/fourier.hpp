#ifndef BEC_FOURIER_HPP
#define BEC_FOURIER_HPP

#include <memory>

#include "bec/lattice.hpp"

namespace bec {

/// Reusable unitary DFT on a periodic box. Plans are built with
/// FFTW_ESTIMATE so results do not depend on timing measurements.
class FftPlan {
 public:
  explicit FftPlan(const LatticeGeometry& g);
  ~FftPlan();
  FftPlan(const FftPlan&) = delete;
  FftPlan& operator=(const FftPlan&) = delete;

  void forward(Eigen::VectorXcd& v);
  void inverse(Eigen::VectorXcd& v);

  const LatticeGeometry& geometry() const { return geometry_; }

 private:
  struct Impl;
  LatticeGeometry geometry_;
  std::unique_ptr<Impl> impl_;
};

/// omega(k) for every FFT output slot, in FFT index order.
Eigen::VectorXd dispersion_table(const LatticeGeometry& g);

}  // namespace bec

#endif  // BEC_FOURIER_HPP
