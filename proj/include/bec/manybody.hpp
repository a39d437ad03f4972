#ifndef BEC_MANYBODY_HPP
#define BEC_MANYBODY_HPP

#include <filesystem>
#include <memory>
#include <optional>

#include <Eigen/Sparse>

#include "bec/fock_basis.hpp"
#include "bec/lattice.hpp"

namespace bec {

using SparseMatrixC = Eigen::SparseMatrix<cplx, Eigen::RowMajor>;
using BasisPtr = std::shared_ptr<const FockBasis>;

BasisPtr build_basis(int particles, int modes, std::size_t cap = kDefaultDimensionCap);

struct ManyBodyState {
  BasisPtr basis;
  Eigen::VectorXcd coefficients;

  ManyBodyState(BasisPtr b, Eigen::VectorXcd c);
  int particles() const { return basis->particles(); }
  int modes() const { return basis->modes(); }
  double norm() const { return coefficients.norm(); }
  bool is_normalized(double tol = 1e-12) const { return std::abs(norm() - 1.0) <= tol; }
};

/// Uniformly random unit vector from a seeded Gaussian.
ManyBodyState random_state(BasisPtr basis, unsigned seed);

struct SparseHamiltonian {
  BasisPtr basis;
  SparseMatrixC matrix;
  double lambda = 0.0;
  bool hermitian = false;
  std::size_t dimension() const { return basis->dimension(); }
};

/// dGamma(h) = sum_{x,y} h(x,y) a_x^* a_y on one particle-number sector.
SparseMatrixC second_quantize(const FockBasis& basis, const Eigen::MatrixXcd& h);

/// sum_x n_x (n_x - 1), diagonal.
Eigen::VectorXd pair_count_diagonal(const FockBasis& basis);

/// H_N = dGamma(-Delta) + (lambda / 2N) sum_x a_x^* a_x^* a_x a_x. With
/// include_diagonal false the on-site part of -Delta is left out, giving
/// the literal nearest-neighbor hopping form.
SparseHamiltonian build_hamiltonian(const LatticeGeometry& g, double lambda, int particles,
                                    std::size_t cap = kDefaultDimensionCap,
                                    bool include_diagonal = true);

/// phi^{(x)N}: coefficient sqrt(N! / prod n_x!) prod phi(x)^{n_x}.
ManyBodyState product_state(const ComplexField& phi, int particles, BasisPtr basis = nullptr);

/// Matrix with entries <m| a_x psi> for m in the (N-1)-particle basis.
Eigen::MatrixXcd annihilation_amplitudes(const ManyBodyState& psi, const FockBasis& lower);

/// gamma(x,y) = <psi, a_y^* a_x psi>.
Eigen::MatrixXcd reduced_density(const ManyBodyState& psi);

/// One-body operator, optionally declared local to a region: the kernel
/// must then vanish outside region x region.
class OneBodyObservable {
 public:
  explicit OneBodyObservable(Eigen::MatrixXcd kernel);
  OneBodyObservable(Eigen::MatrixXcd kernel, RegionMask locality);

  static OneBodyObservable site_projector(const LatticeGeometry& g, std::size_t site);
  static OneBodyObservable region_indicator(const RegionMask& mask);

  const Eigen::MatrixXcd& kernel() const { return kernel_; }
  const std::optional<RegionMask>& locality() const { return locality_; }
  double op_norm() const;

 private:
  Eigen::MatrixXcd kernel_;
  std::optional<RegionMask> locality_;
};

struct MeanFieldError {
  double absolute = 0.0;    ///< |Tr((gamma - N|phi><phi|) O)|
  double normalized = 0.0;  ///< absolute / (N ||O||_op)
};

MeanFieldError mean_field_error(const Eigen::MatrixXcd& gamma, int particles,
                                const ComplexField& phi, const OneBodyObservable& o);
MeanFieldError mean_field_error(const ManyBodyState& psi, const ComplexField& phi,
                                const OneBodyObservable& o);

/// Sum of singular values.
double trace_norm(const Eigen::MatrixXcd& a);

enum class PropagatorKind { automatic, krylov, dense };

struct ManyBodyOptions {
  double dt = 0.01;
  PropagatorKind method = PropagatorKind::automatic;
  int sample_stride = 1;
  bool keep_states = true;
  double krylov_tolerance = 1e-10;
  int krylov_max_dim = 40;
};

struct PropagationStats {
  long substeps = 0;        ///< Krylov steps after any splitting
  long refinements = 0;     ///< steps split because the error estimate failed
  int max_krylov_dim = 0;
  double max_error_estimate = 0.0;
  bool used_dense = false;
};

struct ManyBodyTrajectory {
  BasisPtr basis;
  std::vector<double> times;
  std::vector<ManyBodyState> states;
  std::vector<double> norms;
  PropagationStats stats;
};

/// Dimension up to which the automatic choice uses exact diagonalization.
inline constexpr std::size_t kDensePropagatorCap = 2000;

ManyBodyTrajectory evolve_manybody(const ManyBodyState& psi0, const SparseHamiltonian& h,
                                   double t_final, const ManyBodyOptions& opts);

void write_state(const std::filesystem::path& path, const ManyBodyState& psi);
ManyBodyState read_state(const std::filesystem::path& path);

}  // namespace bec

#endif  // BEC_MANYBODY_HPP
