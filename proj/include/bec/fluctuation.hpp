#ifndef BEC_FLUCTUATION_HPP
#define BEC_FLUCTUATION_HPP

#include <memory>
#include <vector>

#include "bec/hartree.hpp"
#include "bec/manybody.hpp"

namespace bec {

/// Orthonormal one-body basis adapted to a condensate phi: column 0 of the
/// rotation is phi, the remaining columns span the orthogonal complement.
/// The complement is completed from the standard basis vectors with the
/// largest-|phi| coordinate left out, then orthonormalized twice.
///
/// phi == 0 gives a degenerate frame: q = 1 and every site is an
/// excitation mode.
class CondensateFrame {
 public:
  explicit CondensateFrame(const ComplexField& phi);

  const ComplexField& phi() const { return phi_; }
  const LatticeGeometry& geometry() const { return phi_.geometry(); }
  bool degenerate() const { return degenerate_; }
  int sites() const { return static_cast<int>(phi_.size()); }
  /// Number of modes orthogonal to phi (M - 1, or M when degenerate).
  int excitation_modes() const { return static_cast<int>(perp_.cols()); }

  /// Full M x M unitary with phi first (identity when degenerate).
  const Eigen::MatrixXcd& rotation() const { return rotation_; }
  /// M x K isometry onto the orthogonal complement of phi.
  const Eigen::MatrixXcd& orthogonal_modes() const { return perp_; }
  /// q = 1 - |phi><phi|.
  Eigen::MatrixXcd projector() const;
  Eigen::VectorXcd project(const Eigen::VectorXcd& f) const;
  /// Coordinates <v_k, f> of f in the excitation modes.
  Eigen::VectorXcd excitation_coordinates(const Eigen::VectorXcd& f) const;

 private:
  ComplexField phi_;
  bool degenerate_ = false;
  Eigen::MatrixXcd rotation_;
  Eigen::MatrixXcd perp_;
};

using FramePtr = std::shared_ptr<const CondensateFrame>;

/// Direct sum over j = 0..N of the j-particle sectors over K modes,
/// concatenated in order of j.
class TruncatedFockSpace {
 public:
  TruncatedFockSpace(int particles, int modes, std::size_t cap = kDefaultDimensionCap);

  int particles() const { return particles_; }
  int modes() const { return modes_; }
  std::size_t dimension() const { return dimension_; }
  const FockBasis& sector(int j) const { return *sectors_[static_cast<std::size_t>(j)]; }
  std::size_t offset(int j) const { return offsets_[static_cast<std::size_t>(j)]; }
  int sector_of(std::size_t index) const;

  /// Diagonal of the excitation number operator.
  const Eigen::VectorXd& number_diagonal() const { return number_; }
  /// Annihilator of mode k, mapping sector j into sector j - 1.
  const SparseMatrixC& annihilator(int k) const { return annihilators_[static_cast<std::size_t>(k)]; }
  /// Block-diagonal second quantization of a K x K kernel.
  SparseMatrixC second_quantize(const Eigen::MatrixXcd& kernel) const;

 private:
  int particles_;
  int modes_;
  std::size_t dimension_ = 0;
  std::vector<std::unique_ptr<FockBasis>> sectors_;
  std::vector<std::size_t> offsets_;
  Eigen::VectorXd number_;
  std::vector<SparseMatrixC> annihilators_;
};

using SpacePtr = std::shared_ptr<const TruncatedFockSpace>;

/// The fluctuation xi = U psi of an N-particle state relative to a frame.
struct ExcitationVector {
  FramePtr frame;
  SpacePtr space;
  Eigen::VectorXcd coefficients;

  int particles() const { return space->particles(); }
  Eigen::VectorXcd sector_coefficients(int j) const;
  /// ||xi^(j)||^2 for j = 0..N.
  std::vector<double> sector_weights() const;
  double norm() const { return coefficients.norm(); }
};

/// Coefficients of an N-particle state in a rotated mode basis. The new
/// annihilators are d_k = sum_j conj(B(j,k)) a_j; both sides use the
/// ordering of FockBasis(N, M).
Eigen::VectorXcd change_mode_basis(const FockBasis& basis, const Eigen::VectorXcd& coefficients,
                                   const Eigen::MatrixXcd& b);

ExcitationVector excitation_decompose(const ManyBodyState& psi, FramePtr frame,
                                      SpacePtr space = nullptr);
ExcitationVector excitation_decompose(const ManyBodyState& psi, const ComplexField& phi);
ManyBodyState excitation_reconstruct(const ExcitationVector& xi, BasisPtr basis = nullptr);

/// Operators on the truncated Fock space built over a frame.
class ExcitationAlgebra {
 public:
  ExcitationAlgebra(FramePtr frame, int particles, std::size_t cap = kDefaultDimensionCap);
  ExcitationAlgebra(FramePtr frame, SpacePtr space);

  const CondensateFrame& frame() const { return *frame_; }
  FramePtr frame_ptr() const { return frame_; }
  const TruncatedFockSpace& space() const { return *space_; }
  SpacePtr space_ptr() const { return space_; }
  int particles() const { return space_->particles(); }
  std::size_t dimension() const { return space_->dimension(); }

  SparseMatrixC identity() const;
  SparseMatrixC number() const;
  /// sqrt((N - Number) / N).
  SparseMatrixC depletion_factor() const;
  /// c_x = a(q delta_x).
  SparseMatrixC site_annihilator(std::size_t x) const;
  /// n_x = c_x^* c_x.
  SparseMatrixC site_density(std::size_t x) const;
  /// sum_{z in X} n_z.
  SparseMatrixC region_number(const RegionMask& x) const;
  /// a(q f); a is antilinear in f.
  SparseMatrixC annihilation(const Eigen::VectorXcd& f) const;
  SparseMatrixC creation(const Eigen::VectorXcd& f) const;
  /// b(f) = sqrt((N - Number)/N) a(f); f must be orthogonal to phi.
  SparseMatrixC b(const Eigen::VectorXcd& f) const;
  SparseMatrixC b_dagger(const Eigen::VectorXcd& f) const;
  /// dGamma(q A q) for a site kernel A.
  SparseMatrixC second_quantize(const Eigen::MatrixXcd& a) const;

 private:
  void require_orthogonal(const Eigen::VectorXcd& f) const;

  FramePtr frame_;
  SpacePtr space_;
};

struct FluctuationNumber {
  double direct = 0.0;      ///< powers of dGamma(q 1_X q) on the N-body state
  double excitation = 0.0;  ///< powers of sum_{z in X} n_z on the fluctuation
  double difference() const { return std::abs(direct - excitation); }
};

/// <psi, (N^+_X)^j psi> evaluated by both routes; throws ConsistencyError
/// when they disagree by more than 1e-6.
FluctuationNumber fluctuation_number(const ManyBodyState& psi, const ComplexField& phi,
                                     const RegionMask& x, int power);

/// <(Number + 1)^j> for j = 1..powers from the sector weights.
std::vector<double> excitation_moments(const ExcitationVector& xi, int powers = 3);

/// <n_x> for every site from the reduced density: (q gamma q)(x, x).
Eigen::VectorXd excitation_densities(const Eigen::MatrixXcd& gamma, const CondensateFrame& frame);
/// Same quantity from the fluctuation vector, sum over x of ||c_x xi||^2.
Eigen::VectorXd excitation_densities(const ExcitationVector& xi);

struct TraceDifference {
  double lhs = 0.0;            ///< Tr(gamma O) - N <phi, O phi>
  double rhs = 0.0;            ///< fluctuation-side evaluation including -<phi,O phi><Number>
  double defect = 0.0;
  double rhs_without_depletion = 0.0;  ///< the same without the -<phi,O phi><Number> term
  double defect_without_depletion = 0.0;
};

/// Splits Tr(gamma O) - N<phi, O phi> into dGamma(qOq), the linear b-field
/// terms and the depletion -<phi,O phi><Number>, all in the excitation
/// picture. Throws ConsistencyError if the defect exceeds 1e-6.
TraceDifference trace_diff_decomposition(const ManyBodyState& psi, const ComplexField& phi,
                                         const Eigen::MatrixXcd& o);

struct LinearResponseResult {
  ComplexField u;
  double error_estimate = 0.0;  ///< Richardson estimate of the final error
  double growth_ratio = 0.0;    ///< ||u||^2 / (||f||^2 exp(2|lambda| int ||phi||_inf^2))
  double step = 0.0;
  int halvings = 0;
};

/// Integrates i d/ds u = (-Delta + lambda|phi_s|^2 + lambda Kt1_s - lambda Kt2_s J) u
/// backwards from u(t) = f to s with classical RK4, halving the step until
/// the Richardson estimate is below tolerance. The trajectory must keep
/// fields; fields between samples are filled in by the splitting stepper.
LinearResponseResult evolve_L(const HartreeTrajectory& traj, double t, double s,
                              const ComplexField& f, double tolerance = 1e-8);

// ---- generator of the fluctuation dynamics ----

/// Dense operator checks refuse truncated spaces larger than this.
inline constexpr std::size_t kDenseOperatorCap = 4096;

struct RemainderTerms {
  SparseMatrixC r1;
  SparseMatrixC r2;
  SparseMatrixC r3;
};

/// dGamma(q(-Delta + lambda|phi|^2 + lambda Kt1)q)
///   + (lambda/2) sum_x [phi(x)^2 b_x^* b_x^* + conj(phi(x))^2 b_x b_x].
SparseMatrixC build_quadratic_generator(const ExcitationAlgebra& alg, double lambda);

/// R1 = -(2 lambda/N) Number dGamma(Kt1) - (lambda/sqrt N)[b(g) Number + Number b^*(g)]
///      + (lambda mu/N) Number (Number + 1),  g = q|phi|^2 phi, mu = sum|phi|^4 / 2;
/// R2 = (lambda/sqrt N) sum_x conj(phi(x)) n_x b_x + h.c.;
/// R3 = (lambda/2N) sum_x c_x^* c_x^* c_x c_x.
RemainderTerms build_remainders(const ExcitationAlgebra& alg, double lambda);

/// Quadratic part plus remainders.
SparseMatrixC build_generator(const ExcitationAlgebra& alg, double lambda);

/// The same generator obtained without the expansion: U (H_N - dGamma(h_phi)) U^*
/// + dGamma(q h_phi q) with U applied as a dense matrix. Agrees with
/// build_generator up to the scalar -lambda (N+1) sum|phi|^4 / 2.
Eigen::MatrixXcd conjugated_generator(const ExcitationAlgebra& alg, double lambda);

/// dGamma(q(-Delta)q): what the free kinetic energy becomes on the truncated space.
SparseMatrixC compressed_kinetic(const ExcitationAlgebra& alg);

Eigen::MatrixXcd to_dense(const SparseMatrixC& m, std::size_t cap = kDenseOperatorCap);

struct CommutatorInequalityReport {
  double min_eigenvalue = 0.0;  ///< lambda_min(RHS - LHS)
  double lhs_norm = 0.0;
  double rhs_norm = 0.0;
  double vacuum_coupling = 0.0;  ///< ||LHS Omega||; RHS Omega = 0
  std::size_t dimension = 0;
  bool pass = false;             ///< min_eigenvalue >= -1e-8
};

/// Compares i[L - dGamma(-Delta), sum_z h(z) n_z] with
/// 2|lambda| sum_x |h(x)| (2|phi|^2 n_x + |phi|^3 N^{-1/2} Number n_x^{1/2}
///                         + |phi| N^{-1/2} n_x (n_x + 1)^{1/2}).
CommutatorInequalityReport verify_commutator_inequality(const ExcitationAlgebra& alg,
                                                        const Eigen::VectorXd& h, double lambda);

struct MomentCommutatorReport {
  double phi_linf = 0.0;
  double comm1_constant = 0.0;   ///< ||K (Number+1)^{-1}|| / (|lambda| ||phi||_inf)
  double comm2_constant = 0.0;   ///< ||(Number+3)^{-1/2}[Number,K'](Number+1)^{-1/2}|| / (...)
  double comm1_max_ratio = 0.0;  ///< largest ratio over the random draws
  double comm2_max_ratio = 0.0;
  int draws = 0;
  bool pass = false;             ///< constants finite and below 1e3
};

/// K' = [Number, L - dGamma(-Delta)], K = K'. Ratios of the form
/// |<xi, K psi>| / (|lambda| ||phi||_inf ||(Number+1) psi|| ||xi||) over random
/// unit draws, plus the exact operator-norm constants they are bounded by.
MomentCommutatorReport verify_moment_commutators(const ExcitationAlgebra& alg, double lambda,
                                                 int draws, unsigned seed);

}  // namespace bec

#endif  // BEC_FLUCTUATION_HPP
