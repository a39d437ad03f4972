#ifndef BEC_ASTLO_HPP
#define BEC_ASTLO_HPP

#include <vector>

#include "bec/fluctuation.hpp"
#include "bec/hartree.hpp"

namespace bec {

/// Smooth monotone switch f(mu) = int_{-inf}^{mu} h^2 / int h^2, where h is
/// the bump exp(-1/(1-u^2)) rescaled to the open interval (lo, hi). The
/// standard member of the cutoff class for a given epsilon has
/// (lo, hi) = (epsilon/2, epsilon).
class CutoffFunction {
 public:
  CutoffFunction(double epsilon, double lo, double hi);

  double epsilon() const { return epsilon_; }
  double support_lo() const { return lo_ + shift_; }
  double support_hi() const { return hi_ + shift_; }

  double value(double mu) const;
  double derivative(double mu) const;
  double operator()(double mu) const { return value(mu); }

  /// mu -> f(mu - delta); used to exercise the geometric checks.
  CutoffFunction shifted(double delta) const;

 private:
  double bump2(double s) const;  // h(s)^2 before normalization
  double partial(double a, double b) const;

  double epsilon_;
  double lo_;
  double hi_;
  double shift_ = 0.0;
  double norm_ = 1.0;
  std::vector<double> nodes_;       // panel edges on [lo, hi]
  std::vector<double> cumulative_;  // normalized integral up to each edge
};

/// The standard cutoff on (epsilon/2, epsilon).
CutoffFunction make_cutoff(double epsilon);

struct ClassReport {
  int grid_points = 0;
  double max_below = 0.0;          ///< max |f| on (-inf, epsilon/2]
  double max_above_defect = 0.0;   ///< max |f - 1| on [epsilon, inf)
  double min_value = 0.0;
  double max_value = 0.0;
  double min_derivative = 0.0;
  double max_derivative_outside = 0.0;  ///< max |f'| outside (epsilon/2, epsilon)
  double max_decrease = 0.0;       ///< largest drop between consecutive grid points
  bool pass = false;
};

/// Checks the defining properties of the cutoff class on a uniform grid
/// over [-epsilon, 2 epsilon].
ClassReport check_cutoff_class(const CutoffFunction& f, int grid_points = 10000, double tol = 1e-12);

/// Smallest C with f1' + f2' <= C f3' on a uniform grid covering the
/// supports; infinity if f3' vanishes where f1' + f2' does not.
double closure_constant(const CutoffFunction& f1, const CutoffFunction& f2, const CutoffFunction& f3,
                        int grid_points = 10000);

/// Parameters of the spacetime localization: v' = (kappa + v)/2,
/// delta = v' - kappa, epsilon = v - v'.
struct AstloConfig {
  double big_r = 0.0;
  double small_r = 0.0;
  double v = 0.0;
  double s = 0.0;
  int n = 1;
  double kappa = 2.0;

  /// s defaults to (R - r)/v.
  static AstloConfig make(int dimension, double big_r, double small_r, double v, int n = 1);

  double v_prime() const { return 0.5 * (kappa + v); }
  double delta() const { return v_prime() - kappa; }
  double epsilon() const { return v - v_prime(); }
  /// Throws DomainError unless v > kappa, R >= r + v, s > 0.
  void validate() const;
};

/// f((R - v't - |x|)/s).
double eval_fts(const CutoffFunction& f, const LatticeGeometry& g, std::size_t x, double t,
                const AstloConfig& cfg);
std::vector<double> eval_fts_all(const CutoffFunction& f, const LatticeGeometry& g, double t,
                                 const AstloConfig& cfg);

/// sum_x f_ts(x) <n_x> for given excitation site densities.
double astlo_expectation(const Eigen::VectorXd& densities, const CutoffFunction& f, const LatticeGeometry& g,
                         double t, const AstloConfig& cfg);
double astlo_expectation(const ExcitationVector& xi, const CutoffFunction& f, double t, const AstloConfig& cfg);
double astlo_expectation(const ManyBodyState& psi, const ComplexField& phi, const CutoffFunction& f, double t,
                         const AstloConfig& cfg);

struct GeometricReport {
  long checked = 0;
  long lower_violations = 0;    ///< sites with f_0s(x) > 1_{B_R}(x)
  long upper_violations = 0;    ///< (x, t) with 1_{B_r}(x) > f_ts(x), 0 <= t <= s
  long support_violations = 0;  ///< (x, t) with f_ts(x) != 0 and |x| > R
  bool pass = false;
};

/// Both pointwise inequalities over every site and time_samples times in
/// [0, s] (endpoints included), plus the support of f_ts in B_R.
GeometricReport geometric_checks(const CutoffFunction& f, const LatticeGeometry& g, const AstloConfig& cfg,
                                 int time_samples = 51, double tol = 1e-12);

/// Time series of fluctuation moments sampled on the trajectory times.
struct FluctuationSeries {
  std::vector<double> times;
  std::vector<double> local_outer;  ///< <N_{B_{R+1}}>_t
  std::vector<double> second_moment;  ///< <(N+1)^2>_t
};

struct Diagnostics {
  std::vector<double> times;
  std::vector<double> m_r;  ///< |lambda| int (||phi||_inf(B_R) + 5||phi||_inf(B_R)^2)
  std::vector<double> e_rr; ///< propagation remainder plus interaction remainder
};

Diagnostics compute_diagnostics(const HartreeTrajectory& traj, const FluctuationSeries& moments,
                                const AstloConfig& cfg, int particles);

struct LocalBoundReport {
  double fitted_c = 0.0;  ///< smallest C over the in-regime samples
  std::vector<double> times;
  std::vector<double> lhs;  ///< e^{-M_R} <N_{B_r}>_t
  std::vector<double> rhs;  ///< bound evaluated with fitted_c
  std::vector<bool> in_regime;  ///< t <= (R - r)/v
  double initial_outer = 0.0;   ///< <N_{B_R}>_0
};

/// Fits the smallest C making
///   e^{-M_R(t)} <N_{B_r}>_t <= (1 + C/(R-r)) <N_{B_R}>_0 + C E_{R,r}(t)
/// hold at every sample with t <= (R - r)/v.
LocalBoundReport check_local_bound(const std::vector<double>& local_inner, double initial_outer,
                                   const Diagnostics& diag, const AstloConfig& cfg);

}  // namespace bec

#endif  // BEC_ASTLO_HPP
