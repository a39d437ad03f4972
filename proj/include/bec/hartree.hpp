#ifndef BEC_HARTREE_HPP
#define BEC_HARTREE_HPP

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "bec/fourier.hpp"
#include "bec/lattice.hpp"

namespace bec {

/// Fixed-step splitting integrators for i d/dt phi = (-Delta + lambda |phi|^2) phi.
/// All are compositions of the symmetric Strang step; every substep is exact.
enum class SplittingScheme { strang, yoshida4, yoshida6 };

std::string to_string(SplittingScheme s);
SplittingScheme scheme_from_string(const std::string& s);
int order_of(SplittingScheme s);

struct HartreeOptions {
  double dt = 0.01;
  SplittingScheme scheme = SplittingScheme::strang;
  /// Record every k-th step (the initial state is always recorded).
  int sample_stride = 1;
  /// Keep full fields at the sample times; otherwise only scalar series.
  bool keep_fields = true;
  /// Extra l^p norms to record at every sample (2 and infinity always are).
  std::vector<double> record_norms;
  bool record_energy = true;
};

/// Sampled solution of the discrete Hartree equation.
struct HartreeTrajectory {
  HartreeTrajectory(LatticeGeometry g, double lam, double step, SplittingScheme s)
      : geometry(std::move(g)), lambda(lam), dt(step), scheme(s) {}

  LatticeGeometry geometry;
  double lambda = 0.0;
  double dt = 0.0;
  SplittingScheme scheme = SplittingScheme::strang;
  double initial_l1 = 0.0;
  std::vector<double> times;
  std::vector<ComplexField> snapshots;  ///< empty unless keep_fields
  std::vector<double> linf;
  std::vector<double> l2;
  std::vector<double> energy;           ///< empty unless record_energy
  std::map<double, std::vector<double>> norms;

  std::size_t sample_count() const { return times.size(); }
  bool has_fields() const { return !snapshots.empty(); }
  double t_final() const { return times.empty() ? 0.0 : times.back(); }
  const ComplexField& field_at(std::size_t i) const { return snapshots.at(i); }
  /// Norm series for p, from the recorded table or recomputed from fields.
  std::vector<double> norm_series(double p) const;
};

/// Exact propagation by the linear part e^{i t Delta} on a periodic box,
/// plus the pointwise nonlinear phase. Holds FFT plans for repeated use.
class HartreeStepper {
 public:
  HartreeStepper(const LatticeGeometry& g, double lambda);

  void linear(Eigen::VectorXcd& v, double tau);
  void nonlinear(Eigen::VectorXcd& v, double tau) const;
  void step(Eigen::VectorXcd& v, double dt, SplittingScheme scheme);

  double energy(const Eigen::VectorXcd& v);
  double kinetic(const Eigen::VectorXcd& v);

 private:
  LatticeGeometry geometry_;
  double lambda_;
  FftPlan plan_;
  Eigen::VectorXd omega_;
  Eigen::VectorXcd work_;
  // Kinetic phase factors keyed by sub-step length; a composition scheme
  // uses only a few distinct lengths.
  std::vector<std::pair<double, Eigen::VectorXcd>> phases_;
};

/// Hartree energy <phi, -Delta phi> + (lambda/2) sum |phi|^4.
double hartree_energy(const ComplexField& phi, double lambda);

ComplexField free_propagate(const ComplexField& f, double t);

HartreeTrajectory evolve_hartree(const ComplexField& phi0, double lambda, double t_final,
                                 const HartreeOptions& opts);
inline HartreeTrajectory evolve_hartree(const ComplexField& phi0, double lambda, double t_final,
                                        double dt) {
  HartreeOptions o;
  o.dt = dt;
  return evolve_hartree(phi0, lambda, t_final, o);
}

/// <t> = sqrt(1 + t^2).
inline double japanese(double t) { return std::sqrt(1.0 + t * t); }

struct TimeWindow {
  double t_min = 0.0;
  double t_max = 0.0;
};

struct DecayFitReport {
  TimeWindow window;
  double exponent = 0.0;  ///< slope of log ||phi_t||_inf against log <t>
  double intercept = 0.0;
  double residual = 0.0;  ///< rms residual of the fit in log space
  std::vector<std::pair<double, double>> samples;
};

/// Windows reaching past the wraparound time of the box are refused unless
/// allow_wraparound is set.
DecayFitReport fit_linf_decay(const HartreeTrajectory& traj, TimeWindow window,
                              bool allow_wraparound = false);

struct StrichartzReport {
  double q = 0.0;
  double r = 0.0;
  double value = 0.0;
  bool admissible = false;
};

bool strichartz_admissible(double q, double r, int d);
StrichartzReport strichartz_norm(const HartreeTrajectory& traj, double q, double r,
                                 bool allow_wraparound = false);

/// Max over samples of the l^2 defect of the Duhamel formula, trapezoidal in time.
double duhamel_residual(const HartreeTrajectory& traj);

struct MassOutsideReport {
  double rho = 0.0;
  double v = 0.0;
  int n = 1;
  double initial_outside_y = 0.0;  ///< ||phi_0||^2 on the complement of Y
  std::vector<std::pair<double, double>> series;
  double fitted_c = 0.0;           ///< smallest C making the bound hold on the window
  std::optional<double> reference_c;
  double bound_ratio = 0.0;        ///< max_t mass / bound(reference C or fitted C)
  double bound_value(double c) const;
};

/// Uses the samples with t <= rho / v.
MassOutsideReport mass_outside(const HartreeTrajectory& traj, const RegionMask& y, double rho,
                               double v, int n = 1, std::optional<double> reference_c = {},
                               bool allow_wraparound = false);

struct DispersiveConstantReport {
  std::vector<std::pair<double, double>> series;  ///< (t, c(t))
  double max_value = 0.0;
  double tail_growth = 0.0;  ///< relative growth of c over the final tail window
  bool stabilizing = false;
};

DispersiveConstantReport dispersive_condition_constant(const HartreeTrajectory& traj,
                                                       double tail_window = 10.0,
                                                       double tolerance = 0.1,
                                                       bool allow_wraparound = false);

/// Directory layout: trajectory.json plus snapshot_NNNNN.bin per stored field.
void save_trajectory(const HartreeTrajectory& traj, const std::filesystem::path& dir);
HartreeTrajectory load_trajectory(const std::filesystem::path& dir);

/// Trapezoidal rule on a possibly nonuniform grid.
double trapezoid(const std::vector<double>& t, const std::vector<double>& y);
std::vector<double> cumulative_trapezoid(const std::vector<double>& t, const std::vector<double>& y);

}  // namespace bec

#endif  // BEC_HARTREE_HPP
