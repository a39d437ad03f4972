#include "bec/astlo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "bec/errors.hpp"

namespace bec {

namespace {

constexpr int kPanels = 512;

RegionMask ball_or_all(const LatticeGeometry& g, double r) { return ball_mask(g, std::max(0.0, r)); }

}  // namespace

CutoffFunction::CutoffFunction(double epsilon, double lo, double hi) : epsilon_(epsilon), lo_(lo), hi_(hi) {
  if (!(epsilon > 0.0)) throw DomainError("cutoff scale epsilon must be positive");
  if (!(lo < hi)) throw DomainError("cutoff transition interval is empty");
  nodes_.resize(kPanels + 1);
  cumulative_.assign(kPanels + 1, 0.0);
  for (int i = 0; i <= kPanels; ++i) nodes_[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / kPanels;
  for (int i = 0; i < kPanels; ++i)
    cumulative_[static_cast<std::size_t>(i + 1)] =
        cumulative_[static_cast<std::size_t>(i)] + partial(nodes_[static_cast<std::size_t>(i)], nodes_[static_cast<std::size_t>(i + 1)]);
  norm_ = cumulative_.back();
  for (double& c : cumulative_) c /= norm_;
  cumulative_.back() = 1.0;
}

double CutoffFunction::bump2(double s) const {
  const double c = 0.5 * (lo_ + hi_);
  const double w = 0.5 * (hi_ - lo_);
  const double u = (s - c) / w;
  if (std::abs(u) >= 1.0) return 0.0;
  return std::exp(-2.0 / (1.0 - u * u));
}

double CutoffFunction::partial(double a, double b) const {
  if (b <= a) return 0.0;
  using boost::math::quadrature::gauss_kronrod;
  return gauss_kronrod<double, 31>::integrate([this](double s) { return bump2(s); }, a, b, 0);
}

double CutoffFunction::value(double mu) const {
  const double x = mu - shift_;
  if (x <= lo_) return 0.0;
  if (x >= hi_) return 1.0;
  const double pos = (x - lo_) / (hi_ - lo_) * kPanels;
  const auto i = std::min<std::size_t>(static_cast<std::size_t>(pos), kPanels - 1);
  return std::min(1.0, cumulative_[i] + partial(nodes_[i], x) / norm_);
}

double CutoffFunction::derivative(double mu) const { return bump2(mu - shift_) / norm_; }

CutoffFunction CutoffFunction::shifted(double delta) const {
  CutoffFunction out = *this;
  out.shift_ += delta;
  return out;
}

CutoffFunction make_cutoff(double epsilon) {
  if (!(epsilon > 0.0)) throw DomainError("cutoff scale epsilon must be positive");
  return CutoffFunction(epsilon, 0.5 * epsilon, epsilon);
}

ClassReport check_cutoff_class(const CutoffFunction& f, int grid_points, double tol) {
  const double eps = f.epsilon();
  ClassReport r;
  r.grid_points = grid_points;
  r.min_value = std::numeric_limits<double>::infinity();
  r.max_value = -r.min_value;
  r.min_derivative = r.min_value;
  double prev = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < grid_points; ++i) {
    const double mu = -eps + 3.0 * eps * i / (grid_points - 1);
    const double v = f.value(mu);
    const double d = f.derivative(mu);
    r.min_value = std::min(r.min_value, v);
    r.max_value = std::max(r.max_value, v);
    r.min_derivative = std::min(r.min_derivative, d);
    if (mu <= 0.5 * eps) r.max_below = std::max(r.max_below, std::abs(v));
    if (mu >= eps) r.max_above_defect = std::max(r.max_above_defect, std::abs(v - 1.0));
    if (mu <= 0.5 * eps || mu >= eps) r.max_derivative_outside = std::max(r.max_derivative_outside, std::abs(d));
    if (i > 0) r.max_decrease = std::max(r.max_decrease, prev - v);
    prev = v;
  }
  r.pass = r.max_below <= tol && r.max_above_defect <= tol && r.min_value >= -tol && r.max_value <= 1.0 + tol &&
           r.min_derivative >= -tol && r.max_derivative_outside <= tol && r.max_decrease <= tol;
  return r;
}

double closure_constant(const CutoffFunction& f1, const CutoffFunction& f2, const CutoffFunction& f3,
                        int grid_points) {
  const double lo = std::min({f1.support_lo(), f2.support_lo(), f3.support_lo()});
  const double hi = std::max({f1.support_hi(), f2.support_hi(), f3.support_hi()});
  double c = 0.0;
  for (int i = 0; i < grid_points; ++i) {
    const double mu = lo + (hi - lo) * i / (grid_points - 1);
    const double num = f1.derivative(mu) + f2.derivative(mu);
    if (num <= 0.0) continue;
    const double den = f3.derivative(mu);
    if (den <= 0.0) return std::numeric_limits<double>::infinity();
    c = std::max(c, num / den);
  }
  return c;
}

AstloConfig AstloConfig::make(int dimension, double big_r, double small_r, double v, int n) {
  AstloConfig c;
  c.big_r = big_r;
  c.small_r = small_r;
  c.v = v;
  c.n = n;
  c.kappa = ::bec::kappa(dimension);
  c.s = (big_r - small_r) / v;
  c.validate();
  return c;
}

void AstloConfig::validate() const {
  if (!(v > kappa)) throw DomainError("localization speed v must exceed kappa");
  if (!(small_r > 0.0)) throw DomainError("inner radius r must be positive");
  if (big_r < small_r + v - 1e-12) throw DomainError("need R >= r + v");
  if (!(s > 0.0)) throw DomainError("time scale s must be positive");
  if (n < 1) throw DomainError("decay order n must be at least 1");
}

double eval_fts(const CutoffFunction& f, const LatticeGeometry& g, std::size_t x, double t, const AstloConfig& cfg) {
  return f.value((cfg.big_r - cfg.v_prime() * t - g.norm(x)) / cfg.s);
}

std::vector<double> eval_fts_all(const CutoffFunction& f, const LatticeGeometry& g, double t, const AstloConfig& cfg) {
  std::vector<double> out(g.site_count());
  for (std::size_t x = 0; x < g.site_count(); ++x) out[x] = eval_fts(f, g, x, t, cfg);
  return out;
}

double astlo_expectation(const Eigen::VectorXd& densities, const CutoffFunction& f, const LatticeGeometry& g,
                         double t, const AstloConfig& cfg) {
  if (static_cast<std::size_t>(densities.size()) != g.site_count())
    throw DimensionError("densities do not match the lattice");
  double s = 0.0;
  for (std::size_t x = 0; x < g.site_count(); ++x) {
    const double d = densities[static_cast<Eigen::Index>(x)];
    if (d != 0.0) s += eval_fts(f, g, x, t, cfg) * d;
  }
  return s;
}

double astlo_expectation(const ExcitationVector& xi, const CutoffFunction& f, double t, const AstloConfig& cfg) {
  return astlo_expectation(excitation_densities(xi), f, xi.frame->geometry(), t, cfg);
}

double astlo_expectation(const ManyBodyState& psi, const ComplexField& phi, const CutoffFunction& f, double t,
                         const AstloConfig& cfg) {
  return astlo_expectation(excitation_decompose(psi, phi), f, t, cfg);
}

GeometricReport geometric_checks(const CutoffFunction& f, const LatticeGeometry& g, const AstloConfig& cfg,
                                 int time_samples, double tol) {
  cfg.validate();
  if (time_samples < 2) throw DomainError("need at least two time samples");
  GeometricReport r;
  for (std::size_t x = 0; x < g.site_count(); ++x) {
    const double nx = g.norm(x);
    const bool in_big = nx <= cfg.big_r + 1e-12;
    const bool in_small = nx <= cfg.small_r + 1e-12;
    if (eval_fts(f, g, x, 0.0, cfg) > (in_big ? 1.0 : 0.0) + tol) ++r.lower_violations;
    for (int k = 0; k < time_samples; ++k) {
      const double t = k + 1 == time_samples ? cfg.s : cfg.s * k / (time_samples - 1);
      const double v = eval_fts(f, g, x, t, cfg);
      ++r.checked;
      if (in_small && v < 1.0 - tol) ++r.upper_violations;
      if (!in_big && std::abs(v) > tol) ++r.support_violations;
    }
  }
  r.pass = r.lower_violations == 0 && r.upper_violations == 0 && r.support_violations == 0;
  return r;
}

Diagnostics compute_diagnostics(const HartreeTrajectory& traj, const FluctuationSeries& moments,
                                const AstloConfig& cfg, int particles) {
  if (!traj.has_fields()) throw InsufficientDataError("diagnostics need stored condensate fields");
  const std::size_t n = traj.sample_count();
  if (moments.times.size() != n || moments.local_outer.size() != n || moments.second_moment.size() != n)
    throw DomainError("fluctuation moments missing for some trajectory samples");
  for (std::size_t i = 0; i < n; ++i)
    if (std::abs(moments.times[i] - traj.times[i]) > 1e-9)
      throw DomainError("fluctuation moments are sampled at different times");
  if (particles < 1) throw DomainError("particle number must be positive");

  const RegionMask ball = ball_or_all(traj.geometry, cfg.big_r);
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> m_integrand(n), e_integrand(n);
  for (std::size_t i = 0; i < n; ++i) {
    const ComplexField& phi = traj.field_at(i);
    const double sup = lp_norm(phi, inf, &ball);
    const double l4 = lp_norm(phi, 4.0, &ball);
    m_integrand[i] = sup + 5.0 * sup * sup;
    e_integrand[i] = l4 * l4 * l4 * l4 + sup;
  }
  const auto m_int = cumulative_trapezoid(traj.times, m_integrand);
  const auto e_int = cumulative_trapezoid(traj.times, e_integrand);

  Diagnostics d;
  d.times = traj.times;
  const double lam = std::abs(traj.lambda);
  const double geo = std::pow(cfg.v / (cfg.big_r - cfg.small_r), cfg.n + 1);
  double sup_outer = 0.0, sup_second = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sup_outer = std::max(sup_outer, moments.local_outer[i]);
    sup_second = std::max(sup_second, moments.second_moment[i]);
    const double t = traj.times[i] - traj.times.front();
    d.m_r.push_back(lam * m_int[i]);
    d.e_rr.push_back(t * geo * sup_outer + lam / particles * sup_second * e_int[i]);
  }
  return d;
}

LocalBoundReport check_local_bound(const std::vector<double>& local_inner, double initial_outer,
                                   const Diagnostics& diag, const AstloConfig& cfg) {
  cfg.validate();
  const std::size_t n = diag.times.size();
  if (local_inner.size() != n || diag.m_r.size() != n || diag.e_rr.size() != n)
    throw DimensionError("bound series have different lengths");
  LocalBoundReport r;
  r.times = diag.times;
  r.initial_outer = initial_outer;
  const double width = cfg.big_r - cfg.small_r;
  const double t_max = width / cfg.v;
  const double t0 = n ? diag.times.front() : 0.0;
  double c = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double lhs = std::exp(-diag.m_r[i]) * local_inner[i];
    r.lhs.push_back(lhs);
    const bool regime = diag.times[i] - t0 <= t_max + 1e-12;
    r.in_regime.push_back(regime);
    if (!regime) continue;
    const double excess = lhs - initial_outer;
    if (excess <= 0.0) continue;
    const double den = initial_outer / width + diag.e_rr[i];
    c = den > 0.0 ? std::max(c, excess / den) : std::numeric_limits<double>::infinity();
  }
  r.fitted_c = c;
  for (std::size_t i = 0; i < n; ++i)
    r.rhs.push_back((1.0 + c / width) * initial_outer + c * diag.e_rr[i]);
  return r;
}

}  // namespace bec
