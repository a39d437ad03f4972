#include "bec/hartree.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "bec/errors.hpp"
#include "bec/field_io.hpp"

namespace bec {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Weights of the Strang substeps making up one step of the scheme.
std::vector<double> composition_weights(SplittingScheme s) {
  const double c3 = std::cbrt(2.0);
  const double w1 = 1.0 / (2.0 - c3);
  const double w0 = -c3 / (2.0 - c3);
  switch (s) {
    case SplittingScheme::strang:
      return {1.0};
    case SplittingScheme::yoshida4:
      return {w1, w0, w1};
    case SplittingScheme::yoshida6: {
      const double c5 = std::pow(2.0, 0.2);
      const double z1 = 1.0 / (2.0 - c5);
      const double z0 = -c5 / (2.0 - c5);
      std::vector<double> out;
      for (double z : {z1, z0, z1})
        for (double w : {w1, w0, w1}) out.push_back(z * w);
      return out;
    }
  }
  return {1.0};
}

void check_wrap(const HartreeTrajectory& traj, double t_end, bool allow, const char* what) {
  const double tw = traj.geometry.wrap_time();
  if (!allow && t_end > tw * (1.0 + 1e-12))
    throw DomainError(std::string(what) + ": window end " + std::to_string(t_end) +
                      " exceeds the wraparound time " + std::to_string(tw));
}

}  // namespace

std::string to_string(SplittingScheme s) {
  switch (s) {
    case SplittingScheme::strang:
      return "strang";
    case SplittingScheme::yoshida4:
      return "yoshida4";
    case SplittingScheme::yoshida6:
      return "yoshida6";
  }
  return "?";
}

SplittingScheme scheme_from_string(const std::string& s) {
  if (s == "strang") return SplittingScheme::strang;
  if (s == "yoshida4") return SplittingScheme::yoshida4;
  if (s == "yoshida6") return SplittingScheme::yoshida6;
  throw DomainError("unknown splitting scheme '" + s + "'");
}

int order_of(SplittingScheme s) {
  switch (s) {
    case SplittingScheme::strang:
      return 2;
    case SplittingScheme::yoshida4:
      return 4;
    case SplittingScheme::yoshida6:
      return 6;
  }
  return 0;
}

std::vector<double> HartreeTrajectory::norm_series(double p) const {
  if (p == 2.0) return l2;
  if (std::isinf(p)) return linf;
  if (auto it = norms.find(p); it != norms.end()) return it->second;
  if (!has_fields())
    throw InsufficientDataError("l^" + std::to_string(p) +
                                " norm was not recorded and no fields are stored");
  std::vector<double> out;
  out.reserve(snapshots.size());
  for (const auto& f : snapshots) out.push_back(lp_norm(f, p));
  return out;
}

HartreeStepper::HartreeStepper(const LatticeGeometry& g, double lambda)
    : geometry_(g), lambda_(lambda), plan_(g), omega_(dispersion_table(g)) {}

void HartreeStepper::linear(Eigen::VectorXcd& v, double tau) {
  constexpr std::size_t kMaxCachedPhases = 8;
  const Eigen::VectorXcd* phase = nullptr;
  for (const auto& [t, f] : phases_)
    if (t == tau) phase = &f;
  plan_.forward(v);
  if (!phase && phases_.size() < kMaxCachedPhases) {
    Eigen::VectorXcd f(omega_.size());
    for (Eigen::Index i = 0; i < f.size(); ++i) f[i] = std::polar(1.0, -tau * omega_[i]);
    phases_.emplace_back(tau, std::move(f));
    phase = &phases_.back().second;
  }
  if (phase) v.array() *= phase->array();
  else
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] *= std::polar(1.0, -tau * omega_[i]);
  plan_.inverse(v);
}

void HartreeStepper::nonlinear(Eigen::VectorXcd& v, double tau) const {
  if (lambda_ == 0.0 || tau == 0.0) return;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    v[i] *= std::polar(1.0, -lambda_ * std::norm(v[i]) * tau);
}

void HartreeStepper::step(Eigen::VectorXcd& v, double dt, SplittingScheme scheme) {
  const auto w = composition_weights(scheme);
  // Adjacent nonlinear half steps commute and are merged.
  double pending = 0.5 * w.front() * dt;
  for (std::size_t i = 0; i < w.size(); ++i) {
    nonlinear(v, pending);
    linear(v, w[i] * dt);
    pending = 0.5 * (w[i] + (i + 1 < w.size() ? w[i + 1] : 0.0)) * dt;
  }
  nonlinear(v, pending);
}

double HartreeStepper::kinetic(const Eigen::VectorXcd& v) {
  work_ = v;
  plan_.forward(work_);
  double k = 0.0;
  for (Eigen::Index i = 0; i < work_.size(); ++i) k += omega_[i] * std::norm(work_[i]);
  return k;
}

double HartreeStepper::energy(const Eigen::VectorXcd& v) {
  double quartic = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) quartic += std::norm(v[i]) * std::norm(v[i]);
  return kinetic(v) + 0.5 * lambda_ * quartic;
}

double hartree_energy(const ComplexField& phi, double lambda) {
  const auto& g = phi.geometry();
  if (g.boundary() == Boundary::periodic) {
    HartreeStepper st(g, lambda);
    return st.energy(phi.values());
  }
  const double kin = inner(phi, apply_laplacian(phi)).real();
  double quartic = 0.0;
  for (std::size_t x = 0; x < phi.size(); ++x) quartic += std::pow(std::norm(phi[x]), 2);
  return kin + 0.5 * lambda * quartic;
}

ComplexField free_propagate(const ComplexField& f, double t) {
  HartreeStepper st(f.geometry(), 0.0);
  ComplexField out = f;
  if (t != 0.0) st.linear(out.values(), t);
  return out;
}

HartreeTrajectory evolve_hartree(const ComplexField& phi0, double lambda, double t_final,
                                 const HartreeOptions& opts) {
  if (!(opts.dt > 0.0)) throw DomainError("time step must be positive");
  if (!(t_final >= 0.0)) throw DomainError("final time must be nonnegative");
  if (!(phi0.norm2() > 0.0)) throw DomainError("initial field must be nonzero");
  if (opts.sample_stride < 1) throw DomainError("sample stride must be >= 1");
  for (double p : opts.record_norms)
    if (!(p >= 1.0)) throw DomainError("recorded norms need p >= 1");

  const auto& g = phi0.geometry();
  HartreeStepper stepper(g, lambda);

  long long nsteps = std::llround(t_final / opts.dt);
  double dt = opts.dt;
  if (std::abs(static_cast<double>(nsteps) * opts.dt - t_final) > 1e-9 * std::max(1.0, t_final)) {
    nsteps = static_cast<long long>(std::ceil(t_final / opts.dt));
    dt = t_final / static_cast<double>(nsteps);
  }

  HartreeTrajectory traj(g, lambda, dt, opts.scheme);
  traj.initial_l1 = lp_norm(phi0, 1.0);
  for (double p : opts.record_norms) traj.norms[p] = {};

  ComplexField cur = phi0;
  auto record = [&](double t) {
    traj.times.push_back(t);
    traj.linf.push_back(lp_norm(cur, kInf));
    traj.l2.push_back(cur.norm2());
    if (opts.record_energy) traj.energy.push_back(stepper.energy(cur.values()));
    for (auto& [p, series] : traj.norms) series.push_back(lp_norm(cur, p));
    if (opts.keep_fields) traj.snapshots.push_back(cur);
  };

  record(0.0);
  for (long long k = 1; k <= nsteps; ++k) {
    stepper.step(cur.values(), dt, opts.scheme);
    if (k % opts.sample_stride == 0 || k == nsteps) record(static_cast<double>(k) * dt);
  }
  return traj;
}

double trapezoid(const std::vector<double>& t, const std::vector<double>& y) {
  if (t.size() != y.size()) throw DimensionError("trapezoid: length mismatch");
  double s = 0.0;
  for (std::size_t i = 1; i < t.size(); ++i) s += 0.5 * (t[i] - t[i - 1]) * (y[i] + y[i - 1]);
  return s;
}

std::vector<double> cumulative_trapezoid(const std::vector<double>& t,
                                         const std::vector<double>& y) {
  if (t.size() != y.size()) throw DimensionError("trapezoid: length mismatch");
  std::vector<double> out(t.size(), 0.0);
  for (std::size_t i = 1; i < t.size(); ++i)
    out[i] = out[i - 1] + 0.5 * (t[i] - t[i - 1]) * (y[i] + y[i - 1]);
  return out;
}

DecayFitReport fit_linf_decay(const HartreeTrajectory& traj, TimeWindow window,
                              bool allow_wraparound) {
  if (!(window.t_min < window.t_max)) throw DomainError("decay window needs t_min < t_max");
  if (window.t_max > traj.t_final() * (1.0 + 1e-12) + 1e-12)
    throw DomainError("decay window extends past the trajectory");
  check_wrap(traj, window.t_max, allow_wraparound, "fit_linf_decay");

  DecayFitReport rep;
  rep.window = window;
  const double eps = 1e-12 * std::max(1.0, window.t_max);
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    const double t = traj.times[i];
    if (t >= window.t_min - eps && t <= window.t_max + eps) rep.samples.emplace_back(t, traj.linf[i]);
  }
  if (rep.samples.size() < 8)
    throw InsufficientDataError("decay fit needs at least 8 samples, window has " +
                                std::to_string(rep.samples.size()));

  const double n = static_cast<double>(rep.samples.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [t, v] : rep.samples) {
    if (!(v > 0.0)) throw DomainError("decay fit needs a nonvanishing sup norm");
    const double x = std::log(japanese(t));
    const double y = std::log(v);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double den = n * sxx - sx * sx;
  if (!(den > 0.0)) throw InsufficientDataError("decay window has no spread in log<t>");
  rep.exponent = (n * sxy - sx * sy) / den;
  rep.intercept = (sy - rep.exponent * sx) / n;
  double ss = 0.0;
  for (const auto& [t, v] : rep.samples) {
    const double r = std::log(v) - (rep.intercept + rep.exponent * std::log(japanese(t)));
    ss += r * r;
  }
  rep.residual = std::sqrt(ss / n);
  return rep;
}

bool strichartz_admissible(double q, double r, int d) {
  if (!(q >= 2.0) || !(r >= 2.0)) return false;
  if (d == 3 && q == 2.0 && std::isinf(r)) return false;
  const double lhs = 1.0 / q + static_cast<double>(d) / (3.0 * r);
  return lhs <= static_cast<double>(d) / 6.0 + 1e-14;
}

StrichartzReport strichartz_norm(const HartreeTrajectory& traj, double q, double r,
                                 bool allow_wraparound) {
  if (!(q >= 1.0) || !(r >= 1.0)) throw DomainError("Strichartz exponents must be >= 1");
  check_wrap(traj, traj.t_final(), allow_wraparound, "strichartz_norm");
  StrichartzReport rep{q, r, 0.0, strichartz_admissible(q, r, traj.geometry.dimension())};
  const auto series = traj.norm_series(r);
  if (series.empty()) return rep;
  if (std::isinf(q)) {
    rep.value = *std::max_element(series.begin(), series.end());
    return rep;
  }
  std::vector<double> powered(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) powered[i] = std::pow(series[i], q);
  rep.value = std::pow(trapezoid(traj.times, powered), 1.0 / q);
  return rep;
}

double duhamel_residual(const HartreeTrajectory& traj) {
  if (!traj.has_fields()) throw InsufficientDataError("Duhamel residual needs stored fields");
  const auto& g = traj.geometry;
  FftPlan plan(g);
  const Eigen::VectorXd omega = dispersion_table(g);
  const Eigen::Index m = omega.size();

  Eigen::VectorXcd a0 = traj.snapshots.front().values();
  plan.forward(a0);

  auto rotated_source = [&](std::size_t k) {
    Eigen::VectorXcd src = traj.snapshots[k].values();
    for (Eigen::Index i = 0; i < m; ++i) src[i] *= std::norm(src[i]);
    plan.forward(src);
    for (Eigen::Index i = 0; i < m; ++i) src[i] *= std::polar(1.0, omega[i] * traj.times[k]);
    return src;
  };

  Eigen::VectorXcd cumulative = Eigen::VectorXcd::Zero(m);
  Eigen::VectorXcd prev = rotated_source(0);
  double worst = 0.0;
  for (std::size_t k = 0; k < traj.snapshots.size(); ++k) {
    if (k > 0) {
      Eigen::VectorXcd cur = rotated_source(k);
      cumulative += 0.5 * (traj.times[k] - traj.times[k - 1]) * (prev + cur);
      prev = std::move(cur);
    }
    Eigen::VectorXcd predicted = a0 - cplx(0.0, traj.lambda) * cumulative;
    for (Eigen::Index i = 0; i < m; ++i) predicted[i] *= std::polar(1.0, -omega[i] * traj.times[k]);
    Eigen::VectorXcd actual = traj.snapshots[k].values();
    plan.forward(actual);
    worst = std::max(worst, (actual - predicted).norm());
  }
  return worst;
}

double MassOutsideReport::bound_value(double c) const {
  return (1.0 + c / rho) * initial_outside_y + c * std::pow(rho, -n);
}

MassOutsideReport mass_outside(const HartreeTrajectory& traj, const RegionMask& y, double rho,
                               double v, int n, std::optional<double> reference_c,
                               bool allow_wraparound) {
  if (!(rho > 0.0)) throw DomainError("rho must be positive");
  if (!(v > 0.0)) throw DomainError("velocity must be positive");
  if (n < 1) throw DomainError("decay power n must be >= 1");
  if (!traj.has_fields()) throw InsufficientDataError("mass_outside needs stored fields");
  if (y.geometry() != traj.geometry) throw DimensionError("region geometry mismatch");

  const double t_end = std::min(rho / v, traj.t_final());
  check_wrap(traj, t_end, allow_wraparound, "mass_outside");

  MassOutsideReport rep;
  rep.rho = rho;
  rep.v = v;
  rep.n = n;
  rep.reference_c = reference_c;
  const RegionMask y_c = y.complement();
  const RegionMask far = enlarge(y, rho).complement();
  rep.initial_outside_y = std::pow(lp_norm(traj.snapshots.front(), 2.0, &y_c), 2);

  const double eps = 1e-12 * std::max(1.0, t_end);
  for (std::size_t k = 0; k < traj.snapshots.size(); ++k) {
    if (traj.times[k] > t_end + eps) break;
    rep.series.emplace_back(traj.times[k], std::pow(lp_norm(traj.snapshots[k], 2.0, &far), 2));
  }

  const double denom = rep.initial_outside_y / rho + std::pow(rho, -n);
  for (const auto& [t, mass] : rep.series)
    rep.fitted_c = std::max(rep.fitted_c, (mass - rep.initial_outside_y) / denom);

  const double bound = rep.bound_value(reference_c.value_or(rep.fitted_c));
  for (const auto& [t, mass] : rep.series) {
    double ratio = 0.0;
    if (bound > 0.0) ratio = mass / bound;
    else if (mass > 0.0) ratio = kInf;
    rep.bound_ratio = std::max(rep.bound_ratio, ratio);
  }
  return rep;
}

DispersiveConstantReport dispersive_condition_constant(const HartreeTrajectory& traj,
                                                       double tail_window, double tolerance,
                                                       bool allow_wraparound) {
  check_wrap(traj, traj.t_final(), allow_wraparound, "dispersive_condition_constant");
  DispersiveConstantReport rep;
  if (traj.times.empty()) return rep;
  const auto integral = cumulative_trapezoid(traj.times, traj.linf);
  const double l1 = traj.initial_l1;
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    const double c = l1 > 0.0 ? integral[i] / l1 : 0.0;
    rep.series.emplace_back(traj.times[i], c);
    rep.max_value = std::max(rep.max_value, c);
  }

  // c(t) at the start of the tail window, by linear interpolation.
  const double t_end = traj.times.back();
  const double t_start = std::max(traj.times.front(), t_end - tail_window);
  double c_start = rep.series.front().second;
  for (std::size_t i = 1; i < rep.series.size(); ++i) {
    const auto [t1, c1] = rep.series[i];
    if (t1 >= t_start) {
      const auto [t0, c0] = rep.series[i - 1];
      const double w = t1 > t0 ? (t_start - t0) / (t1 - t0) : 1.0;
      c_start = c0 + w * (c1 - c0);
      break;
    }
  }
  const double c_end = rep.series.back().second;
  if (c_start > 0.0) rep.tail_growth = c_end / c_start - 1.0;
  else rep.tail_growth = c_end > 0.0 ? kInf : 0.0;
  rep.stabilizing = rep.tail_growth <= tolerance;
  return rep;
}

void save_trajectory(const HartreeTrajectory& traj, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json j;
  j["geometry"] = geometry_to_json(traj.geometry);
  j["lambda"] = traj.lambda;
  j["dt"] = traj.dt;
  j["scheme"] = to_string(traj.scheme);
  j["initial_l1"] = traj.initial_l1;
  j["times"] = traj.times;
  j["linf"] = traj.linf;
  j["l2"] = traj.l2;
  j["energy"] = traj.energy;
  nlohmann::json norms = nlohmann::json::array();
  for (const auto& [p, series] : traj.norms) norms.push_back({{"p", p}, {"values", series}});
  j["norms"] = norms;
  nlohmann::json files = nlohmann::json::array();
  for (std::size_t k = 0; k < traj.snapshots.size(); ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "snapshot_%05zu.bin", k);
    write_field(dir / name, traj.snapshots[k]);
    files.push_back(name);
  }
  j["snapshots"] = files;
  std::ofstream out(dir / "trajectory.json");
  if (!out) throw Error("cannot write " + (dir / "trajectory.json").string());
  out << j.dump(2) << '\n';
}

HartreeTrajectory load_trajectory(const std::filesystem::path& dir) {
  std::ifstream in(dir / "trajectory.json");
  if (!in) throw Error("cannot read " + (dir / "trajectory.json").string());
  const auto j = nlohmann::json::parse(in);
  HartreeTrajectory traj(geometry_from_json(j.at("geometry")), j.at("lambda").get<double>(),
                         j.at("dt").get<double>(), scheme_from_string(j.at("scheme")));
  traj.initial_l1 = j.at("initial_l1").get<double>();
  traj.times = j.at("times").get<std::vector<double>>();
  traj.linf = j.at("linf").get<std::vector<double>>();
  traj.l2 = j.at("l2").get<std::vector<double>>();
  traj.energy = j.at("energy").get<std::vector<double>>();
  for (const auto& e : j.at("norms"))
    traj.norms[e.at("p").get<double>()] = e.at("values").get<std::vector<double>>();
  for (const auto& name : j.at("snapshots")) {
    auto f = read_field(dir / name.get<std::string>());
    if (f.geometry() != traj.geometry) throw DimensionError("snapshot geometry mismatch");
    traj.snapshots.push_back(std::move(f));
  }
  return traj;
}

}  // namespace bec
