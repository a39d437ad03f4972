#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"

#include "bec/astlo.hpp"
#include "bec/errors.hpp"

using namespace bec;

namespace {

ComplexField gaussian_bump(const LatticeGeometry& g, double width, double k0) {
  ComplexField f(g);
  for (std::size_t x = 0; x < g.site_count(); ++x) {
    const double c = g.coords(x)[0];
    f[x] = std::exp(-c * c / (2.0 * width * width)) * std::polar(1.0, k0 * c);
  }
  f.values().normalize();
  return f;
}

ComplexField random_field(const LatticeGeometry& g, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  ComplexField f(g);
  for (std::size_t x = 0; x < g.site_count(); ++x) f[x] = cplx(gauss(rng), gauss(rng));
  f.values().normalize();
  return f;
}

}  // namespace

TEST_CASE("standard cutoff belongs to the class") {
  for (double eps : {0.05, 0.5, 1.0, 3.0}) {
    const CutoffFunction f = make_cutoff(eps);
    CHECK(f.value(0.5 * eps) == 0.0);
    CHECK(f.value(eps) == 1.0);
    CHECK(f.value(-10.0) == 0.0);
    CHECK(f.value(10.0) == 1.0);
    const ClassReport r = check_cutoff_class(f);
    CHECK(r.pass);
    CHECK(r.max_decrease <= 1e-12);

    // f' integrates to one (composite Simpson over the transition).
    const int n = 4000;
    const double a = 0.5 * eps, b = eps, h = (b - a) / n;
    double integral = f.derivative(a) + f.derivative(b);
    for (int i = 1; i < n; ++i) integral += (i % 2 ? 4.0 : 2.0) * f.derivative(a + i * h);
    integral *= h / 3.0;
    CHECK(integral == doctest::Approx(1.0).epsilon(1e-10));

    // Derivative agrees with a centered difference of the values.
    for (double u : {0.6, 0.7, 0.75, 0.9}) {
      const double mu = u * eps, d = 1e-5 * eps;
      const double fd = (f.value(mu + d) - f.value(mu - d)) / (2.0 * d);
      CHECK(fd == doctest::Approx(f.derivative(mu)).epsilon(1e-6));
    }
  }
  // Symmetric bump: the switch passes 1/2 at the midpoint.
  CHECK(make_cutoff(1.0).value(0.75) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK_THROWS_AS(make_cutoff(0.0), DomainError);
  CHECK_THROWS_AS(make_cutoff(-1.0), DomainError);
}

TEST_CASE("shifted cutoff leaves the class") {
  const CutoffFunction f = make_cutoff(1.0).shifted(1.0);
  const ClassReport r = check_cutoff_class(f);
  CHECK_FALSE(r.pass);
  CHECK(r.max_above_defect > 0.5);
}

TEST_CASE("closure constant of two cutoffs") {
  const double eps = 1.0;
  const CutoffFunction f3 = make_cutoff(eps);
  CHECK(closure_constant(f3, f3, f3) == doctest::Approx(2.0).epsilon(1e-12));

  const CutoffFunction f1(eps, 0.55 * eps, 0.8 * eps);
  const CutoffFunction f2(eps, 0.7 * eps, 0.95 * eps);
  CHECK(check_cutoff_class(f1).pass);
  CHECK(check_cutoff_class(f2).pass);
  const double c = closure_constant(f1, f2, f3);
  CHECK(std::isfinite(c));
  CHECK(c > 1.0);
  // Pointwise oracle at a few interior points.
  for (double mu : {0.6, 0.675, 0.75, 0.82, 0.9})
    CHECK(f1.derivative(mu) + f2.derivative(mu) <= c * f3.derivative(mu) * (1.0 + 1e-9));

  // Wider than f3's transition: no finite constant exists.
  const CutoffFunction wide(eps, 0.3 * eps, 0.9 * eps);
  CHECK(std::isinf(closure_constant(wide, f1, f3)));
}

TEST_CASE("localization parameters") {
  const AstloConfig c = AstloConfig::make(1, 20.0, 5.0, 4.0);
  CHECK(c.kappa == 2.0);
  CHECK(c.v_prime() == doctest::Approx(3.0));
  CHECK(c.delta() == doctest::Approx(1.0));
  CHECK(c.epsilon() == doctest::Approx(1.0));
  CHECK(c.s == doctest::Approx(15.0 / 4.0));
  CHECK_THROWS_AS(AstloConfig::make(1, 20.0, 5.0, 2.0), DomainError);
  CHECK_THROWS_AS(AstloConfig::make(2, 20.0, 5.0, 4.0), DomainError);
  CHECK_THROWS_AS(AstloConfig::make(1, 8.0, 5.0, 4.0), DomainError);
  CHECK_NOTHROW(AstloConfig::make(2, 20.0, 5.0, 5.0));
}

TEST_CASE("geometric containment of the spacetime cutoff") {
  SUBCASE("d=1") {
    const auto g = LatticeGeometry::chain(64);
    const AstloConfig cfg = AstloConfig::make(1, 20.0, 5.0, 4.0);
    const CutoffFunction f = make_cutoff(cfg.epsilon());
    const GeometricReport r = geometric_checks(f, g, cfg);
    CHECK(r.pass);
    CHECK(r.checked == 64 * 51);

    // Direct oracle: vanishes outside B_R, equals one on B_r at t = s.
    for (std::size_t x = 0; x < g.site_count(); ++x) {
      const double nx = std::abs(g.coords(x)[0]);
      if (nx > 20.0) CHECK(eval_fts(f, g, x, 0.0, cfg) == 0.0);
      if (nx <= 5.0) CHECK(eval_fts(f, g, x, cfg.s, cfg) == 1.0);
    }

    const GeometricReport bad = geometric_checks(f.shifted(cfg.epsilon()), g, cfg);
    CHECK_FALSE(bad.pass);
    CHECK(bad.upper_violations > 0);
  }
  SUBCASE("d=2") {
    const auto g = LatticeGeometry::cube(2, 32);
    const AstloConfig cfg = AstloConfig::make(2, 12.0, 3.0, 6.0);
    const CutoffFunction f = make_cutoff(cfg.epsilon());
    CHECK(geometric_checks(f, g, cfg, 21).pass);
  }
  SUBCASE("many random admissible configurations") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto g = LatticeGeometry::chain(80);
    int failures = 0;
    for (int k = 0; k < 40; ++k) {
      const double v = 2.0 + 0.1 + 4.0 * u(rng);
      const double r = 1.0 + 8.0 * u(rng);
      const double big_r = r + v + 20.0 * u(rng);
      const AstloConfig cfg = AstloConfig::make(1, big_r, r, v);
      if (!geometric_checks(make_cutoff(cfg.epsilon()), g, cfg, 11).pass) ++failures;
    }
    CHECK(failures == 0);
  }
}

TEST_CASE("localized excitation number against the reduced density") {
  const auto g = LatticeGeometry::chain(9);
  const AstloConfig cfg = AstloConfig::make(1, 3.5, 1.0, 2.5);
  const CutoffFunction f = make_cutoff(cfg.epsilon());
  const ComplexField phi = random_field(g, 4);
  const ManyBodyState psi = random_state(build_basis(3, 9), 8);

  // Oracle: <n_x> on excitations is (q gamma q)_xx with q = 1 - |phi><phi|.
  const Eigen::MatrixXcd gamma = reduced_density(psi);
  const Eigen::MatrixXcd q =
      Eigen::MatrixXcd::Identity(9, 9) - phi.values() * phi.values().adjoint();
  const Eigen::MatrixXcd qgq = q * gamma * q;
  for (double t : {0.0, 0.4, cfg.s}) {
    double expected = 0.0;
    for (std::size_t x = 0; x < 9; ++x)
      expected += eval_fts(f, g, x, t, cfg) * qgq(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(x)).real();
    CHECK(astlo_expectation(psi, phi, f, t, cfg) == doctest::Approx(expected).epsilon(1e-10));
  }

  // Pure condensate carries no excitations anywhere.
  const ManyBodyState prod = product_state(phi, 3);
  CHECK(std::abs(astlo_expectation(prod, phi, f, 0.0, cfg)) < 1e-12);
  CHECK_THROWS_AS(astlo_expectation(Eigen::VectorXd::Zero(4), f, g, 0.0, cfg), DimensionError);
}

TEST_CASE("diagnostic integrals") {
  const auto g = LatticeGeometry::chain(48);
  const ComplexField phi0 = gaussian_bump(g, 2.0, 0.4);
  const double lambda = -0.8;
  const AstloConfig cfg = AstloConfig::make(1, 16.0, 4.0, 4.0);

  HartreeOptions coarse;
  coarse.dt = 0.02;
  coarse.sample_stride = 5;
  HartreeOptions fine = coarse;
  fine.dt = 0.0025;
  fine.sample_stride = 40;
  const HartreeTrajectory traj = evolve_hartree(phi0, lambda, 3.0, coarse);
  const HartreeTrajectory ref = evolve_hartree(phi0, lambda, 3.0, fine);

  FluctuationSeries mom;
  mom.times = traj.times;
  for (std::size_t i = 0; i < traj.sample_count(); ++i) {
    mom.local_outer.push_back(0.1 + 0.01 * static_cast<double>(i));
    mom.second_moment.push_back(2.0);
  }
  const Diagnostics d = compute_diagnostics(traj, mom, cfg, 10);
  REQUIRE(d.m_r.size() == traj.sample_count());
  CHECK(d.m_r.front() == 0.0);
  CHECK(d.e_rr.front() == 0.0);

  // Independent quadrature: composite Simpson on the finely stepped run.
  const RegionMask ball = ball_mask(g, 16.0);
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> m_int, e_int;
  for (std::size_t i = 0; i < ref.sample_count(); ++i) {
    const double sup = lp_norm(ref.field_at(i), inf, &ball);
    const double l4 = lp_norm(ref.field_at(i), 4.0, &ball);
    m_int.push_back(sup + 5.0 * sup * sup);
    e_int.push_back(std::pow(l4, 4) + sup);
  }
  auto simpson = [](const std::vector<double>& y, double h) {
    double s = y.front() + y.back();
    for (std::size_t i = 1; i + 1 < y.size(); ++i) s += (i % 2 ? 4.0 : 2.0) * y[i];
    return s * h / 3.0;
  };
  const double h = ref.times[1] - ref.times[0];
  REQUIRE(ref.sample_count() % 2 == 1);
  const double m_ref = std::abs(lambda) * simpson(m_int, h);
  CHECK(d.m_r.back() == doctest::Approx(m_ref).epsilon(1e-3));

  const double t = traj.times.back();
  const double sup_outer = mom.local_outer.back();
  const double e_ref = t * std::pow(4.0 / 12.0, 2) * sup_outer + std::abs(lambda) / 10.0 * 2.0 * simpson(e_int, h);
  CHECK(d.e_rr.back() == doctest::Approx(e_ref).epsilon(1e-3));

  // Monotone in t.
  for (std::size_t i = 1; i < d.m_r.size(); ++i) {
    CHECK(d.m_r[i] >= d.m_r[i - 1]);
    CHECK(d.e_rr[i] >= d.e_rr[i - 1]);
  }

  FluctuationSeries missing = mom;
  missing.second_moment.pop_back();
  CHECK_THROWS_AS(compute_diagnostics(traj, missing, cfg, 10), DomainError);
  HartreeOptions scalar = coarse;
  scalar.keep_fields = false;
  CHECK_THROWS_AS(compute_diagnostics(evolve_hartree(phi0, lambda, 1.0, scalar), mom, cfg, 10),
                  InsufficientDataError);
}

TEST_CASE("local bound fit") {
  const AstloConfig cfg = AstloConfig::make(1, 12.0, 4.0, 4.0);  // regime t <= 2
  Diagnostics d;
  d.times = {0.0, 1.0, 2.0, 3.0};
  d.m_r = {0.0, 0.1, 0.2, 0.3};
  d.e_rr = {0.0, 0.5, 1.0, 1.5};

  SUBCASE("no growth needs no constant") {
    const LocalBoundReport r = check_local_bound({0.5, 0.5, 0.4, 9.0}, 0.5, d, cfg);
    CHECK(r.fitted_c == 0.0);
    CHECK(r.in_regime == std::vector<bool>{true, true, true, false});
  }
  SUBCASE("constant from the tightest sample") {
    const double a0 = 0.5;
    const std::vector<double> inner = {0.5, 1.0, 1.6, 100.0};
    const LocalBoundReport r = check_local_bound(inner, a0, d, cfg);
    double expected = 0.0;
    for (int i = 1; i < 3; ++i)
      expected = std::max(expected, (std::exp(-d.m_r[i]) * inner[i] - a0) / (a0 / 8.0 + d.e_rr[i]));
    CHECK(r.fitted_c == doctest::Approx(expected).epsilon(1e-14));
    for (std::size_t i = 0; i < 3; ++i) CHECK(r.lhs[i] <= r.rhs[i] + 1e-12);
    CHECK(r.lhs[3] > r.rhs[3]);
  }
  SUBCASE("length mismatch") {
    CHECK_THROWS_AS(check_local_bound({1.0}, 0.5, d, cfg), DimensionError);
  }
}

TEST_CASE("localized excitation count is monotone and sandwiched") {
  const auto g = LatticeGeometry::chain(11);
  const AstloConfig cfg = AstloConfig::make(1, 4.0, 1.0, 3.0);
  const CutoffFunction f = make_cutoff(cfg.epsilon());

  // One excitation at the origin on top of a delta condensate far away.
  const BasisPtr basis = build_basis(3, 11);
  const std::size_t far = *g.index({5});
  std::vector<FockBasis::Occupation> occ(11, 0);
  occ[far] = 2;
  occ[g.origin()] = 1;
  Eigen::VectorXcd c = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(basis->dimension()));
  c[static_cast<Eigen::Index>(basis->index(occ))] = 1.0;
  const ManyBodyState one(basis, c);
  const ComplexField phi = ComplexField::delta(g, far);
  CHECK(eval_fts(f, g, g.origin(), 0.0, cfg) == 1.0);
  CHECK(astlo_expectation(one, phi, f, 0.0, cfg) == doctest::Approx(1.0).epsilon(1e-12));

  const ComplexField phi_r = random_field(g, 21);
  const ExcitationVector xi = excitation_decompose(random_state(basis, 5), phi_r);
  const Eigen::VectorXd n = excitation_densities(xi);
  const RegionMask inner = ball_mask(g, cfg.small_r), outer = ball_mask(g, cfg.big_r);
  double n_inner = 0.0, n_outer = 0.0;
  for (std::size_t x = 0; x < 11; ++x) {
    if (inner.contains(x)) n_inner += n[static_cast<Eigen::Index>(x)];
    if (outer.contains(x)) n_outer += n[static_cast<Eigen::Index>(x)];
  }
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= 20; ++k) {
    const double t = cfg.s * k / 20.0;
    const double value = astlo_expectation(xi, f, t, cfg);
    CHECK(value <= prev + 1e-14);
    CHECK(value >= n_inner - 1e-12);
    CHECK(value <= n_outer + 1e-12);
    prev = value;
    for (std::size_t x = 0; x < 11; ++x)
      CHECK(eval_fts(f, g, x, t + 0.1, cfg) <= eval_fts(f, g, x, t, cfg));
  }
}
