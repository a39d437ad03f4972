#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "dense_fock.hpp"
#include "doctest.h"

#include "bec/errors.hpp"
#include "bec/fluctuation.hpp"

using namespace bec;

namespace {

ComplexField random_field(const LatticeGeometry& g, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  ComplexField f(g);
  for (std::size_t x = 0; x < g.site_count(); ++x) f[x] = cplx(gauss(rng), gauss(rng));
  f.values().normalize();
  return f;
}

Eigen::MatrixXcd random_hermitian(int m, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  Eigen::MatrixXcd a(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) a(i, j) = cplx(gauss(rng), gauss(rng));
  return 0.5 * (a + a.adjoint());
}

double dense_norm(const Eigen::MatrixXcd& a) {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(a);
  return svd.singularValues()[0];
}

Eigen::MatrixXcd dense(const SparseMatrixC& m) { return Eigen::MatrixXcd(m); }

// Weight of psi on the eigenspace a*(phi)a(phi) = N - j, from a dense
// eigendecomposition of the N-body operator.
std::vector<double> condensate_occupation_weights(const ManyBodyState& psi, const ComplexField& phi) {
  const Eigen::MatrixXcd p = phi.values() * phi.values().adjoint();
  const Eigen::MatrixXcd a0 = dense(second_quantize(*psi.basis, p));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(a0);
  std::vector<double> w(static_cast<std::size_t>(psi.particles() + 1), 0.0);
  const Eigen::VectorXcd c = es.eigenvectors().adjoint() * psi.coefficients;
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    const int occ = static_cast<int>(std::lround(es.eigenvalues()[i]));
    w[static_cast<std::size_t>(psi.particles() - occ)] += std::norm(c[i]);
  }
  return w;
}

}  // namespace

TEST_CASE("condensate frame is a unitary completion of phi") {
  const auto g = LatticeGeometry::chain(6);
  const ComplexField phi = random_field(g, 3);
  const CondensateFrame frame(phi);
  const Eigen::MatrixXcd& v = frame.rotation();
  CHECK((v.adjoint() * v - Eigen::MatrixXcd::Identity(6, 6)).norm() < 1e-12);
  CHECK((v.col(0) - phi.values()).norm() < 1e-14);
  const Eigen::MatrixXcd q = frame.projector();
  CHECK((q * q - q).norm() < 1e-12);
  CHECK((q * phi.values()).norm() < 1e-12);
  CHECK((frame.orthogonal_modes() * frame.orthogonal_modes().adjoint() - q).norm() < 1e-12);
  CHECK(frame.excitation_modes() == 5);

  // A site-localized condensate keeps the remaining sites as modes.
  const CondensateFrame local(ComplexField::delta(g, 2));
  CHECK((local.orthogonal_modes().cwiseAbs() - local.orthogonal_modes().cwiseAbs().cwiseAbs2()).norm() < 1e-14);

  const CondensateFrame zero{ComplexField(g)};
  CHECK(zero.degenerate());
  CHECK(zero.excitation_modes() == 6);
  CHECK_THROWS_AS(CondensateFrame(ComplexField(g, Eigen::VectorXcd::Constant(6, 1.0))), DomainError);
}

TEST_CASE("truncated space has the N-body dimension and ladder structure") {
  const TruncatedFockSpace space(3, 3);
  CHECK(space.dimension() == FockBasis::dimension_of(3, 4));
  CHECK(space.sector_of(0) == 0);
  CHECK(space.sector_of(space.dimension() - 1) == 3);
  // A_k^* A_k summed over modes is the number operator.
  SparseMatrixC n(static_cast<Eigen::Index>(space.dimension()), static_cast<Eigen::Index>(space.dimension()));
  for (int k = 0; k < 3; ++k) n += SparseMatrixC(SparseMatrixC(space.annihilator(k).adjoint()) * space.annihilator(k));
  CHECK((dense(n).diagonal().real() - space.number_diagonal()).norm() < 1e-13);
  // Canonical commutators hold below the truncation.
  const Eigen::MatrixXcd a0 = dense(space.annihilator(0));
  const Eigen::MatrixXcd a1 = dense(space.annihilator(1));
  const Eigen::MatrixXcd comm = a0 * a0.adjoint() - a0.adjoint() * a0;
  const auto low = static_cast<Eigen::Index>(space.offset(3));
  CHECK((comm.topLeftCorner(low, low) - Eigen::MatrixXcd::Identity(low, low)).norm() < 1e-12);
  CHECK((a0 * a1.adjoint() - a1.adjoint() * a0).topLeftCorner(low, low).norm() < 1e-12);
}

TEST_CASE("mode change agrees with a dense second-quantized rotation") {
  // Gamma(W) = exp(-i dGamma(A)) for W = exp(-iA); the new-mode coefficients
  // of chi are the site coefficients of Gamma(V)^* chi.
  const auto g = LatticeGeometry::chain(3);
  const auto basis = build_basis(3, 3);
  const ManyBodyState psi = random_state(basis, 17);
  const Eigen::MatrixXcd a = random_hermitian(3, 5);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(a);
  const Eigen::VectorXcd ph = (cplx(0.0, -1.0) * es.eigenvalues().cast<cplx>()).array().exp().matrix();
  const Eigen::MatrixXcd w = es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();

  const Eigen::MatrixXcd da = dense(second_quantize(*basis, a));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> big(da);
  const Eigen::VectorXcd bph = (cplx(0.0, 1.0) * big.eigenvalues().cast<cplx>()).array().exp().matrix();
  const Eigen::MatrixXcd gamma_w_adj = big.eigenvectors() * bph.asDiagonal() * big.eigenvectors().adjoint();

  const Eigen::VectorXcd expected = gamma_w_adj * psi.coefficients;
  const Eigen::VectorXcd got = change_mode_basis(*basis, psi.coefficients, w);
  CHECK((expected - got).norm() < 1e-12);
}

TEST_CASE("excitation map examples and unitarity") {
  const auto g = LatticeGeometry::chain(4);
  const ComplexField phi = random_field(g, 11);

  SUBCASE("pure condensate has only the vacuum sector") {
    const ExcitationVector xi = excitation_decompose(product_state(phi, 3), phi);
    const auto w = xi.sector_weights();
    CHECK(std::abs(w[0] - 1.0) < 1e-12);
    CHECK(w[1] + w[2] + w[3] < 1e-24);
    CHECK(std::abs(std::abs(xi.coefficients[0]) - 1.0) < 1e-12);
  }

  SUBCASE("one orthogonal excitation lives in sector one") {
    // (a*(phi))^{N-1} a*(e) Omega / sqrt((N-1)!) built in a dense tensor space.
    const int n = 3;
    const CondensateFrame frame(phi);
    const Eigen::VectorXcd e = frame.orthogonal_modes().col(1);
    const testing_oracle::DenseFock fock(4, n);
    testing_oracle::Mat a0 = testing_oracle::Mat::Zero(fock.dim(), fock.dim());
    testing_oracle::Mat ae = a0;
    for (int x = 0; x < 4; ++x) {
      a0 += phi[static_cast<std::size_t>(x)] * fock.adag(x);
      ae += e[x] * fock.adag(x);
    }
    testing_oracle::Vec vac = testing_oracle::Vec::Zero(fock.dim());
    vac[0] = 1.0;
    const testing_oracle::Vec v = a0 * a0 * ae * vac / std::sqrt(2.0);
    const auto basis = build_basis(n, 4);
    const ManyBodyState psi(basis, fock.embedding(*basis).adjoint() * v);
    CHECK(std::abs(psi.norm() - 1.0) < 1e-12);
    const auto w = excitation_decompose(psi, phi).sector_weights();
    CHECK(std::abs(w[1] - 1.0) < 1e-12);
    CHECK(w[0] + w[2] + w[3] < 1e-24);
  }

  SUBCASE("sector weights match condensate occupation eigenspaces") {
    const ManyBodyState psi = random_state(build_basis(3, 4), 21);
    const auto w = excitation_decompose(psi, phi).sector_weights();
    const auto ref = condensate_occupation_weights(psi, phi);
    for (std::size_t j = 0; j < w.size(); ++j) CHECK(std::abs(w[j] - ref[j]) < 1e-12);
  }

  SUBCASE("round trip") {
    const auto g3 = LatticeGeometry::chain(3);
    const ComplexField phi3 = random_field(g3, 2);
    const ManyBodyState psi = random_state(build_basis(2, 3), 9);
    const ExcitationVector xi = excitation_decompose(psi, phi3);
    CHECK(std::abs(xi.norm() - 1.0) < 1e-10);
    const ManyBodyState back = excitation_reconstruct(xi);
    CHECK((back.coefficients - psi.coefficients).norm() < 1e-10);
  }

  SUBCASE("the map is unitary on a spanning set") {
    const auto basis = build_basis(2, 4);
    const auto dim = static_cast<Eigen::Index>(basis->dimension());
    auto frame = std::make_shared<const CondensateFrame>(phi);
    Eigen::MatrixXcd u(dim, dim);
    for (Eigen::Index i = 0; i < dim; ++i)
      u.col(i) = excitation_decompose(ManyBodyState(basis, Eigen::VectorXcd::Unit(dim, i)), frame).coefficients;
    CHECK((u.adjoint() * u - Eigen::MatrixXcd::Identity(dim, dim)).norm() < 1e-12);
  }
}

TEST_CASE("local fluctuation number by both routes") {
  const auto g = LatticeGeometry::chain(4);
  const ComplexField phi = random_field(g, 4);
  RegionMask half(g);
  half.set(0);
  half.set(1);

  const auto fn0 = fluctuation_number(product_state(phi, 3), phi, half, 2);
  CHECK(std::abs(fn0.direct) < 1e-12);
  CHECK(std::abs(fn0.excitation) < 1e-12);

  // One orthogonal excitation, counted on the whole lattice.
  const CondensateFrame frame(phi);
  auto fr = std::make_shared<const CondensateFrame>(phi);
  auto space = std::make_shared<const TruncatedFockSpace>(3, 3);
  Eigen::VectorXcd c = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(space->dimension()));
  c[static_cast<Eigen::Index>(space->offset(1))] = 1.0;
  const ManyBodyState one = excitation_reconstruct(ExcitationVector{fr, space, c});
  const auto fn1 = fluctuation_number(one, phi, RegionMask(g, true), 1);
  CHECK(std::abs(fn1.direct - 1.0) < 1e-12);
  CHECK(std::abs(fn1.excitation - 1.0) < 1e-12);

  // Dense oracle: dGamma(q 1_X q) assembled from tensor-space ladder operators.
  const ManyBodyState psi = random_state(build_basis(2, 4), 33);
  const testing_oracle::DenseFock fock(4, 2);
  Eigen::MatrixXcd ind = Eigen::MatrixXcd::Zero(4, 4);
  ind(0, 0) = ind(1, 1) = 1.0;
  const Eigen::MatrixXcd q = frame.projector();
  const testing_oracle::Mat e = fock.embedding(*psi.basis);
  const testing_oracle::Vec v = e * psi.coefficients;
  const testing_oracle::Mat op = fock.second_quantize(q * ind * q);
  for (int j = 1; j <= 3; ++j) {
    testing_oracle::Vec w = v;
    for (int p = 0; p < j; ++p) w = op * w;
    const auto fn = fluctuation_number(psi, phi, half, j);
    CHECK(std::abs(fn.direct - v.dot(w).real()) < 1e-10);
    CHECK(std::abs(fn.excitation - v.dot(w).real()) < 1e-10);
  }
  CHECK_THROWS_AS(fluctuation_number(psi, phi, half, 4), DomainError);
}

TEST_CASE("site densities agree between the reduced density and the excitation vector") {
  const auto g = LatticeGeometry::chain(5);
  const ComplexField phi = random_field(g, 8);
  for (unsigned seed : {1u, 2u, 3u}) {
    const ManyBodyState psi = random_state(build_basis(3, 5), seed);
    auto frame = std::make_shared<const CondensateFrame>(phi);
    const Eigen::VectorXd a = excitation_densities(reduced_density(psi), *frame);
    const Eigen::VectorXd b = excitation_densities(excitation_decompose(psi, frame));
    CHECK((a - b).norm() < 1e-10);
    // Total equals the global excitation number.
    const auto moments = excitation_moments(excitation_decompose(psi, frame), 1);
    CHECK(std::abs(a.sum() + 1.0 - moments[0]) < 1e-10);
  }
}

TEST_CASE("excitation number vanishes exactly on the pure condensate") {
  const auto g = LatticeGeometry::chain(4);
  const ComplexField phi = random_field(g, 12);
  const ManyBodyState prod = product_state(phi, 3);
  const RegionMask all(g, true);
  CHECK(std::abs(fluctuation_number(prod, phi, all, 1).direct) < 1e-12);
  const ManyBodyState noise = random_state(prod.basis, 4);
  for (double eps : {1e-1, 1e-3}) {
    Eigen::VectorXcd c = prod.coefficients + eps * noise.coefficients;
    c.normalize();
    const ManyBodyState perturbed(prod.basis, c);
    CHECK(fluctuation_number(perturbed, phi, all, 1).direct > 1e-3 * eps * eps);
  }
}

TEST_CASE("b-operators: vacuum, modified commutators, large-N limit") {
  const auto g = LatticeGeometry::chain(4);
  const ComplexField phi = random_field(g, 6);
  auto frame = std::make_shared<const CondensateFrame>(phi);
  const Eigen::VectorXcd f = frame->project(random_field(g, 7).values());
  const Eigen::VectorXcd h = frame->project(random_field(g, 8).values());

  const ExcitationAlgebra alg(frame, 3);
  const Eigen::MatrixXcd bf = dense(alg.b(f));
  const Eigen::MatrixXcd bh_dag = dense(alg.b_dagger(h));
  CHECK(bf.col(0).norm() < 1e-15);

  const double n = 3.0;
  const Eigen::MatrixXcd num = dense(alg.number());
  const auto d = static_cast<Eigen::Index>(alg.dimension());
  const Eigen::MatrixXcd lhs = bf * bh_dag - bh_dag * bf;
  const Eigen::MatrixXcd rhs = (Eigen::MatrixXcd::Identity(d, d) - num / n) * f.dot(h) -
                               dense(alg.creation(h)) * dense(alg.annihilation(f)) / n;
  CHECK((lhs - rhs).norm() < 1e-12);
  CHECK((bf * dense(alg.b(h)) - dense(alg.b(h)) * bf).norm() < 1e-12);

  CHECK_THROWS_AS(alg.b(phi.values()), DomainError);

  // ||[b(f), b*(f)] - <f,f>|| on sectors 0 and 1 falls like 1/N.
  std::vector<double> defects;
  for (int particles : {4, 8, 16}) {
    const ExcitationAlgebra a(frame, particles);
    const Eigen::MatrixXcd b = dense(a.b(f));
    const Eigen::MatrixXcd bd = dense(a.b_dagger(f));
    const auto low = static_cast<Eigen::Index>(a.space().offset(2));
    const Eigen::MatrixXcd c = (b * bd - bd * b).topLeftCorner(low, low) -
                               f.squaredNorm() * Eigen::MatrixXcd::Identity(low, low);
    defects.push_back(dense_norm(c));
  }
  CHECK(defects[0] / defects[1] == doctest::Approx(2.0).epsilon(0.01));
  CHECK(defects[1] / defects[2] == doctest::Approx(2.0).epsilon(0.01));
}

TEST_CASE("expanded generator matches the conjugated many-body Hamiltonian") {
  struct Case {
    int sites;
    int particles;
    double lambda;
    unsigned seed;
  };
  for (const Case c : {Case{4, 3, 0.3, 1}, Case{5, 2, -0.7, 2}, Case{3, 4, 1.1, 3}}) {
    const auto g = LatticeGeometry::chain(c.sites);
    const ComplexField phi = random_field(g, c.seed);
    auto frame = std::make_shared<const CondensateFrame>(phi);
    const ExcitationAlgebra alg(frame, c.particles);
    const Eigen::MatrixXcd expanded = dense(build_generator(alg, c.lambda));
    const Eigen::MatrixXcd conjugated = conjugated_generator(alg, c.lambda);
    const double s4 = phi.values().cwiseAbs2().squaredNorm();
    const double shift = -c.lambda * (c.particles + 1) * s4 / 2.0;
    const auto d = static_cast<Eigen::Index>(alg.dimension());
    CHECK((conjugated - expanded - shift * Eigen::MatrixXcd::Identity(d, d)).norm() < 1e-11);
  }
}

TEST_CASE("quadratic generator and remainders") {
  const auto g = LatticeGeometry::chain(4);
  const ComplexField phi = random_field(g, 5);
  auto frame = std::make_shared<const CondensateFrame>(phi);
  const ExcitationAlgebra alg(frame, 3);

  const Eigen::MatrixXcd hq = dense(build_quadratic_generator(alg, 0.3));
  CHECK((hq - hq.adjoint()).norm() < 1e-12);
  CHECK((dense(build_quadratic_generator(alg, 0.0)) - dense(compressed_kinetic(alg))).norm() < 1e-14);

  const RemainderTerms r = build_remainders(alg, 0.3);
  for (const SparseMatrixC* m : {&r.r1, &r.r2, &r.r3}) {
    const Eigen::MatrixXcd a = dense(*m);
    CHECK((a - a.adjoint()).norm() < 1e-12);
  }
  CHECK(std::abs(dense(r.r2)(0, 0)) < 1e-15);
  CHECK(std::abs(dense(r.r3)(0, 0)) < 1e-15);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(dense(r.r3));
  CHECK(es.eigenvalues().minCoeff() > -1e-12);

  // Pair kernel conj(q) phi^2 q is bounded by ||phi||_inf^2.
  const Eigen::MatrixXcd q = frame->projector();
  const Eigen::MatrixXcd k2 = q.conjugate() * phi.values().cwiseProduct(phi.values()).asDiagonal() * q;
  CHECK(dense_norm(k2) <= phi.values().cwiseAbs2().maxCoeff() + 1e-14);

  SUBCASE("site-localized condensate keeps interaction terms at its site") {
    const ComplexField delta = ComplexField::delta(g, 1);
    auto df = std::make_shared<const CondensateFrame>(delta);
    const ExcitationAlgebra da(df, 2);
    const RemainderTerms rd = build_remainders(da, 0.5);
    // R2 carries a factor phi(x) with x the condensate site, where q delta_x = 0.
    CHECK(dense(rd.r2).norm() < 1e-14);
  }

  SUBCASE("remainder norms on low sectors fall like N^{-1/2} and N^{-1}") {
    std::vector<double> r2, r3;
    for (int n : {4, 8, 16}) {
      const ExcitationAlgebra a(frame, n);
      const RemainderTerms rn = build_remainders(a, 0.3);
      const auto low = static_cast<Eigen::Index>(a.space().offset(3));
      r2.push_back(dense_norm(dense(rn.r2).topLeftCorner(low, low)));
      r3.push_back(dense_norm(dense(rn.r3).topLeftCorner(low, low)));
    }
    CHECK(r2[0] / r2[2] == doctest::Approx(2.0).epsilon(0.08));
    CHECK(r3[0] / r3[2] == doctest::Approx(4.0).epsilon(0.02));
  }
}

TEST_CASE("commutator inequality check") {
  const auto g = LatticeGeometry::chain(4);
  const ComplexField phi = random_field(g, 14);
  auto frame = std::make_shared<const CondensateFrame>(phi);
  const ExcitationAlgebra alg(frame, 3);

  const auto zero = verify_commutator_inequality(alg, Eigen::VectorXd::Zero(4), 0.3);
  CHECK(std::abs(zero.min_eigenvalue) < 1e-12);
  CHECK(zero.lhs_norm < 1e-12);

  const Eigen::VectorXd h = (Eigen::VectorXd(4) << 0.2, 1.0, 0.5, 0.0).finished();
  const auto free = verify_commutator_inequality(alg, h, 0.0);
  CHECK(free.pass);

  // The right side annihilates the vacuum, so any coupling of the vacuum
  // by the left side produces a negative direction.
  const auto r = verify_commutator_inequality(alg, h, 0.3);
  CHECK(r.dimension == alg.dimension());
  if (r.vacuum_coupling > 1e-10) CHECK(r.min_eigenvalue < 0.0);

  CHECK_THROWS_AS(verify_commutator_inequality(alg, -h, 0.3), DomainError);
  const ExcitationAlgebra big(std::make_shared<const CondensateFrame>(random_field(LatticeGeometry::chain(10), 1)), 6);
  CHECK_THROWS_AS(verify_commutator_inequality(big, Eigen::VectorXd::Ones(10), 0.3), ResourceError);
}

TEST_CASE("moment commutator constants") {
  const auto g = LatticeGeometry::chain(4);
  const ComplexField phi = random_field(g, 15);
  auto frame = std::make_shared<const CondensateFrame>(phi);
  const ExcitationAlgebra alg(frame, 3);

  const auto free = verify_moment_commutators(alg, 0.0, 10, 1);
  CHECK(free.comm1_constant == 0.0);
  CHECK(free.comm2_constant == 0.0);

  const ExcitationAlgebra vacuum(std::make_shared<const CondensateFrame>(ComplexField(g)), 3);
  const auto zero_field = verify_moment_commutators(vacuum, 0.3, 10, 1);
  CHECK(zero_field.phi_linf == 0.0);
  CHECK(zero_field.comm1_constant == 0.0);
  CHECK(zero_field.pass);

  const auto a = verify_moment_commutators(alg, 0.3, 50, 1);
  const auto b = verify_moment_commutators(alg, 0.3, 50, 2);
  CHECK(a.pass);
  CHECK(a.comm1_max_ratio <= a.comm1_constant * (1 + 1e-12));
  CHECK(a.comm2_max_ratio <= a.comm2_constant * (1 + 1e-12));
  CHECK(a.comm1_max_ratio / b.comm1_max_ratio < 2.0);
  CHECK(b.comm1_max_ratio / a.comm1_max_ratio < 2.0);
}

TEST_CASE("trace difference splits into fluctuation terms") {
  SUBCASE("pure condensate") {
    const auto g = LatticeGeometry::chain(4);
    const ComplexField phi = random_field(g, 20);
    const auto t = trace_diff_decomposition(product_state(phi, 3), phi, random_hermitian(4, 1));
    CHECK(std::abs(t.lhs) < 1e-12);
    CHECK(std::abs(t.rhs) < 1e-12);
  }
  SUBCASE("projection onto the condensate") {
    const auto g = LatticeGeometry::chain(3);
    const ComplexField phi = random_field(g, 21);
    const ManyBodyState psi = random_state(build_basis(2, 3), 5);
    const Eigen::MatrixXcd o = phi.values() * phi.values().adjoint();
    const auto t = trace_diff_decomposition(psi, phi, o);
    const Eigen::MatrixXcd a0 = dense(second_quantize(*psi.basis, o));
    CHECK(std::abs(t.lhs - (psi.coefficients.dot(a0 * psi.coefficients).real() - 2.0)) < 1e-12);
    CHECK(std::abs(t.rhs_without_depletion) < 1e-12);
    CHECK(t.defect < 1e-12);
    // Without the depletion term the mismatch is the full excitation number.
    CHECK(t.defect_without_depletion > 1e-3);
  }
  SUBCASE("random states and observables") {
    for (unsigned seed = 0; seed < 5; ++seed) {
      const auto g = LatticeGeometry::chain(3);
      const ComplexField phi = random_field(g, 30 + seed);
      const ManyBodyState psi = random_state(build_basis(2, 3), 40 + seed);
      const auto t = trace_diff_decomposition(psi, phi, random_hermitian(3, 50 + seed));
      CHECK(t.defect < 1e-10);
    }
  }
}

TEST_CASE("linear response flow") {
  const auto g = LatticeGeometry::chain(16);
  const ComplexField f = random_field(g, 1);

  SUBCASE("identity at s = t") {
    HartreeOptions opts;
    opts.dt = 0.05;
    const auto traj = evolve_hartree(random_field(g, 2), 1.0, 1.0, opts);
    const auto r = evolve_L(traj, 0.5, 0.5, f);
    CHECK((r.u.values() - f.values()).norm() == 0.0);
  }
  SUBCASE("free flow without condensate") {
    // A vanishing condensate is stationary; record it by hand.
    HartreeTrajectory traj(g, 0.0, 0.05, SplittingScheme::strang);
    for (int i = 0; i <= 40; ++i) {
      traj.times.push_back(0.05 * i);
      traj.snapshots.emplace_back(g);
    }
    const auto r = evolve_L(traj, 2.0, 0.5, f);
    CHECK((r.u.values() - free_propagate(f, 0.5 - 2.0).values()).norm() < 1e-8);
    CHECK(r.error_estimate <= 1e-8);
  }
  SUBCASE("growth bound on interacting trajectories") {
    for (unsigned seed = 0; seed < 3; ++seed) {
      HartreeOptions opts;
      opts.dt = 0.02;
      opts.sample_stride = 5;
      const double lambda = seed % 2 ? -2.0 : 2.0;
      const auto traj = evolve_hartree(random_field(g, 10 + seed), lambda, 2.0, opts);
      const auto r = evolve_L(traj, 2.0, 0.0, random_field(g, 20 + seed));
      CHECK(r.growth_ratio <= 1.0 + 1e-6);
      CHECK(r.growth_ratio > 0.0);
    }
  }
  SUBCASE("the flow is real-linear but not complex-linear") {
    HartreeOptions opts;
    opts.dt = 0.02;
    const auto traj = evolve_hartree(random_field(g, 3), 1.5, 1.0, opts);
    const ComplexField h = random_field(g, 4);
    ComplexField sum(g, f.values() + 2.0 * h.values());
    const auto uf = evolve_L(traj, 1.0, 0.0, f).u.values();
    const auto uh = evolve_L(traj, 1.0, 0.0, h).u.values();
    const auto us = evolve_L(traj, 1.0, 0.0, sum).u.values();
    CHECK((us - uf - 2.0 * uh).norm() < 1e-7);
    ComplexField rot(g, cplx(0.0, 1.0) * f.values());
    const auto ur = evolve_L(traj, 1.0, 0.0, rot).u.values();
    CHECK((ur - cplx(0.0, 1.0) * uf).norm() > 1e-4);
  }
  SUBCASE("argument checks") {
    HartreeOptions opts;
    opts.dt = 0.05;
    opts.keep_fields = false;
    const auto traj = evolve_hartree(random_field(g, 2), 1.0, 1.0, opts);
    CHECK_THROWS_AS(evolve_L(traj, 1.0, 0.0, f), InsufficientDataError);
  }
}
