#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "bec/errors.hpp"
#include "bec/fluctuation.hpp"

namespace bec {

namespace {

Eigen::MatrixXcd hermitian_part(const Eigen::MatrixXcd& a) { return 0.5 * (a + a.adjoint()); }

double min_eigenvalue(const Eigen::MatrixXcd& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(hermitian_part(a), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double operator_norm(const Eigen::MatrixXcd& a) {
  if (a.size() == 0) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(a);
  return svd.singularValues()[0];
}

// f(A) for Hermitian A by eigendecomposition.
template <class F>
Eigen::MatrixXcd matrix_function(const Eigen::MatrixXcd& a, F f) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(hermitian_part(a));
  Eigen::VectorXd vals = es.eigenvalues();
  for (Eigen::Index i = 0; i < vals.size(); ++i) vals[i] = f(std::max(vals[i], 0.0));
  return es.eigenvectors() * vals.asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace

Eigen::MatrixXcd to_dense(const SparseMatrixC& m, std::size_t cap) {
  const auto dim = static_cast<std::size_t>(std::max(m.rows(), m.cols()));
  if (dim > cap) throw ResourceError("dense operator check exceeds the dimension cap", dim);
  return Eigen::MatrixXcd(m);
}

SparseMatrixC compressed_kinetic(const ExcitationAlgebra& alg) {
  return alg.second_quantize(laplacian_matrix(alg.frame().geometry()).cast<cplx>());
}

SparseMatrixC build_quadratic_generator(const ExcitationAlgebra& alg, double lambda) {
  const CondensateFrame& frame = alg.frame();
  const Eigen::VectorXcd& phi = frame.phi().values();
  Eigen::MatrixXcd h = laplacian_matrix(frame.geometry()).cast<cplx>();
  h.diagonal() += 2.0 * lambda * phi.cwiseAbs2();
  SparseMatrixC out = alg.second_quantize(h);
  if (lambda == 0.0) return out;

  const SparseMatrixC s = alg.depletion_factor();
  SparseMatrixC pairs(out.rows(), out.cols());
  for (int x = 0; x < frame.sites(); ++x) {
    const cplx w = phi[x] * phi[x];
    if (w == cplx(0.0)) continue;
    const SparseMatrixC bx_dag = SparseMatrixC(alg.site_annihilator(static_cast<std::size_t>(x)).adjoint()) * s;
    pairs += w * SparseMatrixC(bx_dag * bx_dag);
  }
  out += (0.5 * lambda) * (pairs + SparseMatrixC(pairs.adjoint()));
  return out;
}

RemainderTerms build_remainders(const ExcitationAlgebra& alg, double lambda) {
  const CondensateFrame& frame = alg.frame();
  const Eigen::VectorXcd& phi = frame.phi().values();
  const double n = alg.particles();
  const auto dim = static_cast<Eigen::Index>(alg.dimension());
  RemainderTerms out{SparseMatrixC(dim, dim), SparseMatrixC(dim, dim), SparseMatrixC(dim, dim)};
  if (lambda == 0.0) return out;

  const Eigen::VectorXd dens = phi.cwiseAbs2();
  const SparseMatrixC num = alg.number();
  const SparseMatrixC s = alg.depletion_factor();
  const SparseMatrixC one = alg.identity();

  {
    const SparseMatrixC k1 = alg.second_quantize(dens.cast<cplx>().asDiagonal().toDenseMatrix());
    const Eigen::VectorXcd g = frame.project(dens.cast<cplx>().cwiseProduct(phi));
    const SparseMatrixC bg = alg.b(g);
    const SparseMatrixC bg_dag = SparseMatrixC(bg.adjoint());
    const double mu = 0.5 * dens.squaredNorm();
    out.r1 = (-2.0 * lambda / n) * SparseMatrixC(num * k1);
    out.r1 += (-lambda / std::sqrt(n)) * (SparseMatrixC(bg * num) + SparseMatrixC(num * bg_dag));
    out.r1 += (lambda * mu / n) * SparseMatrixC(num * SparseMatrixC(num + one));
  }

  SparseMatrixC cubic(dim, dim);
  for (int x = 0; x < frame.sites(); ++x) {
    const SparseMatrixC c = alg.site_annihilator(static_cast<std::size_t>(x));
    const SparseMatrixC cd = SparseMatrixC(c.adjoint());
    const SparseMatrixC nx = cd * c;
    if (phi[x] != cplx(0.0)) cubic += std::conj(phi[x]) * SparseMatrixC(nx * SparseMatrixC(s * c));
    out.r3 += SparseMatrixC(SparseMatrixC(cd * cd) * SparseMatrixC(c * c));
  }
  out.r2 = (lambda / std::sqrt(n)) * (cubic + SparseMatrixC(cubic.adjoint()));
  out.r3 *= lambda / (2.0 * n);
  return out;
}

SparseMatrixC build_generator(const ExcitationAlgebra& alg, double lambda) {
  const RemainderTerms r = build_remainders(alg, lambda);
  return build_quadratic_generator(alg, lambda) + r.r1 + r.r2 + r.r3;
}

Eigen::MatrixXcd conjugated_generator(const ExcitationAlgebra& alg, double lambda) {
  const CondensateFrame& frame = alg.frame();
  if (frame.degenerate()) throw DomainError("the excitation map needs a nonzero condensate");
  const int n = alg.particles();
  const LatticeGeometry& g = frame.geometry();
  const Eigen::VectorXcd& phi = frame.phi().values();

  const SparseHamiltonian h = build_hamiltonian(g, lambda, n);
  Eigen::MatrixXcd h_phi = laplacian_matrix(g).cast<cplx>();
  h_phi.diagonal() += lambda * phi.cwiseAbs2();
  const Eigen::MatrixXcd x = to_dense(h.matrix - second_quantize(*h.basis, h_phi));

  const auto dim = static_cast<Eigen::Index>(h.basis->dimension());
  if (static_cast<std::size_t>(dim) != alg.dimension())
    throw ConsistencyError("truncated space and N-body space differ in dimension");
  Eigen::MatrixXcd u(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    const ManyBodyState e(h.basis, Eigen::VectorXcd::Unit(dim, i));
    u.col(i) = excitation_decompose(e, alg.frame_ptr(), alg.space_ptr()).coefficients;
  }
  return u * x * u.adjoint() + to_dense(alg.second_quantize(h_phi));
}

CommutatorInequalityReport verify_commutator_inequality(const ExcitationAlgebra& alg, const Eigen::VectorXd& h,
                                                        double lambda) {
  const CondensateFrame& frame = alg.frame();
  if (h.size() != frame.sites()) throw DimensionError("weight h must have one entry per site");
  if ((h.array() < 0.0).any()) throw DomainError("weight h must be nonnegative");
  const auto dim = alg.dimension();
  if (dim > kDenseOperatorCap) throw ResourceError("dense operator check exceeds the dimension cap", dim);

  const Eigen::MatrixXcd gen = to_dense(build_generator(alg, lambda) - compressed_kinetic(alg));
  const Eigen::VectorXcd& phi = frame.phi().values();
  const double n = alg.particles();
  const Eigen::MatrixXcd num = to_dense(alg.number());
  const auto d = static_cast<Eigen::Index>(dim);

  Eigen::MatrixXcd weighted = Eigen::MatrixXcd::Zero(d, d);
  Eigen::MatrixXcd rhs = Eigen::MatrixXcd::Zero(d, d);
  for (int x = 0; x < frame.sites(); ++x) {
    if (h[x] == 0.0) continue;
    const Eigen::MatrixXcd nx = to_dense(alg.site_density(static_cast<std::size_t>(x)));
    weighted += h[x] * nx;
    const double a = std::abs(phi[x]);
    if (a == 0.0) continue;
    const Eigen::MatrixXcd root = matrix_function(nx, [](double v) { return std::sqrt(v); });
    const Eigen::MatrixXcd cross = matrix_function(nx, [](double v) { return v * std::sqrt(v + 1.0); });
    Eigen::MatrixXcd term = 2.0 * a * a * nx + (a * a * a / std::sqrt(n)) * hermitian_part(num * root) +
                            (a / std::sqrt(n)) * cross;
    rhs += 2.0 * std::abs(lambda) * std::abs(h[x]) * term;
  }
  const Eigen::MatrixXcd lhs = cplx(0.0, 1.0) * (gen * weighted - weighted * gen);

  CommutatorInequalityReport out;
  out.dimension = dim;
  out.min_eigenvalue = min_eigenvalue(rhs - lhs);
  out.lhs_norm = operator_norm(lhs);
  out.rhs_norm = operator_norm(rhs);
  out.vacuum_coupling = lhs.col(0).norm();
  out.pass = out.min_eigenvalue >= -1e-8;
  return out;
}

MomentCommutatorReport verify_moment_commutators(const ExcitationAlgebra& alg, double lambda, int draws,
                                                 unsigned seed) {
  const auto dim = alg.dimension();
  if (dim > kDenseOperatorCap) throw ResourceError("dense operator check exceeds the dimension cap", dim);
  const auto d = static_cast<Eigen::Index>(dim);
  const Eigen::MatrixXcd gen = to_dense(build_generator(alg, lambda) - compressed_kinetic(alg));
  const Eigen::VectorXd nd = alg.space().number_diagonal();
  const Eigen::MatrixXcd num = nd.cast<cplx>().asDiagonal();
  const Eigen::MatrixXcd k1 = num * gen - gen * num;
  const Eigen::MatrixXcd k2 = num * k1 - k1 * num;

  const Eigen::VectorXd inv_n1 = (nd.array() + 1.0).inverse().matrix();
  const Eigen::VectorXd inv_sqrt_n1 = (nd.array() + 1.0).rsqrt().matrix();
  const Eigen::VectorXd inv_sqrt_n3 = (nd.array() + 3.0).rsqrt().matrix();

  MomentCommutatorReport out;
  out.phi_linf = alg.frame().degenerate() ? 0.0 : alg.frame().phi().values().cwiseAbs().maxCoeff();
  out.draws = draws;
  const double scale = std::abs(lambda) * out.phi_linf;
  auto normalize = [scale](double v) {
    if (scale > 0.0) return v / scale;
    return v <= 1e-12 ? 0.0 : std::numeric_limits<double>::infinity();
  };

  const double c1 = operator_norm(k1 * inv_n1.cast<cplx>().asDiagonal());
  const double c2 = operator_norm(inv_sqrt_n3.cast<cplx>().asDiagonal() * k2 * inv_sqrt_n1.cast<cplx>().asDiagonal());
  out.comm1_constant = normalize(c1);
  out.comm2_constant = normalize(c2);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  auto draw = [&]() {
    Eigen::VectorXcd v(d);
    for (Eigen::Index i = 0; i < d; ++i) v[i] = cplx(gauss(rng), gauss(rng));
    return Eigen::VectorXcd(v.normalized());
  };
  double r1 = 0.0, r2 = 0.0;
  for (int i = 0; i < draws; ++i) {
    const Eigen::VectorXcd xi = draw();
    const Eigen::VectorXcd psi = draw();
    const double d1 = (nd.array() + 1.0).matrix().cast<cplx>().cwiseProduct(psi).norm();
    const double d2 = (nd.array() + 1.0).sqrt().matrix().cast<cplx>().cwiseProduct(psi).norm();
    r1 = std::max(r1, std::abs(xi.dot(k1 * psi)) / d1);
    r2 = std::max(r2, std::abs(xi.dot(inv_sqrt_n3.cast<cplx>().cwiseProduct(k2 * psi))) / d2);
  }
  out.comm1_max_ratio = normalize(r1);
  out.comm2_max_ratio = normalize(r2);
  out.pass = std::isfinite(out.comm1_constant) && std::isfinite(out.comm2_constant) &&
             out.comm1_constant < 1e3 && out.comm2_constant < 1e3;
  return out;
}

}  // namespace bec
