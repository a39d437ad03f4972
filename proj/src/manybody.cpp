#include "bec/manybody.hpp"

#include <cmath>
#include <random>

#include "bec/errors.hpp"
#include "bec/field_io.hpp"
#include "bec/krylov.hpp"

namespace bec {

BasisPtr build_basis(int particles, int modes, std::size_t cap) {
  return std::make_shared<const FockBasis>(particles, modes, cap);
}

ManyBodyState::ManyBodyState(BasisPtr b, Eigen::VectorXcd c)
    : basis(std::move(b)), coefficients(std::move(c)) {
  if (!basis) throw DomainError("state needs a basis");
  if (static_cast<std::size_t>(coefficients.size()) != basis->dimension())
    throw DimensionError("coefficient count " + std::to_string(coefficients.size()) +
                         " does not match basis dimension " + std::to_string(basis->dimension()));
}

ManyBodyState random_state(BasisPtr basis, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  Eigen::VectorXcd c(static_cast<Eigen::Index>(basis->dimension()));
  for (Eigen::Index i = 0; i < c.size(); ++i) c[i] = cplx(gauss(rng), gauss(rng));
  c.normalize();
  return ManyBodyState(std::move(basis), std::move(c));
}

SparseMatrixC second_quantize(const FockBasis& basis, const Eigen::MatrixXcd& h) {
  const int m = basis.modes();
  if (h.rows() != m || h.cols() != m) throw DimensionError("one-body kernel has the wrong size");
  std::vector<std::pair<int, int>> entries;
  for (int x = 0; x < m; ++x)
    for (int y = 0; y < m; ++y)
      if (h(x, y) != cplx(0.0)) entries.emplace_back(x, y);

  std::vector<Eigen::Triplet<cplx>> trip;
  trip.reserve(basis.dimension() * std::min<std::size_t>(entries.size(), 4 * static_cast<std::size_t>(m)));
  std::vector<FockBasis::Occupation> work(static_cast<std::size_t>(m));
  for (std::size_t i = 0; i < basis.dimension(); ++i) {
    const auto n = basis.state(i);
    cplx diag = 0.0;
    for (auto [x, y] : entries) {
      const auto ny = n[static_cast<std::size_t>(y)];
      if (ny == 0) continue;
      if (x == y) {
        diag += h(x, x) * static_cast<double>(ny);
        continue;
      }
      std::copy(n.begin(), n.end(), work.begin());
      const auto nx = work[static_cast<std::size_t>(x)];
      work[static_cast<std::size_t>(y)] = static_cast<FockBasis::Occupation>(ny - 1);
      work[static_cast<std::size_t>(x)] = static_cast<FockBasis::Occupation>(nx + 1);
      const double amp = std::sqrt(static_cast<double>(ny) * static_cast<double>(nx + 1));
      trip.emplace_back(static_cast<int>(basis.index(work)), static_cast<int>(i), h(x, y) * amp);
    }
    if (diag != cplx(0.0)) trip.emplace_back(static_cast<int>(i), static_cast<int>(i), diag);
  }
  const auto dim = static_cast<Eigen::Index>(basis.dimension());
  SparseMatrixC out(dim, dim);
  out.setFromTriplets(trip.begin(), trip.end());
  return out;
}

Eigen::VectorXd pair_count_diagonal(const FockBasis& basis) {
  Eigen::VectorXd d(static_cast<Eigen::Index>(basis.dimension()));
  for (std::size_t i = 0; i < basis.dimension(); ++i) {
    double s = 0.0;
    for (auto v : basis.state(i)) s += static_cast<double>(v) * (static_cast<double>(v) - 1.0);
    d[static_cast<Eigen::Index>(i)] = s;
  }
  return d;
}

SparseHamiltonian build_hamiltonian(const LatticeGeometry& g, double lambda, int particles,
                                    std::size_t cap, bool include_diagonal) {
  auto basis = build_basis(particles, static_cast<int>(g.site_count()), cap);
  Eigen::MatrixXcd lap = laplacian_matrix(g).cast<cplx>();
  if (!include_diagonal) lap.diagonal().setZero();
  SparseMatrixC h = second_quantize(*basis, lap);
  if (lambda != 0.0 && particles > 0) {
    const Eigen::VectorXd pairs = pair_count_diagonal(*basis);
    const double c = lambda / (2.0 * particles);
    for (Eigen::Index i = 0; i < pairs.size(); ++i)
      if (pairs[i] != 0.0) h.coeffRef(i, i) += c * pairs[i];
  }
  h.makeCompressed();
  SparseMatrixC adj = h.adjoint();
  const bool herm = (SparseMatrixC(h - adj)).norm() <= 1e-14 * std::max(1.0, h.norm());
  return SparseHamiltonian{std::move(basis), std::move(h), lambda, herm};
}

ManyBodyState product_state(const ComplexField& phi, int particles, BasisPtr basis) {
  if (std::abs(phi.norm2() - 1.0) > 1e-12) throw DomainError("condensate must be normalized");
  const int m = static_cast<int>(phi.size());
  if (!basis) basis = build_basis(particles, m);
  if (basis->modes() != m || basis->particles() != particles)
    throw DimensionError("basis does not match the field and particle number");
  const double log_nfact = std::lgamma(particles + 1.0);
  Eigen::VectorXcd c(static_cast<Eigen::Index>(basis->dimension()));
  for (std::size_t i = 0; i < basis->dimension(); ++i) {
    const auto n = basis->state(i);
    double log_w = log_nfact;
    cplx prod = 1.0;
    for (int x = 0; x < m; ++x) {
      const int nx = n[static_cast<std::size_t>(x)];
      if (nx == 0) continue;
      log_w -= std::lgamma(nx + 1.0);
      const cplx p = phi[static_cast<std::size_t>(x)];
      for (int k = 0; k < nx; ++k) prod *= p;
    }
    c[static_cast<Eigen::Index>(i)] = std::exp(0.5 * log_w) * prod;
  }
  return ManyBodyState(std::move(basis), std::move(c));
}

Eigen::MatrixXcd annihilation_amplitudes(const ManyBodyState& psi, const FockBasis& lower) {
  const int m = psi.modes();
  if (lower.modes() != m || lower.particles() + 1 != psi.particles())
    throw DimensionError("lower basis must have one particle fewer");
  Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(lower.dimension()), m);
  std::vector<FockBasis::Occupation> work(static_cast<std::size_t>(m));
  for (std::size_t i = 0; i < psi.basis->dimension(); ++i) {
    const cplx c = psi.coefficients[static_cast<Eigen::Index>(i)];
    if (c == cplx(0.0)) continue;
    const auto n = psi.basis->state(i);
    std::copy(n.begin(), n.end(), work.begin());
    for (int x = 0; x < m; ++x) {
      const auto nx = work[static_cast<std::size_t>(x)];
      if (nx == 0) continue;
      work[static_cast<std::size_t>(x)] = static_cast<FockBasis::Occupation>(nx - 1);
      a(static_cast<Eigen::Index>(lower.index(work)), x) += std::sqrt(static_cast<double>(nx)) * c;
      work[static_cast<std::size_t>(x)] = nx;
    }
  }
  return a;
}

Eigen::MatrixXcd reduced_density(const ManyBodyState& psi) {
  const int m = psi.modes();
  if (psi.particles() == 0) return Eigen::MatrixXcd::Zero(m, m);
  const FockBasis lower(psi.particles() - 1, m, std::numeric_limits<std::size_t>::max());
  const Eigen::MatrixXcd a = annihilation_amplitudes(psi, lower);
  return a.transpose() * a.conjugate();
}

OneBodyObservable::OneBodyObservable(Eigen::MatrixXcd kernel) : kernel_(std::move(kernel)) {
  if (kernel_.rows() != kernel_.cols()) throw DimensionError("observable kernel must be square");
}

OneBodyObservable::OneBodyObservable(Eigen::MatrixXcd kernel, RegionMask locality)
    : kernel_(std::move(kernel)), locality_(std::move(locality)) {
  if (kernel_.rows() != kernel_.cols() ||
      static_cast<std::size_t>(kernel_.rows()) != locality_->geometry().site_count())
    throw DimensionError("observable kernel does not match the region geometry");
  for (Eigen::Index x = 0; x < kernel_.rows(); ++x)
    for (Eigen::Index y = 0; y < kernel_.cols(); ++y)
      if (kernel_(x, y) != cplx(0.0) &&
          !(locality_->contains(static_cast<std::size_t>(x)) &&
            locality_->contains(static_cast<std::size_t>(y))))
        throw DomainError("observable kernel is nonzero outside its locality region");
}

OneBodyObservable OneBodyObservable::site_projector(const LatticeGeometry& g, std::size_t site) {
  const auto m = static_cast<Eigen::Index>(g.site_count());
  Eigen::MatrixXcd k = Eigen::MatrixXcd::Zero(m, m);
  k(static_cast<Eigen::Index>(site), static_cast<Eigen::Index>(site)) = 1.0;
  RegionMask mask(g);
  mask.set(site);
  return OneBodyObservable(std::move(k), std::move(mask));
}

OneBodyObservable OneBodyObservable::region_indicator(const RegionMask& mask) {
  const auto m = static_cast<Eigen::Index>(mask.geometry().site_count());
  Eigen::MatrixXcd k = Eigen::MatrixXcd::Zero(m, m);
  for (auto x : mask.sites()) k(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(x)) = 1.0;
  return OneBodyObservable(std::move(k), mask);
}

double OneBodyObservable::op_norm() const {
  if (kernel_.size() == 0) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(kernel_);
  return svd.singularValues()(0);
}

MeanFieldError mean_field_error(const Eigen::MatrixXcd& gamma, int particles,
                                const ComplexField& phi, const OneBodyObservable& o) {
  const auto& k = o.kernel();
  if (gamma.rows() != k.rows() || static_cast<std::size_t>(k.rows()) != phi.size())
    throw DimensionError("mean-field error: inconsistent sizes");
  const Eigen::VectorXcd& p = phi.values();
  const cplx tr = (gamma * k).trace() - static_cast<double>(particles) * p.dot(k * p);
  MeanFieldError e;
  e.absolute = std::abs(tr);
  const double scale = static_cast<double>(particles) * o.op_norm();
  e.normalized = scale > 0.0 ? e.absolute / scale : 0.0;
  return e;
}

MeanFieldError mean_field_error(const ManyBodyState& psi, const ComplexField& phi,
                                const OneBodyObservable& o) {
  return mean_field_error(reduced_density(psi), psi.particles(), phi, o);
}

double trace_norm(const Eigen::MatrixXcd& a) {
  if (a.size() == 0) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(a);
  return svd.singularValues().sum();
}

ManyBodyTrajectory evolve_manybody(const ManyBodyState& psi0, const SparseHamiltonian& h,
                                   double t_final, const ManyBodyOptions& opts) {
  if (!(opts.dt > 0.0)) throw DomainError("time step must be positive");
  if (!(t_final >= 0.0)) throw DomainError("final time must be nonnegative");
  if (!psi0.is_normalized()) throw DomainError("initial state must be normalized");
  if (psi0.basis->dimension() != h.dimension() || psi0.particles() != h.basis->particles())
    throw DimensionError("state and Hamiltonian live on different bases");
  if (opts.sample_stride < 1) throw DomainError("sample stride must be >= 1");

  long long nsteps = std::llround(t_final / opts.dt);
  double dt = opts.dt;
  if (std::abs(static_cast<double>(nsteps) * opts.dt - t_final) > 1e-9 * std::max(1.0, t_final)) {
    nsteps = static_cast<long long>(std::ceil(t_final / opts.dt));
    dt = t_final / static_cast<double>(nsteps);
  }

  bool dense = opts.method == PropagatorKind::dense ||
               (opts.method == PropagatorKind::automatic && h.dimension() <= kDensePropagatorCap);
  if (opts.method == PropagatorKind::dense && h.dimension() > kDensePropagatorCap)
    throw ResourceError("dense propagator above its dimension cap", h.dimension());

  ManyBodyTrajectory traj;
  traj.basis = psi0.basis;
  traj.stats.used_dense = dense;
  std::optional<DensePropagator> dprop;
  std::optional<KrylovPropagator> kprop;
  if (dense) dprop.emplace(h.matrix);
  else kprop.emplace(h.matrix, opts.krylov_tolerance, opts.krylov_max_dim);

  Eigen::VectorXcd v = psi0.coefficients;
  auto record = [&](double t) {
    traj.times.push_back(t);
    traj.norms.push_back(v.norm());
    if (opts.keep_states) traj.states.emplace_back(psi0.basis, v);
  };
  record(0.0);
  for (long long k = 1; k <= nsteps; ++k) {
    if (dense) dprop->step(v, dt);
    else kprop->step(v, dt, traj.stats);
    if (k % opts.sample_stride == 0 || k == nsteps) record(static_cast<double>(k) * dt);
  }
  return traj;
}

void write_state(const std::filesystem::path& path, const ManyBodyState& psi) {
  nlohmann::json header = {{"kind", "manybody_state"},
                           {"N", psi.particles()},
                           {"M", psi.modes()},
                           {"ordering", "lexicographic-descending"}};
  std::span<const cplx> values(psi.coefficients.data(),
                               static_cast<std::size_t>(psi.coefficients.size()));
  write_complex_blob(path, std::move(header), values);
}

ManyBodyState read_state(const std::filesystem::path& path) {
  auto blob = read_complex_blob(path);
  const auto& h = blob.header;
  if (h.value("kind", "") != "manybody_state") throw DomainError("not a many-body state file");
  auto basis = build_basis(h.at("N").get<int>(), h.at("M").get<int>());
  Eigen::VectorXcd c = Eigen::Map<const Eigen::VectorXcd>(
      blob.values.data(), static_cast<Eigen::Index>(blob.values.size()));
  return ManyBodyState(std::move(basis), std::move(c));
}

}  // namespace bec
