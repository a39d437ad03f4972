#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "bec/errors.hpp"
#include "bec/fluctuation.hpp"

namespace bec {

namespace {

SparseMatrixC diagonal(const Eigen::VectorXd& d) {
  const auto n = d.size();
  SparseMatrixC out(n, n);
  out.reserve(Eigen::VectorXi::Constant(n, 1));
  for (Eigen::Index i = 0; i < n; ++i)
    if (d[i] != 0.0) out.insert(i, i) = d[i];
  out.makeCompressed();
  return out;
}

}  // namespace

ExcitationAlgebra::ExcitationAlgebra(FramePtr frame, int particles, std::size_t cap)
    : frame_(std::move(frame)) {
  if (!frame_) throw DomainError("algebra needs a frame");
  if (particles < 1) throw DomainError("algebra needs at least one particle");
  space_ = std::make_shared<const TruncatedFockSpace>(particles, frame_->excitation_modes(), cap);
}

ExcitationAlgebra::ExcitationAlgebra(FramePtr frame, SpacePtr space)
    : frame_(std::move(frame)), space_(std::move(space)) {
  if (!frame_ || !space_) throw DomainError("algebra needs a frame and a space");
  if (space_->modes() != frame_->excitation_modes())
    throw DimensionError("space and frame disagree on the number of excitation modes");
  if (space_->particles() < 1) throw DomainError("algebra needs at least one particle");
}

SparseMatrixC ExcitationAlgebra::identity() const {
  return diagonal(Eigen::VectorXd::Ones(static_cast<Eigen::Index>(dimension())));
}

SparseMatrixC ExcitationAlgebra::number() const { return diagonal(space_->number_diagonal()); }

SparseMatrixC ExcitationAlgebra::depletion_factor() const {
  const double n = particles();
  return diagonal(((n - space_->number_diagonal().array()) / n).sqrt().matrix());
}

SparseMatrixC ExcitationAlgebra::site_annihilator(std::size_t x) const {
  const auto& v = frame_->orthogonal_modes();
  const auto dim = static_cast<Eigen::Index>(dimension());
  SparseMatrixC c(dim, dim);
  for (int k = 0; k < space_->modes(); ++k) {
    const cplx w = v(static_cast<Eigen::Index>(x), k);
    if (std::abs(w) != 0.0) c += w * space_->annihilator(k);
  }
  return c;
}

SparseMatrixC ExcitationAlgebra::site_density(std::size_t x) const {
  const SparseMatrixC c = site_annihilator(x);
  return SparseMatrixC(c.adjoint()) * c;
}

SparseMatrixC ExcitationAlgebra::region_number(const RegionMask& x) const {
  const auto dim = static_cast<Eigen::Index>(dimension());
  SparseMatrixC out(dim, dim);
  for (std::size_t z : x.sites()) out += site_density(z);
  return out;
}

SparseMatrixC ExcitationAlgebra::annihilation(const Eigen::VectorXcd& f) const {
  const Eigen::VectorXcd fk = frame_->excitation_coordinates(f);
  const auto dim = static_cast<Eigen::Index>(dimension());
  SparseMatrixC out(dim, dim);
  for (int k = 0; k < space_->modes(); ++k)
    if (fk[k] != cplx(0.0)) out += std::conj(fk[k]) * space_->annihilator(k);
  return out;
}

SparseMatrixC ExcitationAlgebra::creation(const Eigen::VectorXcd& f) const {
  return SparseMatrixC(annihilation(f).adjoint());
}

void ExcitationAlgebra::require_orthogonal(const Eigen::VectorXcd& f) const {
  if (frame_->degenerate()) return;
  if (std::abs(frame_->phi().values().dot(f)) > 1e-10 * std::max(1.0, f.norm()))
    throw DomainError("b-operators need a test function orthogonal to the condensate");
}

SparseMatrixC ExcitationAlgebra::b(const Eigen::VectorXcd& f) const {
  require_orthogonal(f);
  return depletion_factor() * annihilation(f);
}

SparseMatrixC ExcitationAlgebra::b_dagger(const Eigen::VectorXcd& f) const {
  require_orthogonal(f);
  return creation(f) * depletion_factor();
}

SparseMatrixC ExcitationAlgebra::second_quantize(const Eigen::MatrixXcd& a) const {
  const auto& v = frame_->orthogonal_modes();
  return space_->second_quantize(v.adjoint() * a * v);
}

FluctuationNumber fluctuation_number(const ManyBodyState& psi, const ComplexField& phi,
                                     const RegionMask& x, int power) {
  if (power < 1 || power > 3) throw DomainError("fluctuation moments are defined for powers 1, 2, 3");
  if (x.geometry() != phi.geometry()) throw DimensionError("region and condensate live on different lattices");
  auto frame = std::make_shared<const CondensateFrame>(phi);

  FluctuationNumber out;
  {
    const Eigen::MatrixXcd q = frame->projector();
    Eigen::MatrixXcd ind = Eigen::MatrixXcd::Zero(q.rows(), q.cols());
    for (std::size_t z : x.sites()) ind(static_cast<Eigen::Index>(z), static_cast<Eigen::Index>(z)) = 1.0;
    const SparseMatrixC op = bec::second_quantize(*psi.basis, q * ind * q);
    Eigen::VectorXcd v = psi.coefficients;
    for (int p = 0; p < power; ++p) v = op * v;
    out.direct = psi.coefficients.dot(v).real();
  }
  {
    const ExcitationVector xi = excitation_decompose(psi, frame);
    const ExcitationAlgebra alg(frame, xi.space);
    std::vector<SparseMatrixC> c;
    for (std::size_t z : x.sites()) c.push_back(alg.site_annihilator(z));
    Eigen::VectorXcd v = xi.coefficients;
    for (int p = 0; p < power; ++p) {
      Eigen::VectorXcd acc = Eigen::VectorXcd::Zero(v.size());
      for (const auto& cz : c) acc += cz.adjoint() * (cz * v);
      v = std::move(acc);
    }
    out.excitation = xi.coefficients.dot(v).real();
  }
  if (out.difference() > 1e-6)
    throw ConsistencyError("local excitation number differs between the N-body and excitation pictures");
  return out;
}

std::vector<double> excitation_moments(const ExcitationVector& xi, int powers) {
  const auto w = xi.sector_weights();
  std::vector<double> out;
  for (int p = 1; p <= powers; ++p) {
    double s = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) s += std::pow(static_cast<double>(j) + 1.0, p) * w[j];
    out.push_back(s);
  }
  return out;
}

Eigen::VectorXd excitation_densities(const Eigen::MatrixXcd& gamma, const CondensateFrame& frame) {
  const Eigen::MatrixXcd q = frame.projector();
  return (q * gamma * q).diagonal().real();
}

Eigen::VectorXd excitation_densities(const ExcitationVector& xi) {
  const ExcitationAlgebra alg(xi.frame, xi.space);
  Eigen::VectorXd out(xi.frame->sites());
  for (int x = 0; x < xi.frame->sites(); ++x)
    out[x] = (alg.site_annihilator(static_cast<std::size_t>(x)) * xi.coefficients).squaredNorm();
  return out;
}

TraceDifference trace_diff_decomposition(const ManyBodyState& psi, const ComplexField& phi,
                                         const Eigen::MatrixXcd& o) {
  const int n = psi.particles();
  if (o.rows() != psi.modes() || o.cols() != psi.modes()) throw DimensionError("observable has the wrong size");
  const Eigen::VectorXcd& p = phi.values();
  const cplx expect_phi = p.dot(o * p);

  TraceDifference out;
  const Eigen::MatrixXcd gamma = reduced_density(psi);
  out.lhs = ((gamma * o).trace() - static_cast<double>(n) * expect_phi).real();

  auto frame = std::make_shared<const CondensateFrame>(phi);
  const ExcitationVector xi = excitation_decompose(psi, frame);
  const ExcitationAlgebra alg(frame, xi.space);
  const Eigen::VectorXcd& v = xi.coefficients;
  const cplx quad = v.dot(alg.second_quantize(o) * v);
  const Eigen::VectorXcd f = frame->project(o * p);
  const Eigen::VectorXcd g = frame->project(o.adjoint() * p);
  const cplx linear = std::sqrt(static_cast<double>(n)) * v.dot((alg.b_dagger(f) + alg.b(g)) * v);
  const double depleted = v.dot(alg.number() * v).real();

  out.rhs_without_depletion = (quad + linear).real();
  out.rhs = (quad + linear - expect_phi * depleted).real();
  out.defect = std::abs(out.lhs - out.rhs);
  out.defect_without_depletion = std::abs(out.lhs - out.rhs_without_depletion);
  if (out.defect > 1e-6) throw ConsistencyError("trace difference does not match its fluctuation expansion");
  return out;
}

namespace {

// Condensate fields at arbitrary times, filled in from the nearest earlier
// sample with the trajectory's own splitting scheme.
class FieldSource {
 public:
  explicit FieldSource(const HartreeTrajectory& traj)
      : traj_(traj), stepper_(traj.geometry, traj.lambda) {}

  const Eigen::VectorXcd& at(double tau) {
    auto it = cache_.find(tau);
    if (it != cache_.end()) return it->second;
    const auto& times = traj_.times;
    auto up = std::upper_bound(times.begin(), times.end(), tau + 1e-12);
    std::size_t k = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, (up - times.begin()) - 1));
    Eigen::VectorXcd v = traj_.field_at(k).values();
    const double gap = tau - times[k];
    if (gap > 1e-12) {
      const int steps = static_cast<int>(std::ceil(gap / traj_.dt - 1e-9));
      for (int i = 0; i < steps; ++i) stepper_.step(v, gap / steps, traj_.scheme);
    }
    return cache_.emplace(tau, std::move(v)).first->second;
  }

 private:
  const HartreeTrajectory& traj_;
  HartreeStepper stepper_;
  std::map<double, Eigen::VectorXcd> cache_;
};

struct LinearizedOperator {
  const Eigen::SparseMatrix<double, Eigen::RowMajor>& kinetic;
  double lambda;

  // -i (-Delta + lambda|phi|^2 + lambda q|phi|^2 q - lambda qbar phi^2 q J) u
  Eigen::VectorXcd operator()(const Eigen::VectorXcd& phi, const Eigen::VectorXcd& u) const {
    const Eigen::VectorXd dens = phi.cwiseAbs2();
    Eigen::VectorXcd out = kinetic * u;
    out += lambda * dens.cwiseProduct(u);
    Eigen::VectorXcd qu = u - phi * phi.dot(u);
    Eigen::VectorXcd k1 = dens.cwiseProduct(qu);
    k1 -= phi * phi.dot(k1);
    out += lambda * k1;
    Eigen::VectorXcd qj = u.conjugate();
    qj -= phi * phi.dot(qj);
    Eigen::VectorXcd k2 = phi.cwiseProduct(phi).cwiseProduct(qj);
    k2 -= phi.conjugate() * phi.transpose() * k2;
    out -= lambda * k2;
    return cplx(0.0, -1.0) * out;
  }
};

Eigen::VectorXcd rk4_backward(const LinearizedOperator& op, FieldSource& fields, double t, double s,
                              int steps, const Eigen::VectorXcd& f) {
  Eigen::VectorXcd u = f;
  const double h = (s - t) / steps;
  for (int i = 0; i < steps; ++i) {
    const double tau = t + i * h;
    const Eigen::VectorXcd& p0 = fields.at(tau);
    const Eigen::VectorXcd& pm = fields.at(tau + 0.5 * h);
    const Eigen::VectorXcd& p1 = fields.at(i + 1 == steps ? s : tau + h);
    const Eigen::VectorXcd k1 = op(p0, u);
    const Eigen::VectorXcd k2 = op(pm, u + 0.5 * h * k1);
    const Eigen::VectorXcd k3 = op(pm, u + 0.5 * h * k2);
    const Eigen::VectorXcd k4 = op(p1, u + h * k3);
    u += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return u;
}

}  // namespace

LinearResponseResult evolve_L(const HartreeTrajectory& traj, double t, double s, const ComplexField& f,
                              double tolerance) {
  if (!traj.has_fields()) throw InsufficientDataError("linear response flow needs stored condensate fields");
  if (f.geometry() != traj.geometry) throw DimensionError("test function lives on another lattice");
  if (s > t) throw DomainError("the flow runs backwards: need s <= t");
  if (s < traj.times.front() - 1e-12 || t > traj.t_final() + 1e-12)
    throw DomainError("requested times lie outside the trajectory");

  LinearResponseResult out{f};
  const double f2 = f.values().squaredNorm();
  if (t - s <= 0.0) {
    out.growth_ratio = f2 > 0.0 ? 1.0 : 0.0;
    return out;
  }

  const Eigen::MatrixXd lap = laplacian_matrix(traj.geometry);
  const Eigen::SparseMatrix<double, Eigen::RowMajor> kinetic = lap.sparseView();
  const LinearizedOperator op{kinetic, traj.lambda};
  FieldSource fields(traj);

  double spacing = traj.times.size() > 1 ? traj.times[1] - traj.times[0] : traj.dt;
  int steps = std::max(1, static_cast<int>(std::ceil((t - s) / (2.0 * spacing) - 1e-9)));
  Eigen::VectorXcd coarse = rk4_backward(op, fields, t, s, steps, f.values());
  constexpr int kMaxHalvings = 12;
  for (int halving = 0;; ++halving) {
    Eigen::VectorXcd fine = rk4_backward(op, fields, t, s, 2 * steps, f.values());
    const double err = (fine - coarse).norm() / 15.0;
    if (err <= tolerance || halving == kMaxHalvings) {
      if (err > tolerance) throw ConsistencyError("linear response flow did not reach its error tolerance");
      out.u = ComplexField(traj.geometry, fine);
      out.error_estimate = err;
      out.step = (t - s) / (2 * steps);
      out.halvings = halving;
      break;
    }
    coarse = std::move(fine);
    steps *= 2;
  }

  // Growth exponent from the sup norm on the finest integration grid.
  const int n = 2 * steps;
  std::vector<double> sup2(static_cast<std::size_t>(n + 1));
  for (int i = 0; i <= n; ++i) {
    const double tau = i == n ? t : s + i * (t - s) / n;
    sup2[static_cast<std::size_t>(i)] = fields.at(tau).cwiseAbs2().maxCoeff();
  }
  double integral = 0.0;
  for (int i = 0; i < n; ++i) integral += 0.5 * (sup2[static_cast<std::size_t>(i)] + sup2[static_cast<std::size_t>(i + 1)]);
  integral *= (t - s) / n;
  out.growth_ratio = f2 > 0.0 ? out.u.values().squaredNorm() / (f2 * std::exp(2.0 * std::abs(traj.lambda) * integral)) : 0.0;
  return out;
}

}  // namespace bec
