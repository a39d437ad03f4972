#include <cmath>

#include "bec/errors.hpp"
#include "bec/fluctuation.hpp"

namespace bec {

namespace {

constexpr double kFrameNormTolerance = 1e-10;

// a_j v for every mode j, as vectors over the (n-1)-particle basis.
std::vector<Eigen::VectorXcd> lower_all(const FockBasis& upper, const FockBasis& lower,
                                        const Eigen::VectorXcd& v) {
  const int m = upper.modes();
  std::vector<Eigen::VectorXcd> out(static_cast<std::size_t>(m),
                                    Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(lower.dimension())));
  std::vector<FockBasis::Occupation> work(static_cast<std::size_t>(m));
  for (std::size_t i = 0; i < upper.dimension(); ++i) {
    const cplx c = v[static_cast<Eigen::Index>(i)];
    if (c == cplx(0.0)) continue;
    const auto n = upper.state(i);
    std::copy(n.begin(), n.end(), work.begin());
    for (int j = 0; j < m; ++j) {
      const auto nj = n[static_cast<std::size_t>(j)];
      if (nj == 0) continue;
      work[static_cast<std::size_t>(j)] = static_cast<FockBasis::Occupation>(nj - 1);
      out[static_cast<std::size_t>(j)][static_cast<Eigen::Index>(lower.index(work))] +=
          std::sqrt(static_cast<double>(nj)) * c;
      work[static_cast<std::size_t>(j)] = nj;
    }
  }
  return out;
}

}  // namespace

CondensateFrame::CondensateFrame(const ComplexField& phi) : phi_(phi) {
  const Eigen::Index m = static_cast<Eigen::Index>(phi.size());
  const double norm = phi.norm2();
  if (norm == 0.0) {
    degenerate_ = true;
    rotation_ = Eigen::MatrixXcd::Identity(m, m);
    perp_ = rotation_;
    return;
  }
  if (std::abs(norm - 1.0) > kFrameNormTolerance)
    throw DomainError("condensate must be normalized or identically zero");

  Eigen::Index pivot = 0;
  phi.values().cwiseAbs().maxCoeff(&pivot);
  rotation_.resize(m, m);
  rotation_.col(0) = phi.values();
  Eigen::Index col = 1;
  for (Eigen::Index x = 0; x < m; ++x) {
    if (x == pivot) continue;
    Eigen::VectorXcd v = Eigen::VectorXcd::Unit(m, x);
    for (int pass = 0; pass < 2; ++pass)
      for (Eigen::Index k = 0; k < col; ++k) v -= rotation_.col(k) * rotation_.col(k).dot(v);
    const double nv = v.norm();
    if (nv < 1e-8) throw ConsistencyError("frame completion lost rank");
    rotation_.col(col++) = v / nv;
  }
  perp_ = rotation_.rightCols(m - 1);
}

Eigen::MatrixXcd CondensateFrame::projector() const {
  const Eigen::Index m = static_cast<Eigen::Index>(phi_.size());
  if (degenerate_) return Eigen::MatrixXcd::Identity(m, m);
  return Eigen::MatrixXcd::Identity(m, m) - phi_.values() * phi_.values().adjoint();
}

Eigen::VectorXcd CondensateFrame::project(const Eigen::VectorXcd& f) const {
  if (degenerate_) return f;
  return f - phi_.values() * phi_.values().dot(f);
}

Eigen::VectorXcd CondensateFrame::excitation_coordinates(const Eigen::VectorXcd& f) const {
  return perp_.adjoint() * f;
}

TruncatedFockSpace::TruncatedFockSpace(int particles, int modes, std::size_t cap)
    : particles_(particles), modes_(modes) {
  if (particles < 0 || modes < 1) throw DomainError("truncated Fock space needs N >= 0 and K >= 1");
  for (int j = 0; j <= particles; ++j) {
    offsets_.push_back(dimension_);
    sectors_.push_back(std::make_unique<FockBasis>(j, modes, cap));
    dimension_ += sectors_.back()->dimension();
    if (dimension_ > cap) throw ResourceError("truncated Fock space exceeds the dimension cap", dimension_);
  }
  number_.resize(static_cast<Eigen::Index>(dimension_));
  for (int j = 0; j <= particles; ++j)
    number_.segment(static_cast<Eigen::Index>(offset(j)), static_cast<Eigen::Index>(sector(j).dimension()))
        .setConstant(j);

  std::vector<std::vector<Eigen::Triplet<cplx>>> trips(static_cast<std::size_t>(modes));
  std::vector<FockBasis::Occupation> work(static_cast<std::size_t>(modes));
  for (int j = 1; j <= particles; ++j) {
    const FockBasis& up = sector(j);
    const FockBasis& down = sector(j - 1);
    for (std::size_t i = 0; i < up.dimension(); ++i) {
      const auto n = up.state(i);
      std::copy(n.begin(), n.end(), work.begin());
      for (int k = 0; k < modes; ++k) {
        const auto nk = n[static_cast<std::size_t>(k)];
        if (nk == 0) continue;
        work[static_cast<std::size_t>(k)] = static_cast<FockBasis::Occupation>(nk - 1);
        trips[static_cast<std::size_t>(k)].emplace_back(
            static_cast<int>(offset(j - 1) + down.index(work)), static_cast<int>(offset(j) + i),
            std::sqrt(static_cast<double>(nk)));
        work[static_cast<std::size_t>(k)] = nk;
      }
    }
  }
  const auto dim = static_cast<Eigen::Index>(dimension_);
  for (int k = 0; k < modes; ++k) {
    SparseMatrixC a(dim, dim);
    a.setFromTriplets(trips[static_cast<std::size_t>(k)].begin(), trips[static_cast<std::size_t>(k)].end());
    annihilators_.push_back(std::move(a));
  }
}

int TruncatedFockSpace::sector_of(std::size_t index) const {
  if (index >= dimension_) throw DomainError("index outside the truncated Fock space");
  int j = particles_;
  while (offsets_[static_cast<std::size_t>(j)] > index) --j;
  return j;
}

SparseMatrixC TruncatedFockSpace::second_quantize(const Eigen::MatrixXcd& kernel) const {
  if (kernel.rows() != modes_ || kernel.cols() != modes_)
    throw DimensionError("kernel does not match the number of excitation modes");
  std::vector<Eigen::Triplet<cplx>> trips;
  for (int j = 1; j <= particles_; ++j) {
    const SparseMatrixC block = bec::second_quantize(sector(j), kernel);
    const int off = static_cast<int>(offset(j));
    for (Eigen::Index r = 0; r < block.outerSize(); ++r)
      for (SparseMatrixC::InnerIterator it(block, r); it; ++it)
        trips.emplace_back(off + static_cast<int>(it.row()), off + static_cast<int>(it.col()), it.value());
  }
  const auto dim = static_cast<Eigen::Index>(dimension_);
  SparseMatrixC out(dim, dim);
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

Eigen::VectorXcd ExcitationVector::sector_coefficients(int j) const {
  return coefficients.segment(static_cast<Eigen::Index>(space->offset(j)),
                              static_cast<Eigen::Index>(space->sector(j).dimension()));
}

std::vector<double> ExcitationVector::sector_weights() const {
  std::vector<double> w;
  for (int j = 0; j <= particles(); ++j) w.push_back(sector_coefficients(j).squaredNorm());
  return w;
}

// <m|chi> = <Omega| prod_k d_k^{m_k} chi> / sqrt(prod m_k!). The products are
// built one annihilator at a time, level p holding one vector over the
// (N-p)-particle basis per partial occupation with p quanta removed.
Eigen::VectorXcd change_mode_basis(const FockBasis& basis, const Eigen::VectorXcd& coefficients,
                                   const Eigen::MatrixXcd& b) {
  const int n = basis.particles();
  const int m = basis.modes();
  if (b.rows() != m || b.cols() != m) throw DimensionError("mode transformation has the wrong size");
  if (static_cast<std::size_t>(coefficients.size()) != basis.dimension())
    throw DimensionError("coefficients do not match the basis");
  if (n == 0) return coefficients;

  const std::size_t cap = std::numeric_limits<std::size_t>::max();
  std::vector<Eigen::VectorXcd> level{coefficients};
  std::unique_ptr<FockBasis> removed = std::make_unique<FockBasis>(0, m, cap);
  for (int p = 0; p < n; ++p) {
    const FockBasis upper(n - p, m, cap);
    const FockBasis lower(n - p - 1, m, cap);
    auto next_removed = std::make_unique<FockBasis>(p + 1, m, cap);
    std::vector<Eigen::VectorXcd> next(next_removed->dimension());
    std::vector<FockBasis::Occupation> work(static_cast<std::size_t>(m));
    for (std::size_t parent = 0; parent < removed->dimension(); ++parent) {
      const auto occ = removed->state(parent);
      // Children add a quantum at k no later than the parent's first occupied mode,
      // so each child has a unique parent.
      int first = m - 1;
      for (int k = 0; k < m; ++k)
        if (occ[static_cast<std::size_t>(k)] > 0) {
          first = k;
          break;
        }
      const auto lowered = lower_all(upper, lower, level[parent]);
      for (int k = 0; k <= first; ++k) {
        std::copy(occ.begin(), occ.end(), work.begin());
        ++work[static_cast<std::size_t>(k)];
        Eigen::VectorXcd v = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(lower.dimension()));
        for (int j = 0; j < m; ++j) {
          const cplx w = std::conj(b(j, k));
          if (w != cplx(0.0)) v += w * lowered[static_cast<std::size_t>(j)];
        }
        next[next_removed->index(work)] = std::move(v);
      }
    }
    level = std::move(next);
    removed = std::move(next_removed);
  }

  Eigen::VectorXcd out(static_cast<Eigen::Index>(basis.dimension()));
  for (std::size_t i = 0; i < basis.dimension(); ++i) {
    double log_fact = 0.0;
    for (auto v : basis.state(i)) log_fact += std::lgamma(v + 1.0);
    out[static_cast<Eigen::Index>(i)] = level[removed->index(basis.state(i))][0] * std::exp(-0.5 * log_fact);
  }
  return out;
}

ExcitationVector excitation_decompose(const ManyBodyState& psi, FramePtr frame, SpacePtr space) {
  if (!frame) throw DomainError("excitation map needs a frame");
  if (psi.modes() != frame->sites()) throw DimensionError("state and frame have different lattices");
  const int n = psi.particles();
  const int k = frame->excitation_modes();
  if (!space) space = std::make_shared<const TruncatedFockSpace>(n, k);
  if (space->particles() != n || space->modes() != k)
    throw DimensionError("truncated space does not match the state and frame");

  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(space->dimension()));
  if (frame->degenerate()) {
    // Every site is an excitation mode: the state lies in the top sector as is.
    out.segment(static_cast<Eigen::Index>(space->offset(n)), psi.coefficients.size()) = psi.coefficients;
    return ExcitationVector{std::move(frame), std::move(space), std::move(out)};
  }
  const Eigen::VectorXcd rotated = change_mode_basis(*psi.basis, psi.coefficients, frame->rotation());
  for (std::size_t i = 0; i < psi.basis->dimension(); ++i) {
    const auto occ = psi.basis->state(i);
    const int j = n - occ[0];
    const std::size_t idx = space->sector(j).index(occ.subspan(1));
    out[static_cast<Eigen::Index>(space->offset(j) + idx)] = rotated[static_cast<Eigen::Index>(i)];
  }
  return ExcitationVector{std::move(frame), std::move(space), std::move(out)};
}

ExcitationVector excitation_decompose(const ManyBodyState& psi, const ComplexField& phi) {
  return excitation_decompose(psi, std::make_shared<const CondensateFrame>(phi));
}

ManyBodyState excitation_reconstruct(const ExcitationVector& xi, BasisPtr basis) {
  const int n = xi.particles();
  const int m = xi.frame->sites();
  if (!basis) basis = build_basis(n, m);
  if (basis->particles() != n || basis->modes() != m)
    throw DimensionError("basis does not match the excitation vector");
  const auto& space = *xi.space;
  if (xi.frame->degenerate()) {
    for (int j = 0; j < n; ++j)
      if (xi.sector_coefficients(j).norm() != 0.0)
        throw DomainError("degenerate frame: only the top sector maps back to N particles");
    return ManyBodyState(basis, xi.sector_coefficients(n));
  }
  Eigen::VectorXcd rotated(static_cast<Eigen::Index>(basis->dimension()));
  for (std::size_t i = 0; i < basis->dimension(); ++i) {
    const auto occ = basis->state(i);
    const int j = n - occ[0];
    rotated[static_cast<Eigen::Index>(i)] =
        xi.coefficients[static_cast<Eigen::Index>(space.offset(j) + space.sector(j).index(occ.subspan(1)))];
  }
  Eigen::VectorXcd sites = change_mode_basis(*basis, rotated, xi.frame->rotation().adjoint());
  return ManyBodyState(std::move(basis), std::move(sites));
}

}  // namespace bec
