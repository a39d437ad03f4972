#include "bec/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "bec/errors.hpp"

namespace bec {

std::string to_string(Boundary b) { return b == Boundary::periodic ? "periodic" : "open"; }

Boundary boundary_from_string(const std::string& s) {
  if (s == "periodic") return Boundary::periodic;
  if (s == "open") return Boundary::open;
  throw DomainError("unknown boundary '" + s + "'");
}

LatticeGeometry::LatticeGeometry(std::vector<int> extents, Boundary boundary)
    : extents_(std::move(extents)), boundary_(boundary), site_count_(1) {
  if (extents_.empty()) throw DomainError("lattice dimension must be positive");
  strides_.assign(extents_.size(), 1);
  for (int e : extents_)
    if (e <= 0) throw DomainError("lattice extents must be positive");
  for (std::size_t a = extents_.size(); a-- > 0;) {
    strides_[a] = site_count_;
    site_count_ *= static_cast<std::size_t>(extents_[a]);
  }
}

int LatticeGeometry::min_extent() const {
  return *std::min_element(extents_.begin(), extents_.end());
}

Coords LatticeGeometry::coords(std::size_t index) const {
  Coords c(extents_.size());
  for (std::size_t a = 0; a < extents_.size(); ++a) {
    const auto i = static_cast<int>((index / strides_[a]) % static_cast<std::size_t>(extents_[a]));
    c[a] = i - extents_[a] / 2;
  }
  return c;
}

std::optional<std::size_t> LatticeGeometry::index(const Coords& c) const {
  if (c.size() != extents_.size()) throw DimensionError("coordinate rank mismatch");
  std::size_t idx = 0;
  for (std::size_t a = 0; a < extents_.size(); ++a) {
    int i = c[a] + extents_[a] / 2;
    if (boundary_ == Boundary::periodic) {
      i %= extents_[a];
      if (i < 0) i += extents_[a];
    } else if (i < 0 || i >= extents_[a]) {
      return std::nullopt;
    }
    idx += static_cast<std::size_t>(i) * strides_[a];
  }
  return idx;
}

std::size_t LatticeGeometry::origin() const {
  return *index(Coords(extents_.size(), 0));
}

std::vector<std::size_t> LatticeGeometry::neighbors(std::size_t index) const {
  std::vector<std::size_t> out;
  out.reserve(2 * extents_.size());
  for (std::size_t a = 0; a < extents_.size(); ++a) {
    const auto L = static_cast<std::size_t>(extents_[a]);
    const std::size_t i = (index / strides_[a]) % L;
    const std::size_t base = index - i * strides_[a];
    if (boundary_ == Boundary::periodic) {
      out.push_back(base + ((i + 1) % L) * strides_[a]);
      out.push_back(base + ((i + L - 1) % L) * strides_[a]);
    } else {
      if (i + 1 < L) out.push_back(base + (i + 1) * strides_[a]);
      if (i > 0) out.push_back(base + (i - 1) * strides_[a]);
    }
  }
  return out;
}

double LatticeGeometry::distance(std::size_t a, std::size_t b) const {
  double s = 0.0;
  for (std::size_t ax = 0; ax < extents_.size(); ++ax) {
    const auto L = static_cast<long>(extents_[ax]);
    const long ia = static_cast<long>((a / strides_[ax]) % static_cast<std::size_t>(L));
    const long ib = static_cast<long>((b / strides_[ax]) % static_cast<std::size_t>(L));
    long d = std::labs(ia - ib);
    if (boundary_ == Boundary::periodic) d = std::min(d, L - d);
    s += static_cast<double>(d * d);
  }
  return std::sqrt(s);
}

double LatticeGeometry::wrap_time() const {
  return static_cast<double>(min_extent()) / (2.0 * kappa(dimension()));
}

ComplexField::ComplexField(LatticeGeometry g)
    : geometry_(std::move(g)),
      values_(Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(geometry_.site_count()))) {}

ComplexField::ComplexField(LatticeGeometry g, Eigen::VectorXcd values)
    : geometry_(std::move(g)), values_(std::move(values)) {
  if (static_cast<std::size_t>(values_.size()) != geometry_.site_count())
    throw DimensionError("field length " + std::to_string(values_.size()) +
                         " does not match site count " + std::to_string(geometry_.site_count()));
}

ComplexField ComplexField::delta(const LatticeGeometry& g, std::size_t site) {
  ComplexField f(g);
  f[site] = 1.0;
  return f;
}

ComplexField ComplexField::plane_wave(const LatticeGeometry& g, const std::vector<int>& mode) {
  if (mode.size() != static_cast<std::size_t>(g.dimension()))
    throw DimensionError("plane wave mode rank mismatch");
  ComplexField f(g);
  const double amp = 1.0 / std::sqrt(static_cast<double>(g.site_count()));
  for (std::size_t i = 0; i < g.site_count(); ++i) {
    const Coords c = g.coords(i);
    double phase = 0.0;
    for (std::size_t a = 0; a < c.size(); ++a)
      phase += 2.0 * std::numbers::pi * mode[a] * c[a] / g.extents()[a];
    f[i] = std::polar(amp, phase);
  }
  return f;
}

RegionMask::RegionMask(LatticeGeometry g, bool fill)
    : geometry_(std::move(g)), member_(geometry_.site_count(), fill ? 1 : 0) {}

std::size_t RegionMask::count() const {
  return static_cast<std::size_t>(std::count(member_.begin(), member_.end(), 1));
}

std::vector<std::size_t> RegionMask::sites() const {
  std::vector<std::size_t> s;
  for (std::size_t i = 0; i < member_.size(); ++i)
    if (member_[i]) s.push_back(i);
  return s;
}

RegionMask RegionMask::complement() const {
  RegionMask c(geometry_);
  for (std::size_t i = 0; i < member_.size(); ++i) c.member_[i] = member_[i] ? 0 : 1;
  return c;
}

bool RegionMask::subset_of(const RegionMask& o) const {
  if (geometry_ != o.geometry_) throw DimensionError("mask geometry mismatch");
  for (std::size_t i = 0; i < member_.size(); ++i)
    if (member_[i] && !o.member_[i]) return false;
  return true;
}

ComplexField apply_laplacian(const ComplexField& f) {
  const LatticeGeometry& g = f.geometry();
  ComplexField out(g);
  for (std::size_t x = 0; x < g.site_count(); ++x) {
    const auto nb = g.neighbors(x);
    cplx acc = static_cast<double>(nb.size()) * f[x];
    for (std::size_t y : nb) acc -= f[y];
    out[x] = acc;
  }
  return out;
}

Eigen::MatrixXd laplacian_matrix(const LatticeGeometry& g) {
  const auto M = static_cast<Eigen::Index>(g.site_count());
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(M, M);
  for (std::size_t x = 0; x < g.site_count(); ++x) {
    const auto nb = g.neighbors(x);
    const auto ix = static_cast<Eigen::Index>(x);
    L(ix, ix) += static_cast<double>(nb.size());
    for (std::size_t y : nb) L(ix, static_cast<Eigen::Index>(y)) -= 1.0;
  }
  return L;
}

double dispersion_omega(const LatticeGeometry& g, const std::vector<double>& k) {
  if (g.boundary() != Boundary::periodic)
    throw UnsupportedError("dispersion relation requires a periodic box");
  if (k.size() != static_cast<std::size_t>(g.dimension()))
    throw DimensionError("wavevector rank mismatch");
  double w = 0.0;
  for (std::size_t a = 0; a < k.size(); ++a) {
    const double L = g.extents()[a];
    const double m = k[a] * L / (2.0 * std::numbers::pi);
    if (std::abs(m - std::round(m)) > 1e-9)
      throw DomainError("wavevector component is not on the reciprocal grid");
    w += 2.0 * (1.0 - std::cos(k[a]));
  }
  return w;
}

RegionMask ball_mask(const LatticeGeometry& g, double r, const Coords& center) {
  if (r < 0) throw DomainError("ball radius must be nonnegative");
  const auto c = g.index(center);
  if (!c) throw DomainError("ball center outside the box");
  RegionMask m(g);
  for (std::size_t x = 0; x < g.site_count(); ++x)
    if (g.distance(x, *c) <= r + 1e-12) m.set(x);
  return m;
}

RegionMask ball_mask(const LatticeGeometry& g, double r) {
  return ball_mask(g, r, Coords(static_cast<std::size_t>(g.dimension()), 0));
}

RegionMask enlarge(const RegionMask& y, double rho) {
  if (rho < 0) throw DomainError("enlargement radius must be nonnegative");
  const LatticeGeometry& g = y.geometry();
  const auto ys = y.sites();
  RegionMask out(g);
  for (std::size_t x = 0; x < g.site_count(); ++x) {
    for (std::size_t s : ys) {
      if (g.distance(x, s) <= rho + 1e-12) {
        out.set(x);
        break;
      }
    }
  }
  return out;
}

double lp_norm(const ComplexField& f, double p, const RegionMask* mask) {
  if (!(p >= 1.0)) throw DomainError("lp_norm requires p >= 1");
  if (mask && mask->geometry() != f.geometry()) throw DimensionError("mask geometry mismatch");
  const bool inf = std::isinf(p);
  double acc = 0.0;
  for (std::size_t x = 0; x < f.size(); ++x) {
    if (mask && !mask->contains(x)) continue;
    const double a = std::abs(f[x]);
    if (inf) {
      acc = std::max(acc, a);
    } else if (p == 2.0) {
      acc += a * a;
    } else {
      acc += std::pow(a, p);
    }
  }
  if (inf) return acc;
  return p == 2.0 ? std::sqrt(acc) : std::pow(acc, 1.0 / p);
}

double kappa(int dimension) {
  if (dimension < 1) throw DomainError("dimension must be positive");
  return 2.0 * dimension;
}

double kappa_numeric(const LatticeGeometry& g) {
  double sup = 0.0;
  for (std::size_t x = 0; x < g.site_count(); ++x) {
    double s = 0.0;
    for (std::size_t y : g.neighbors(x)) s += g.distance(x, y);
    sup = std::max(sup, s);
  }
  return sup;
}

cplx inner(const ComplexField& a, const ComplexField& b) {
  if (a.geometry() != b.geometry()) throw DimensionError("inner product geometry mismatch");
  return a.values().dot(b.values());
}

}  // namespace bec
