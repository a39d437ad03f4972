#ifndef BEC_LATTICE_HPP
#define BEC_LATTICE_HPP

#include <complex>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace bec {

using cplx = std::complex<double>;
using Coords = std::vector<int>;

enum class Boundary { periodic, open };

std::string to_string(Boundary b);
Boundary boundary_from_string(const std::string& s);

/// Hypercubic box with centered coordinates in [-floor(L/2), ceil(L/2)) per
/// axis. Sites are numbered row-major with axis 0 slowest.
class LatticeGeometry {
 public:
  LatticeGeometry(std::vector<int> extents, Boundary boundary);

  static LatticeGeometry chain(int length, Boundary b = Boundary::periodic) {
    return LatticeGeometry({length}, b);
  }
  static LatticeGeometry cube(int dim, int length, Boundary b = Boundary::periodic) {
    return LatticeGeometry(std::vector<int>(static_cast<std::size_t>(dim), length), b);
  }

  int dimension() const { return static_cast<int>(extents_.size()); }
  const std::vector<int>& extents() const { return extents_; }
  Boundary boundary() const { return boundary_; }
  std::size_t site_count() const { return site_count_; }
  int min_extent() const;

  Coords coords(std::size_t index) const;
  /// Index of a site; periodic boxes wrap, open boxes return nullopt outside.
  std::optional<std::size_t> index(const Coords& c) const;
  std::size_t origin() const;

  /// Neighbor list with multiplicity (an L=2 periodic axis lists the same
  /// site twice).
  std::vector<std::size_t> neighbors(std::size_t index) const;

  /// Euclidean distance, minimum over periodic images.
  double distance(std::size_t a, std::size_t b) const;
  double norm(std::size_t index) const { return distance(index, origin()); }

  /// Time after which a signal moving at speed 2d could wrap around the box.
  double wrap_time() const;

  bool operator==(const LatticeGeometry& o) const {
    return extents_ == o.extents_ && boundary_ == o.boundary_;
  }
  bool operator!=(const LatticeGeometry& o) const { return !(*this == o); }

 private:
  std::vector<int> extents_;
  std::vector<std::size_t> strides_;
  Boundary boundary_;
  std::size_t site_count_;
};

/// One complex amplitude per lattice site.
class ComplexField {
 public:
  explicit ComplexField(LatticeGeometry g);
  ComplexField(LatticeGeometry g, Eigen::VectorXcd values);

  static ComplexField delta(const LatticeGeometry& g, std::size_t site);
  static ComplexField plane_wave(const LatticeGeometry& g, const std::vector<int>& mode);

  const LatticeGeometry& geometry() const { return geometry_; }
  std::size_t size() const { return static_cast<std::size_t>(values_.size()); }
  const Eigen::VectorXcd& values() const { return values_; }
  Eigen::VectorXcd& values() { return values_; }
  cplx operator[](std::size_t i) const { return values_[static_cast<Eigen::Index>(i)]; }
  cplx& operator[](std::size_t i) { return values_[static_cast<Eigen::Index>(i)]; }

  double norm2() const { return values_.norm(); }

 private:
  LatticeGeometry geometry_;
  Eigen::VectorXcd values_;
};

class RegionMask {
 public:
  explicit RegionMask(LatticeGeometry g, bool fill = false);

  const LatticeGeometry& geometry() const { return geometry_; }
  bool contains(std::size_t i) const { return member_[i] != 0; }
  void set(std::size_t i, bool v = true) { member_[i] = v ? 1 : 0; }
  std::size_t count() const;
  std::vector<std::size_t> sites() const;
  RegionMask complement() const;
  bool subset_of(const RegionMask& o) const;

 private:
  LatticeGeometry geometry_;
  std::vector<char> member_;
};

ComplexField apply_laplacian(const ComplexField& f);

/// Dense kernel of -Delta; diagonal equals the neighbor count so rows sum to 0.
Eigen::MatrixXd laplacian_matrix(const LatticeGeometry& g);

/// 2 * sum_j (1 - cos k_j); k must lie on the reciprocal grid of a periodic box.
double dispersion_omega(const LatticeGeometry& g, const std::vector<double>& k);

RegionMask ball_mask(const LatticeGeometry& g, double r, const Coords& center);
RegionMask ball_mask(const LatticeGeometry& g, double r);

/// Y_rho: all sites within distance rho of some site of Y.
RegionMask enlarge(const RegionMask& y, double rho);

/// p = infinity is spelled std::numeric_limits<double>::infinity().
double lp_norm(const ComplexField& f, double p, const RegionMask* mask = nullptr);

double kappa(int dimension);
/// sup_x sum_y |Delta_xy| |x - y| by direct summation over the kernel.
double kappa_numeric(const LatticeGeometry& g);

cplx inner(const ComplexField& a, const ComplexField& b);

enum class FourierDirection { forward, inverse };

/// Unitary multi-dimensional DFT in site-index order.
ComplexField fourier_transform(const ComplexField& f, FourierDirection dir);

}  // namespace bec

#endif  // BEC_LATTICE_HPP
