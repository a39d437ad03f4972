#ifndef BEC_FOCK_BASIS_HPP
#define BEC_FOCK_BASIS_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace bec {

inline constexpr std::size_t kDefaultDimensionCap = 5'000'000;

/// Occupation-number basis of the N-particle sector over M modes, ordered
/// lexicographically descending: (N,0,...,0) first, (0,...,0,N) last.
/// Lookup is by combinatorial ranking, no search.
class FockBasis {
 public:
  using Occupation = std::uint16_t;

  FockBasis(int particles, int modes, std::size_t cap = kDefaultDimensionCap);

  /// C(n+m-1, n), saturating at SIZE_MAX.
  static std::size_t dimension_of(int particles, int modes);

  int particles() const { return particles_; }
  int modes() const { return modes_; }
  std::size_t dimension() const { return dimension_; }

  std::span<const Occupation> state(std::size_t i) const {
    return {occ_.data() + i * static_cast<std::size_t>(modes_), static_cast<std::size_t>(modes_)};
  }

  /// Rank of an occupation vector; nullopt if it is not in this sector.
  std::optional<std::size_t> find(std::span<const Occupation> n) const;
  std::size_t index(std::span<const Occupation> n) const;

 private:
  // Completions of p particles over s sites.
  std::size_t completions(int sites, int p) const;

  int particles_;
  int modes_;
  std::size_t dimension_;
  std::vector<Occupation> occ_;
  std::vector<std::size_t> table_;  // (sites, p) -> completions, row stride particles+1
};

}  // namespace bec

#endif  // BEC_FOCK_BASIS_HPP
