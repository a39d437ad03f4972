#include "bec/fock_basis.hpp"

#include <limits>
#include <string>

#include "bec/errors.hpp"

namespace bec {

namespace {

constexpr std::size_t kSat = std::numeric_limits<std::size_t>::max();

std::size_t sat_add(std::size_t a, std::size_t b) { return a > kSat - b ? kSat : a + b; }

}  // namespace

std::size_t FockBasis::dimension_of(int particles, int modes) {
  if (particles < 0 || modes < 1) return 0;
  // Pascal recursion on completions(s, p) keeps everything in integers.
  std::vector<std::size_t> row(static_cast<std::size_t>(particles) + 1, 1);
  for (int s = 2; s <= modes; ++s)
    for (int p = 1; p <= particles; ++p)
      row[static_cast<std::size_t>(p)] =
          sat_add(row[static_cast<std::size_t>(p)], row[static_cast<std::size_t>(p - 1)]);
  return row[static_cast<std::size_t>(particles)];
}

FockBasis::FockBasis(int particles, int modes, std::size_t cap)
    : particles_(particles), modes_(modes), dimension_(0) {
  if (particles < 0) throw DomainError("particle number must be >= 0");
  if (modes < 1) throw DomainError("mode count must be >= 1");
  if (particles > std::numeric_limits<Occupation>::max())
    throw DomainError("particle number too large for the occupation type");
  dimension_ = dimension_of(particles, modes);
  if (dimension_ > cap)
    throw ResourceError("Fock basis N=" + std::to_string(particles) + ", M=" +
                            std::to_string(modes) + " exceeds the dimension cap " +
                            std::to_string(cap),
                        dimension_);

  const std::size_t stride = static_cast<std::size_t>(particles) + 1;
  table_.assign((static_cast<std::size_t>(modes) + 1) * stride, 0);
  table_[0] = 1;  // zero sites hold only zero particles
  for (int s = 1; s <= modes; ++s)
    for (int p = 0; p <= particles; ++p) {
      std::size_t v = table_[static_cast<std::size_t>(s - 1) * stride + static_cast<std::size_t>(p)];
      if (p > 0)
        v = sat_add(v, table_[static_cast<std::size_t>(s) * stride + static_cast<std::size_t>(p - 1)]);
      table_[static_cast<std::size_t>(s) * stride + static_cast<std::size_t>(p)] = v;
    }

  const auto m = static_cast<std::size_t>(modes);
  occ_.assign(dimension_ * m, 0);
  std::vector<Occupation> cur(m, 0);
  cur[0] = static_cast<Occupation>(particles);
  for (std::size_t i = 0; i < dimension_; ++i) {
    std::copy(cur.begin(), cur.end(), occ_.begin() + static_cast<std::ptrdiff_t>(i * m));
    if (i + 1 == dimension_) break;
    // Next in descending order: move one particle from the rightmost
    // nonzero position before the last to its right neighbor, and gather
    // everything to its right there.
    std::size_t j = m - 1;
    int tail = cur[m - 1];
    cur[m - 1] = 0;
    do {
      --j;
    } while (cur[j] == 0);
    cur[j] = static_cast<Occupation>(cur[j] - 1);
    cur[j + 1] = static_cast<Occupation>(tail + 1);
  }
}

std::size_t FockBasis::completions(int sites, int p) const {
  return table_[static_cast<std::size_t>(sites) * (static_cast<std::size_t>(particles_) + 1) +
                static_cast<std::size_t>(p)];
}

std::optional<std::size_t> FockBasis::find(std::span<const Occupation> n) const {
  if (n.size() != static_cast<std::size_t>(modes_)) return std::nullopt;
  int total = 0;
  for (auto v : n) total += v;
  if (total != particles_) return std::nullopt;
  std::size_t rank = 0;
  int remaining = particles_;
  for (int j = 0; j + 1 < modes_; ++j) {
    const int nj = n[static_cast<std::size_t>(j)];
    for (int v = remaining; v > nj; --v) rank += completions(modes_ - j - 1, remaining - v);
    remaining -= nj;
  }
  return rank;
}

std::size_t FockBasis::index(std::span<const Occupation> n) const {
  auto r = find(n);
  if (!r) throw DomainError("occupation vector is not in the basis sector");
  return *r;
}

}  // namespace bec
