#ifndef BEC_FIELD_IO_HPP
#define BEC_FIELD_IO_HPP

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "bec/lattice.hpp"

namespace bec {

/// A one-line JSON header, a newline, then count complex values as
/// little-endian (re, im) float64 pairs.
void write_complex_blob(const std::filesystem::path& path, nlohmann::json header,
                        std::span<const cplx> values);

struct ComplexBlob {
  nlohmann::json header;
  std::vector<cplx> values;
};

ComplexBlob read_complex_blob(const std::filesystem::path& path);

nlohmann::json geometry_to_json(const LatticeGeometry& g);
LatticeGeometry geometry_from_json(const nlohmann::json& j);

void write_field(const std::filesystem::path& path, const ComplexField& f);
ComplexField read_field(const std::filesystem::path& path);

/// Columns x0..x{d-1}, re, im; one row per site in index order.
void write_field_csv(const std::filesystem::path& path, const ComplexField& f);

}  // namespace bec

#endif  // BEC_FIELD_IO_HPP
