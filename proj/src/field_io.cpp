#include "bec/field_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>

#include "bec/errors.hpp"

namespace bec {
namespace {

std::uint64_t to_le(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  std::uint64_t r = 0;
  for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
  return r;
}

void put_double(std::ostream& os, double d) {
  const std::uint64_t bits = to_le(std::bit_cast<std::uint64_t>(d));
  os.write(reinterpret_cast<const char*>(&bits), sizeof bits);
}

double get_double(std::istream& is) {
  std::uint64_t bits = 0;
  is.read(reinterpret_cast<char*>(&bits), sizeof bits);
  return std::bit_cast<double>(to_le(bits));
}

}  // namespace

void write_complex_blob(const std::filesystem::path& path, nlohmann::json header,
                        std::span<const cplx> values) {
  header["count"] = values.size();
  header["encoding"] = "f64le-complex";
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  os << header.dump() << '\n';
  for (const cplx& z : values) {
    put_double(os, z.real());
    put_double(os, z.imag());
  }
}

ComplexBlob read_complex_blob(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open " + path.string());
  std::string line;
  std::getline(is, line);
  ComplexBlob blob;
  blob.header = nlohmann::json::parse(line);
  const auto n = blob.header.at("count").get<std::size_t>();
  blob.values.resize(n);
  for (auto& z : blob.values) {
    const double re = get_double(is);
    const double im = get_double(is);
    z = {re, im};
  }
  if (!is) throw Error("truncated binary payload in " + path.string());
  return blob;
}

nlohmann::json geometry_to_json(const LatticeGeometry& g) {
  return {{"d", g.dimension()}, {"L", g.extents()}, {"boundary", to_string(g.boundary())}};
}

LatticeGeometry geometry_from_json(const nlohmann::json& j) {
  auto L = j.at("L").get<std::vector<int>>();
  if (j.contains("d") && j.at("d").get<int>() != static_cast<int>(L.size()))
    throw DimensionError("geometry header: d does not match length of L");
  return LatticeGeometry(std::move(L), boundary_from_string(j.value("boundary", "periodic")));
}

void write_field(const std::filesystem::path& path, const ComplexField& f) {
  write_complex_blob(path, geometry_to_json(f.geometry()),
                     std::span<const cplx>(f.values().data(), f.size()));
}

ComplexField read_field(const std::filesystem::path& path) {
  auto blob = read_complex_blob(path);
  LatticeGeometry g = geometry_from_json(blob.header);
  if (blob.values.size() != g.site_count())
    throw DimensionError("field payload length does not match geometry");
  Eigen::VectorXcd v = Eigen::Map<Eigen::VectorXcd>(blob.values.data(),
                                                    static_cast<Eigen::Index>(blob.values.size()));
  return ComplexField(std::move(g), std::move(v));
}

void write_field_csv(const std::filesystem::path& path, const ComplexField& f) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  const auto& g = f.geometry();
  for (int a = 0; a < g.dimension(); ++a) os << 'x' << a << ',';
  os << "re,im\n" << std::setprecision(17);
  for (std::size_t i = 0; i < f.size(); ++i) {
    for (int c : g.coords(i)) os << c << ',';
    os << f[i].real() << ',' << f[i].imag() << '\n';
  }
}

}  // namespace bec
