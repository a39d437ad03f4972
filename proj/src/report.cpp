#include "bec/report.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "bec/errors.hpp"

namespace bec {

using nlohmann::json;

namespace {

constexpr const char* kSurrogateLabel =
    "finite-size surrogate: desk-scale property check of an asymptotic statement";

std::string format_double(double x) {
  std::ostringstream os;
  os << std::setprecision(6) << x;
  return os.str();
}

std::string cell(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

}  // namespace

json json_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

double number_from_json(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  throw ConsistencyError("not a number in report: " + j.dump());
}

ReportBuilder::ReportBuilder(std::string experiment, json config)
    : experiment_(std::move(experiment)), config_(std::move(config)) {}

void ReportBuilder::metric(const std::string& key, json value) { metrics_[key] = std::move(value); }

bool ReportBuilder::verdict(const std::string& name, double value, const std::string& comparison, double threshold,
                            const std::string& note, double upper) {
  bool pass = false;
  if (comparison == "<=") pass = value <= threshold;
  else if (comparison == "<") pass = value < threshold;
  else if (comparison == ">=") pass = value >= threshold;
  else if (comparison == ">") pass = value > threshold;
  else if (comparison == "in") pass = value >= threshold && value <= upper;
  else throw UsageError("unknown verdict comparison " + comparison);
  json v = {{"name", name},
            {"pass", pass},
            {"value", json_number(value)},
            {"comparison", comparison},
            {"threshold", json_number(threshold)}};
  if (comparison == "in") v["upper"] = json_number(upper);
  if (!note.empty()) v["note"] = note;
  verdicts_.push_back(std::move(v));
  return pass;
}

void ReportBuilder::verdict_flag(const std::string& name, bool pass, const std::string& note) {
  verdicts_.push_back({{"name", name}, {"pass", pass}, {"comparison", "flag"}, {"note", note}});
}

void ReportBuilder::series(const std::string& name, std::vector<std::string> columns,
                           const std::vector<std::vector<double>>& rows) {
  json data = json::array();
  for (const auto& row : rows) {
    if (row.size() != columns.size()) throw DimensionError("series row width differs from its columns");
    json r = json::array();
    for (double x : row) r.push_back(json_number(x));
    data.push_back(std::move(r));
  }
  series_[name] = {{"columns", std::move(columns)}, {"csv", name + ".csv"}, {"rows", std::move(data)}};
}

void ReportBuilder::control(const std::string& name, json body) {
  body["asserted"] = false;
  controls_[name] = std::move(body);
}

void ReportBuilder::note(const std::string& text) { notes_.push_back(text); }

bool ReportBuilder::passed() const {
  for (const auto& v : verdicts_)
    if (!v.at("pass").get<bool>()) return false;
  return true;
}

json ReportBuilder::finish(double runtime_seconds) const {
  json failing = json::array();
  for (const auto& v : verdicts_)
    if (!v.at("pass").get<bool>()) failing.push_back(v.at("name"));
  json r;
  r["schema_version"] = kReportSchemaVersion;
  r["experiment"] = experiment_;
  r["label"] = kSurrogateLabel;
  r["config"] = config_;
  r["metrics"] = metrics_;
  r["verdicts"] = verdicts_;
  r["pass"] = failing.empty();
  r["failing"] = failing;
  r["series"] = series_;
  r["controls"] = controls_;
  r["notes"] = notes_;
  r["provenance"] = {{"program", "bec"},
                     {"version", "1.0.0"},
                     {"compiler", __VERSION__},
                     {"runtime_seconds", runtime_seconds}};
  return r;
}

void write_report(const json& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "report.json");
    if (!out) throw UsageError("cannot write " + (dir / "report.json").string());
    out << report.dump(2) << '\n';
  }
  for (const auto& [name, s] : report.at("series").items()) {
    std::ofstream out(dir / s.at("csv").get<std::string>());
    if (!out) throw UsageError("cannot write CSV for series " + name);
    const auto& cols = s.at("columns");
    for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i].get<std::string>();
    out << '\n';
    for (const auto& row : s.at("rows")) {
      for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << cell(number_from_json(row[i]));
      out << '\n';
    }
  }
}

json read_report(const std::filesystem::path& dir) {
  const auto path = std::filesystem::is_directory(dir) ? dir / "report.json" : dir;
  std::ifstream in(path);
  if (!in) throw UsageError("no report at " + path.string());
  json r;
  try {
    in >> r;
  } catch (const json::exception& e) {
    throw UsageError(path.string() + ": malformed report: " + e.what());
  }
  if (!r.contains("schema_version") || r.at("schema_version") != kReportSchemaVersion)
    throw UsageError(path.string() + ": unsupported schema_version");
  return r;
}

bool report_passed(const json& report) { return report.at("pass").get<bool>(); }

std::vector<std::string> failing_verdicts(const json& report) {
  std::vector<std::string> out;
  for (const auto& v : report.at("verdicts"))
    if (!v.at("pass").get<bool>()) out.push_back(v.at("name").get<std::string>());
  return out;
}

std::string format_report(const json& report) {
  std::ostringstream os;
  os << "experiment: " << report.at("experiment").get<std::string>() << '\n';
  os << "(" << report.at("label").get<std::string>() << ")\n";
  for (const auto& v : report.at("verdicts")) {
    os << (v.at("pass").get<bool>() ? "  PASS  " : "  FAIL  ") << v.at("name").get<std::string>();
    const auto cmp = v.at("comparison").get<std::string>();
    if (cmp != "flag") {
      os << "  value=" << format_double(number_from_json(v.at("value")));
      if (cmp == "in")
        os << " in [" << format_double(number_from_json(v.at("threshold"))) << ", "
           << format_double(number_from_json(v.at("upper"))) << "]";
      else
        os << ' ' << cmp << ' ' << format_double(number_from_json(v.at("threshold")));
    }
    if (v.contains("note")) os << "  (" << v.at("note").get<std::string>() << ")";
    os << '\n';
  }
  for (const auto& [name, c] : report.at("controls").items()) {
    os << "  control " << name;
    if (c.contains("flag")) os << ": " << c.at("flag").get<std::string>();
    os << '\n';
  }
  os << (report_passed(report) ? "overall: PASS" : "overall: FAIL");
  const auto failing = failing_verdicts(report);
  for (std::size_t i = 0; i < failing.size(); ++i) os << (i ? ", " : " (failing: ") << failing[i];
  if (!failing.empty()) os << ')';
  os << '\n';
  return os.str();
}

}  // namespace bec
