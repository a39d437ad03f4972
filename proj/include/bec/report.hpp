#ifndef BEC_REPORT_HPP
#define BEC_REPORT_HPP

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace bec {

inline constexpr int kReportSchemaVersion = 1;

/// JSON number, or the strings "inf", "-inf", "nan" for non-finite values.
nlohmann::json json_number(double x);
/// Inverse of json_number.
double number_from_json(const nlohmann::json& j);

/// Accumulates the contents of one experiment report. Series are stored
/// inline and mirrored to CSV files when the report is written.
class ReportBuilder {
 public:
  ReportBuilder(std::string experiment, nlohmann::json config);

  void metric(const std::string& key, nlohmann::json value);
  void metric(const std::string& key, double value) { metric(key, json_number(value)); }

  /// comparison is one of "<=", ">=", "<", ">", "in"; for "in" the value
  /// must lie in [threshold, upper].
  bool verdict(const std::string& name, double value, const std::string& comparison, double threshold,
               const std::string& note = "", double upper = 0.0);
  /// A verdict decided elsewhere (for example a count of violations).
  void verdict_flag(const std::string& name, bool pass, const std::string& note);

  void series(const std::string& name, std::vector<std::string> columns,
              const std::vector<std::vector<double>>& rows);

  /// Control runs carry diagnostics only and never contribute verdicts.
  void control(const std::string& name, nlohmann::json body);

  void note(const std::string& text);

  bool passed() const;
  nlohmann::json finish(double runtime_seconds) const;

 private:
  std::string experiment_;
  nlohmann::json config_;
  nlohmann::json metrics_ = nlohmann::json::object();
  nlohmann::json verdicts_ = nlohmann::json::array();
  nlohmann::json series_ = nlohmann::json::object();
  nlohmann::json controls_ = nlohmann::json::object();
  nlohmann::json notes_ = nlohmann::json::array();
};

/// report.json plus one <series>.csv per series.
void write_report(const nlohmann::json& report, const std::filesystem::path& dir);
nlohmann::json read_report(const std::filesystem::path& dir);

bool report_passed(const nlohmann::json& report);
std::vector<std::string> failing_verdicts(const nlohmann::json& report);

/// Human-readable verdict table.
std::string format_report(const nlohmann::json& report);

}  // namespace bec

#endif  // BEC_REPORT_HPP
