#ifndef BEC_EXPERIMENTS_HPP
#define BEC_EXPERIMENTS_HPP

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bec/lattice.hpp"

namespace bec {

const std::vector<std::string>& experiment_kinds();

/// Defaults for every field an experiment reads.
nlohmann::json default_config(const std::string& experiment);

/// A fully defaulted, validated experiment description. Fields the user
/// did not give take the defaults of default_config.
struct ExperimentConfig {
  std::string experiment;
  nlohmann::json doc;

  unsigned seed() const;
  std::optional<std::filesystem::path> output() const;
};

/// Merges doc over the defaults of doc["experiment"] and validates it.
/// Unknown fields, wrong types and out-of-range values throw UsageError
/// naming the field path (for example "regions.rho").
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::string>& overrides = {});

/// Applies "a.b.c=value"; value is parsed as JSON when possible and kept
/// as a string otherwise.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Runs the experiment, writes report.json and CSVs when out_dir is set,
/// and returns the report.
nlohmann::json run_experiment(const ExperimentConfig& config,
                              const std::optional<std::filesystem::path>& out_dir = std::nullopt);

/// Field for an "initial" block: kind delta | gaussian | uniform | random,
/// normalized in l^2.
ComplexField initial_field(const nlohmann::json& block, const LatticeGeometry& g, unsigned seed);

LatticeGeometry geometry_from_config(const nlohmann::json& block);

}  // namespace bec

#endif  // BEC_EXPERIMENTS_HPP
