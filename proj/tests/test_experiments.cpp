#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"

#include "bec/errors.hpp"
#include "bec/experiments.hpp"
#include "bec/report.hpp"

using namespace bec;
using nlohmann::json;

namespace {

// The message of the UsageError thrown by parse_config, or "" if none.
std::string usage_message(const json& doc) {
  try {
    parse_config(doc);
  } catch (const UsageError& e) {
    return e.what();
  }
  return "";
}

json strip_runtime(json r) {
  r["provenance"].erase("runtime_seconds");
  return r;
}

const json& find_verdict(const json& report, const std::string& name) {
  for (const auto& v : report.at("verdicts"))
    if (v.at("name") == name) return v;
  FAIL("verdict " << name << " missing");
  static json none;
  return none;
}

std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("bec_test_" + name);
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("every experiment kind has defaults that validate") {
  CHECK(experiment_kinds().size() == 9);
  for (const auto& k : experiment_kinds()) {
    INFO(k);
    const auto cfg = parse_config({{"experiment", k}});
    CHECK(cfg.experiment == k);
    CHECK(cfg.doc == default_config(k));
    CHECK(cfg.seed() == 1);
    CHECK_FALSE(cfg.output().has_value());
  }
}

TEST_CASE("config errors name the offending field") {
  CHECK(usage_message({{"experiment", "nope"}}).find("experiment") != std::string::npos);
  CHECK(usage_message(json::array()).find("config") != std::string::npos);
  CHECK(usage_message({{"seed", 3}}).find("experiment") != std::string::npos);

  json unknown = {{"experiment", "ballistic-mass"}, {"regions", {{"radius", 3}}}};
  CHECK(usage_message(unknown).find("regions.radius: unknown field") != std::string::npos);

  json wrong_type = {{"experiment", "dispersive-scan"}, {"geometry", {{"length", "big"}}}};
  CHECK(usage_message(wrong_type).find("geometry.length") != std::string::npos);

  json too_far = {{"experiment", "locality-enhancement"}, {"regions", {{"rho", 11.0}}}};
  CHECK(usage_message(too_far).find("regions.rho") != std::string::npos);

  json negative = {{"experiment", "meanfield-error"}, {"schedule", {{"dt", -0.1}}}};
  CHECK(usage_message(negative).find("schedule.dt") != std::string::npos);

  json bad_scheme = {{"experiment", "strichartz"}, {"schedule", {{"scheme", "euler"}}}};
  CHECK(usage_message(bad_scheme).find("schedule.scheme") != std::string::npos);

  json wrap = {{"experiment", "dispersive-scan"},
               {"geometry", {{"length", 64}}},
               {"schedule", {{"t_final", 30.0}}},
               {"fit", {{"t_min", 2.0}, {"t_max", 30.0}}}};
  CHECK(usage_message(wrap).find("fit.t_max") != std::string::npos);

  json bad_pair = {{"experiment", "strichartz"}, {"strichartz", {{"pairs", json::array({json::array({0.5, 2})})}}}};
  CHECK(usage_message(bad_pair).find("strichartz.pairs[0]") != std::string::npos);

  json coupling = {{"experiment", "meanfield-error"}, {"physics", {{"hartree_coupling", "mixed"}}}};
  CHECK(usage_message(coupling).find("physics.hartree_coupling") != std::string::npos);
}

TEST_CASE("overrides parse JSON values and create nested keys") {
  json doc = {{"experiment", "ballistic-mass"}};
  apply_override(doc, "regions.rho=20");
  apply_override(doc, "initial.momentum=[0.5]");
  apply_override(doc, "geometry.boundary=open");
  apply_override(doc, "output=\"out dir\"");
  CHECK(doc["regions"]["rho"] == 20);
  CHECK(doc["initial"]["momentum"] == json::array({0.5}));
  CHECK(doc["geometry"]["boundary"] == "open");
  const auto cfg = parse_config(doc);
  CHECK(cfg.doc["regions"]["v"] == 4.0);
  CHECK(cfg.output().value() == "out dir");
  CHECK_THROWS_AS(apply_override(doc, "novalue"), UsageError);
  CHECK_THROWS_AS(apply_override(doc, "=3"), UsageError);
  CHECK_THROWS_AS(apply_override(doc, "regions.rho.x=1"), UsageError);
}

TEST_CASE("load_config reads files and applies overrides") {
  const auto dir = scratch_dir("load");
  std::filesystem::create_directories(dir);
  {
    std::ofstream(dir / "c.json") << R"({"experiment": "moment-bounds", "seed": 7})";
    std::ofstream(dir / "bad.json") << "{ not json";
  }
  const auto cfg = load_config(dir / "c.json", {"physics.lambda=0.25"});
  CHECK(cfg.seed() == 7);
  CHECK(cfg.doc["physics"]["lambda"] == 0.25);
  CHECK_THROWS_AS(load_config(dir / "bad.json"), UsageError);
  CHECK_THROWS_AS(load_config(dir / "missing.json"), UsageError);
}

TEST_CASE("initial fields") {
  const auto g = LatticeGeometry::chain(32);
  const json delta = {{"kind", "delta"}, {"center", json::array({-16})}};
  const auto d = initial_field(delta, g, 1);
  CHECK(std::abs(d[*g.index({-16})] - cplx(1.0)) < 1e-15);
  CHECK(d.norm2() == doctest::Approx(1.0));

  json gauss = default_config("ballistic-mass")["initial"];
  const auto f = initial_field(gauss, g, 1);
  CHECK(f.norm2() == doctest::Approx(1.0));
  for (std::size_t x = 0; x < g.site_count(); ++x)
    if (g.norm(x) > 8.0) CHECK(std::abs(f[x]) == 0.0);
  // Momentum 1 gives phase e^{i} between neighbours.
  const cplx ratio = f[*g.index({1})] / f[*g.index({0})];
  CHECK(std::arg(ratio) == doctest::Approx(1.0));

  // Wraparound: a gaussian centered at the edge is symmetric across it.
  gauss["center"] = json::array({-16});
  gauss["momentum"] = nullptr;
  const auto w = initial_field(gauss, g, 1);
  CHECK(std::abs(w[*g.index({15})]) == doctest::Approx(std::abs(w[*g.index({-15})])));

  const json rnd = {{"kind", "random"}};
  CHECK(initial_field(rnd, g, 3).values().isApprox(initial_field(rnd, g, 3).values()));
  CHECK_FALSE(initial_field(rnd, g, 3).values().isApprox(initial_field(rnd, g, 4).values()));
  CHECK_THROWS_AS(initial_field({{"kind", "delta"}, {"center", json::array({1, 2})}}, g, 1), UsageError);
}

TEST_CASE("support condition violations are domain errors") {
  json doc = {{"experiment", "locality-enhancement"}, {"initial", {{"center", json::array({4})}}}};
  CHECK_THROWS_AS(run_experiment(parse_config(doc)), DomainError);
  doc["experiment"] = "fluctuation-lightcone";
  CHECK_THROWS_AS(run_experiment(parse_config(doc)), DomainError);
  // A seeded excitation inside B_{r+rho}.
  json seeded = {{"experiment", "fluctuation-lightcone"},
                 {"initial_state", {{"kind", "seeded"}, {"site", json::array({3})}}}};
  CHECK_THROWS_AS(run_experiment(parse_config(seeded)), DomainError);
}

TEST_CASE("runs are deterministic and round-trip through the report files") {
  json doc = {{"experiment", "meanfield-error"},
              {"physics", {{"particles", json::array({2, 3})}}},
              {"schedule", {{"t_final", 0.3}, {"hartree_substeps", 20}}}};
  const auto cfg = parse_config(doc);
  const auto dir = scratch_dir("roundtrip");
  const json a = run_experiment(cfg, dir);
  const json b = run_experiment(cfg);
  CHECK(strip_runtime(a).dump() == strip_runtime(b).dump());

  CHECK(a["schema_version"] == 1);
  CHECK(a["label"].get<std::string>().find("finite-size surrogate") != std::string::npos);
  for (const auto& v : a["verdicts"]) {
    CHECK(v.contains("threshold"));
    CHECK(v.contains("value"));
  }
  const json back = read_report(dir);
  CHECK(back == a);
  CHECK(read_report(dir / "report.json") == a);

  std::ifstream csv(dir / "error.csv");
  std::string header;
  std::getline(csv, header);
  CHECK(header == "t,error_N2,error_N3");
  int lines = 0;
  for (std::string line; std::getline(csv, line);) ++lines;
  CHECK(lines == static_cast<int>(a["series"]["error"]["rows"].size()));

  // Overall status is the conjunction of verdicts.
  bool all = true;
  for (const auto& v : a["verdicts"]) all = all && v["pass"].get<bool>();
  CHECK(report_passed(a) == all);
  CHECK(failing_verdicts(a).empty() == all);

  json wrong = a;
  wrong["schema_version"] = 2;
  write_report(wrong, dir);
  CHECK_THROWS_AS(read_report(dir), UsageError);
  CHECK_THROWS_AS(read_report(dir / "absent"), UsageError);
}

TEST_CASE("single particle: pair-corrected Hartree is exact") {
  json doc = {{"experiment", "meanfield-error"},
              {"physics", {{"particles", json::array({1})}, {"hartree_coupling", "pair"}}},
              {"controls", {{"single_particle", false}}}};
  const json r = run_experiment(parse_config(doc));
  CHECK(report_passed(r));
  CHECK(number_from_json(r["metrics"]["final_errors"][0]["normalized_error"]) < 1e-10);
  CHECK(r["notes"].size() == 1);
}

TEST_CASE("controls are reported but never asserted") {
  json doc = {{"experiment", "locality-enhancement"}, {"schedule", {{"t_final", 2.0}}}};
  const json r = run_experiment(parse_config(doc));
  REQUIRE(r["controls"].contains("probe_in_condensate"));
  const auto& ctl = r["controls"]["probe_in_condensate"];
  CHECK(ctl["asserted"] == false);
  CHECK(ctl["flag"].get<std::string>().find("no enhancement expected") != std::string::npos);
  // On the condensate the local error is of the order of the worst window.
  CHECK(number_from_json(ctl["max_ratio"]) > 0.9);
  for (const auto& v : r["verdicts"]) CHECK(v["name"].get<std::string>().find("probe") == std::string::npos);
  CHECK(find_verdict(r, "enhancement_in_cone")["pass"] == true);
}

TEST_CASE("free dynamics: no local error and no moment growth") {
  json loc = {{"experiment", "locality-enhancement"},
              {"physics", {{"lambda", 0.0}}},
              {"schedule", {{"t_final", 1.7}}}};
  const json r = run_experiment(parse_config(loc));
  CHECK(number_from_json(r["metrics"]["max_local_error_in_cone"]) <= 1e-8);

  json mom = {{"experiment", "moment-bounds"}, {"physics", {{"lambda", 0.0}}}};
  const json m = run_experiment(parse_config(mom));
  CHECK(report_passed(m));
  CHECK(find_verdict(m, "moment3_free_ratio")["pass"] == true);
}

TEST_CASE("seeded fluctuations outside the cone stay suppressed") {
  json doc = {{"experiment", "fluctuation-lightcone"},
              {"regions", {{"rho", 8.0}}},
              {"initial_state", {{"kind", "seeded"}, {"site", json::array({-10})}, {"amplitude", 0.3}}},
              {"schedule", {{"t_final", 1.4}}},
              {"controls", {{"probe_in_condensate", false}}}};
  const json r = run_experiment(parse_config(doc));
  CHECK(find_verdict(r, "suppression_in_cone")["pass"] == true);
  CHECK(number_from_json(r["metrics"]["initial_second_moment"]) > 1.0);
}

TEST_CASE("ballistic mass: supersonic bound holds, subsonic control is flagged") {
  json doc = {{"experiment", "ballistic-mass"},
              {"geometry", {{"length", 128}}},
              {"regions", {{"rho", 16.0}}},
              {"schedule", {{"dt", 0.02}, {"stride", 5}}}};
  const json r = run_experiment(parse_config(doc));
  CHECK(report_passed(r));
  CHECK(r["controls"]["subsonic_velocity"]["asserted"] == false);
  CHECK(number_from_json(r["controls"]["subsonic_velocity"]["bound_ratio"]) > 1.0);
}

TEST_CASE("format_report lists every verdict and the failing ones") {
  ReportBuilder b("demo", {{"experiment", "demo"}});
  b.verdict("small", 1e-12, "<=", 1e-10, "a note");
  b.verdict("range", 2.0, "in", 0.0, "", 1.0);
  b.control("ctl", {{"flag", "not covered"}});
  const json r = b.finish(0.0);
  CHECK_FALSE(report_passed(r));
  CHECK(failing_verdicts(r) == std::vector<std::string>{"range"});
  const std::string text = format_report(r);
  CHECK(text.find("PASS  small") != std::string::npos);
  CHECK(text.find("FAIL  range") != std::string::npos);
  CHECK(text.find("failing: range") != std::string::npos);
  CHECK(text.find("control ctl: not covered") != std::string::npos);
  CHECK(number_from_json(json_number(INFINITY)) == INFINITY);
  CHECK(std::isnan(number_from_json(json_number(NAN))));
  CHECK_THROWS_AS(b.verdict("x", 1.0, "~", 0.0), UsageError);
}
