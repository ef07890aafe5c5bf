#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "learndyn/experiment.hpp"

using namespace learndyn;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = LEARNDYN_FIXTURE_DIR;

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("learndyn_test_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

json base_config(const fs::path& out) {
  return {{"game", {{"builtin", "G3"}}},
          {"kernels", "both"},
          {"temperatures", {1}},
          {"operations", {"cda", "compare"}},
          {"output_dir", out.string()}};
}

void expect_config_error(const json& j, const std::string& fragment) {
  try {
    ExperimentConfig::from_json(j);
    FAIL() << "expected a configuration error mentioning " << fragment;
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
  }
}

const json* find_verdict(const json& report, const std::string& name) {
  for (const auto& v : report["verdicts"])
    if (v["name"] == name) return &v;
  return nullptr;
}

}  // namespace

TEST(Config, RejectsInvalidDocuments) {
  const auto out = scratch("config");
  auto j = base_config(out);

  auto bad = j;
  bad["operations"] = json::array();
  expect_config_error(bad, "operations");

  bad = j;
  bad["temperatures"] = {1, -0.5};
  expect_config_error(bad, "temperatures");

  bad = j;
  bad["colour"] = "blue";
  expect_config_error(bad, "colour");

  bad = j;
  bad["operations"] = {"simulate"};
  expect_config_error(bad, "seeds");

  bad = j;
  bad["kernels"] = "ml";
  expect_config_error(bad, "compare");

  bad = j;
  bad["kernels"] = {"lll", "annealing"};
  expect_config_error(bad, "kernels");

  bad = j;
  bad["operations"] = {"plot"};
  expect_config_error(bad, "plot");

  bad = j;
  bad.erase("game");
  expect_config_error(bad, "game");

  bad = j;
  bad["temperatures"] = "hot";
  expect_config_error(bad, "temperatures");

  bad = j;
  bad["options"] = {{"exit_validation", {{"temperatures", {0.2, 0.5}}}}};
  expect_config_error(bad, "exit_validation");

  bad = j;
  bad["options"] = {{"verbose", true}};
  expect_config_error(bad, "verbose");
}

TEST(Config, MalformedFileNamesThePosition) {
  const auto dir = scratch("malformed");
  fs::create_directories(dir);
  std::ofstream(dir / "bad.json") << "{\n  \"game\": {\"builtin\": \"G3\"},\n  \"kernels\": [\"ml\",]\n}\n";
  try {
    ExperimentConfig::load(dir / "bad.json");
    FAIL() << "expected a configuration error";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(Config, UnknownGameSourcesFailAtRun) {
  auto j = base_config(scratch("unknown_game"));
  j["game"] = {{"builtin", "G7"}};
  EXPECT_THROW(run(ExperimentConfig::from_json(j)), ConfigError);
  j["game"] = {{"fixture", "no_such_file.json"}};
  EXPECT_THROW(run(ExperimentConfig::from_json(j, kFixtures)), ConfigError);
  j["game"] = {{"type", "table"}, {"action_sizes", {2}}};
  EXPECT_THROW(run(ExperimentConfig::from_json(j)), ConfigError);
}

TEST(Config, CanonicalFormRoundTrips) {
  const auto c = ExperimentConfig::load(kFixtures / "configs" / "g2_full.json");
  const auto again = ExperimentConfig::from_json(c.to_json(), c.base_dir);
  EXPECT_EQ(c.to_json().dump(), again.to_json().dump());
  EXPECT_EQ(c.kernels.size(), 2u);
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{7, 8}));
}

TEST(Run, G3CdaAndCompare) {
  const auto out = scratch("g3");
  const auto m = run(ExperimentConfig::from_json(base_config(out)));
  EXPECT_TRUE(m.passed);

  ASSERT_TRUE(fs::exists(out / "cda_ML_level1.dot"));
  ASSERT_TRUE(fs::exists(out / "cda_LLL_level1.dot"));
  const auto dot = slurp(out / "cda_ML_level1.dot");
  EXPECT_NE(dot.find("label=\"3/0\""), std::string::npos) << dot;
  EXPECT_NE(dot.find("cluster_1"), std::string::npos);

  const auto report = json::parse(slurp(out / "report.json"));
  const auto& cmp = report["results"]["compare"];
  bool shared = false;
  for (const auto& s : cmp["shared"])
    if (s["members"] == json({{1}, {2}}) || s["members"] == json({1, 2})) shared = true;
  EXPECT_TRUE(shared) << cmp.dump(2);
  for (const char* name : {"compare_exit_height_dominance", "compare_mixing_height_dominance", "compare_altitude_dominance"}) {
    const auto* v = find_verdict(report, name);
    ASSERT_NE(v, nullptr) << name;
    EXPECT_TRUE((*v)["passed"].get<bool>());
  }
}

TEST(Run, ReportCarriesGammaVerdicts) {
  const auto out = scratch("g2_validate");
  auto j = base_config(out);
  j["game"] = {{"builtin", "G2"}};
  j["operations"] = {"validate", "zerocost"};
  const auto m = run(ExperimentConfig::from_json(j));
  EXPECT_TRUE(m.passed);
  const auto* v = find_verdict(m.report, "regularity_LLL_T1_gamma_dominance");
  ASSERT_NE(v, nullptr);
  EXPECT_TRUE((*v)["passed"].get<bool>());
  EXPECT_EQ(m.report["constants"]["ML"]["1"]["gamma"], 0.25);
  EXPECT_EQ(m.report["results"]["zerocost"]["ML"]["bounds"][0]["bound"], 32.0);
  EXPECT_EQ(m.report["results"]["zerocost"]["mplr"][0]["mplr"], 1.0);
}

TEST(Run, FullPipelineIsByteIdenticalOnRerun) {
  const auto out = scratch("g2_full");
  auto c = ExperimentConfig::load(kFixtures / "configs" / "g2_full.json");
  c.output_dir = out;
  const auto first = run(c);

  std::map<std::string, std::string> bytes;
  for (const auto& [op, files] : first.outputs)
    for (const auto& f : files) bytes[f] = slurp(out / f);

  const auto second = run(c);
  EXPECT_EQ(first.to_json().dump(), second.to_json().dump());
  for (const auto& [f, body] : bytes) EXPECT_EQ(slurp(out / f), body) << f;
}

TEST(Run, ManifestListsEveryArtifactOnce) {
  const auto out = scratch("manifest");
  auto c = ExperimentConfig::load(kFixtures / "configs" / "g2_full.json");
  c.output_dir = out;
  const auto m = run(c);
  std::map<std::string, int> listed;
  for (const auto& [op, files] : m.outputs)
    for (const auto& f : files) ++listed[f];
  std::size_t on_disk = 0;
  for (const auto& entry : fs::directory_iterator(out)) {
    ++on_disk;
    EXPECT_EQ(listed[entry.path().filename().string()], 1) << entry.path();
  }
  EXPECT_EQ(on_disk, listed.size());
  for (const char* f : {"trace_LLL_T0.5_s7.csv", "trace_ML_T1_s8.csv", "stationary_T0.5.csv", "hitting_T1.csv",
                        "zerocost.csv", "report.json", "manifest.json"})
    EXPECT_EQ(listed[f], 1) << f;
  const auto disk_manifest = json::parse(slurp(out / "manifest.json"));
  EXPECT_FALSE(disk_manifest.contains("timings_ms"));
  EXPECT_EQ(disk_manifest["config_digest"], m.config_digest);
}

TEST(Run, FirstNashStatisticsPerKernel) {
  const auto out = scratch("first_nash");
  auto c = ExperimentConfig::load(kFixtures / "configs" / "g2_full.json");
  c.output_dir = out;
  const auto m = run(c);
  const auto& stats = m.report["results"]["simulate"]["first_nash"];
  ASSERT_EQ(stats.size(), 4u);  // two temperatures times two seeds
  for (const auto& row : stats) {
    EXPECT_TRUE(row["LLL"]["mean"].is_number());
    EXPECT_TRUE(row["ML"]["mean"].is_number());
    EXPECT_TRUE(row.contains("welch_p_lll_less_than_ml"));
  }
}

TEST(Run, ThreeSensorFixture) {
  const auto out = scratch("three_sensor");
  auto c = ExperimentConfig::load(kFixtures / "configs" / "three_sensor.json");
  c.output_dir = out;
  const auto m = run(c);
  EXPECT_TRUE(m.passed);
  EXPECT_EQ(m.report["game"]["nash"], json({{1, 0, 1}, {0, 1, 1}}));
}

TEST(Run, InvalidInitialStateIsConfigError) {
  auto j = base_config(scratch("initial"));
  j["operations"] = {"hitting"};
  j["options"] = {{"initial_state", {5}}};
  EXPECT_THROW(run(ExperimentConfig::from_json(j)), ConfigError);
}

TEST(Run, RandomBuiltinAndInlineFixture) {
  auto j = base_config(scratch("random"));
  j["game"] = {{"builtin", "random"}, {"seed", 1003}};
  EXPECT_TRUE(run(ExperimentConfig::from_json(j)).passed);

  j = base_config(scratch("inline"));
  j["game"] = read_json_file(kFixtures / "g2_table.json");
  j["operations"] = {"stationary"};
  const auto m = run(ExperimentConfig::from_json(j));
  EXPECT_TRUE(m.passed);
  EXPECT_EQ(m.report["game"]["name"], "G2");
}

TEST(Run, ExitValidationConfig) {
  const auto out = scratch("exit_times");
  auto c = ExperimentConfig::load(kFixtures / "configs" / "g3_exit_times.json");
  c.output_dir = out;
  const auto m = run(c);
  const auto& e = m.report["results"]["validate"]["exit_times"]["ML"];
  EXPECT_EQ(e["expected_height"], 3.0);
  EXPECT_LT(e["relative_slope_error"].get<double>(), 0.15);
}

TEST(Digest, StableAcrossRuns) {
  EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
  EXPECT_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
}
