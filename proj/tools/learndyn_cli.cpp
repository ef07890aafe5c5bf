// learndyn command-line runner.
//
// Exit codes: 0 success, 1 configuration error, 2 capacity or numeric error,
// 3 invariant violation (or a failed verdict under --strict).

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "learndyn/learndyn.hpp"

namespace fs = std::filesystem;
using learndyn::json;

namespace {

struct Overrides {
  std::string config;
  std::string fixture;
  std::string builtin;
  std::optional<std::uint64_t> game_seed;
  std::string kernel;
  std::vector<double> temperatures;
  std::vector<std::uint64_t> seeds;
  std::string out;
  std::optional<std::size_t> steps;
  std::optional<std::size_t> trials;
  std::optional<std::size_t> max_steps;
  std::vector<std::size_t> initial;
  bool strict = false;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("-c,--config", o.config, "Experiment config (JSON)");
  cmd->add_option("--fixture", o.fixture, "Game fixture file");
  cmd->add_option("--builtin", o.builtin, "Built-in game: G2, G3 or random");
  cmd->add_option("--game-seed", o.game_seed, "Seed of the random built-in game");
  cmd->add_option("-k,--kernel", o.kernel, "lll, ml or both");
  cmd->add_option("-T,--temperature", o.temperatures, "Temperatures");
  cmd->add_option("-o,--out", o.out, "Output directory");
  cmd->add_option("--steps", o.steps, "Steps per simulated trace");
  cmd->add_option("--trials", o.trials, "Monte Carlo trials");
  cmd->add_option("--max-steps", o.max_steps, "Step cap per Monte Carlo trial");
  cmd->add_option("--initial", o.initial, "Initial profile, one action per player");
  cmd->add_flag("--strict", o.strict, "Exit with code 3 when any verdict fails");
}

json build_config(const Overrides& o, const std::optional<std::string>& op, fs::path& base_dir) {
  json cfg = json::object();
  if (!o.config.empty()) {
    cfg = learndyn::read_json_file(o.config);
    base_dir = fs::path(o.config).parent_path();
  }
  if (!o.fixture.empty()) cfg["game"] = {{"fixture", fs::absolute(o.fixture).string()}};
  if (!o.builtin.empty()) {
    cfg["game"] = {{"builtin", o.builtin}};
    if (o.game_seed) cfg["game"]["seed"] = *o.game_seed;
  }
  if (!o.kernel.empty()) cfg["kernels"] = o.kernel;
  if (!o.temperatures.empty()) cfg["temperatures"] = o.temperatures;
  if (!o.seeds.empty()) cfg["seeds"] = o.seeds;
  if (!o.out.empty()) cfg["output_dir"] = fs::absolute(o.out).string();
  if (op) cfg["operations"] = {*op};

  if (!cfg.contains("kernels")) cfg["kernels"] = "both";
  if (!cfg.contains("temperatures")) cfg["temperatures"] = {1.0};
  if (!cfg.contains("output_dir")) cfg["output_dir"] = "out";

  if (o.steps) cfg["options"]["steps"] = *o.steps;
  if (o.trials) cfg["options"]["trials"] = *o.trials;
  if (o.max_steps) cfg["options"]["max_steps"] = *o.max_steps;
  if (!o.initial.empty()) cfg["options"]["initial_state"] = o.initial;
  if (o.strict) cfg["options"]["strict"] = true;
  return cfg;
}

int run_experiment(const Overrides& o, const std::optional<std::string>& op) {
  fs::path base_dir;
  const json doc = build_config(o, op, base_dir);
  const auto config = learndyn::ExperimentConfig::from_json(doc, base_dir);
  const auto manifest = learndyn::run(config);

  json summary = manifest.to_json();
  summary["output_dir"] = config.output_dir.string();
  summary["timings_ms"] = manifest.timings_ms;
  std::cout << summary.dump(2) << "\n";
  if (!manifest.passed) {
    for (const auto& v : manifest.report["verdicts"])
      if (!v["passed"].get<bool>()) std::cerr << "verdict failed: " << v["name"].get<std::string>() << "\n";
    if (config.options.strict) return 3;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learning-dynamics analysis for finite potential games"};
  app.require_subcommand(1);
  app.set_version_flag("--version", learndyn::kToolVersion);

  Overrides o;
  std::optional<std::string> op;

  for (const std::string name : {"stationary", "hitting", "zerocost", "cda", "compare", "validate"}) {
    auto* cmd = app.add_subcommand(name, "Run the " + name + " operation");
    add_common(cmd, o);
    cmd->add_option("--seed", o.seeds, "Seeds for sampling");
    cmd->callback([&op, name] { op = name; });
  }

  auto* sim = app.add_subcommand("simulate", "Simulate traces of the learning dynamics");
  add_common(sim, o);
  sim->add_option("--seed", o.seeds, "Seeds, one trace per seed")->required();
  sim->callback([&op] { op = "simulate"; });

  auto* run = app.add_subcommand("run", "Run every operation listed in a config file");
  add_common(run, o);
  run->add_option("--seed", o.seeds, "Seeds for sampling");
  run->get_option("--config")->required();

  int d = 0;
  std::size_t n = 0;
  double alpha = 0.0, comm_range = 0.0;
  std::vector<double> radii;
  std::uint64_t gen_seed = 0;
  std::string gen_out, gen_name = "coverage";
  auto* gen = app.add_subcommand("coverage-gen", "Emit a random sensor-coverage fixture");
  gen->add_option("--d", d, "Grid extent")->required();
  gen->add_option("--n", n, "Number of sensors")->required();
  gen->add_option("--alpha", alpha, "Cost coefficient in (0,1]")->required();
  gen->add_option("--radii", radii, "Radius options, starting with 0")->required();
  gen->add_option("--seed", gen_seed, "Deployment seed")->required();
  gen->add_option("--comm-range", comm_range, "Communication range (recorded only)");
  gen->add_option("--name", gen_name, "Fixture name");
  gen->add_option("-o,--out", gen_out, "Output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) {
      const auto cfg = learndyn::coverage::random_sensor_config(d, n, radii, alpha, gen_seed, comm_range);
      const auto text = learndyn::sensor_config_to_json(cfg, gen_name).dump(2) + "\n";
      if (gen_out.empty()) {
        std::cout << text;
      } else {
        std::ofstream f(gen_out);
        if (!(f << text)) throw learndyn::Error("cannot write " + gen_out);
      }
      return 0;
    }
    return run_experiment(o, run->parsed() ? std::nullopt : op);
  } catch (const learndyn::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 1;
  } catch (const learndyn::ArgumentError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 1;
  } catch (const learndyn::RejectedGameError& e) {
    std::cerr << "rejected game: " << e.what() << "\n";
    return 1;
  } catch (const learndyn::PreconditionError& e) {
    std::cerr << "precondition failed: " << e.what() << "\n";
    return 1;
  } catch (const learndyn::CapacityError& e) {
    std::cerr << "capacity error: " << e.what() << "\n";
    return 2;
  } catch (const learndyn::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 2;
  } catch (const learndyn::InvariantViolation& e) {
    std::cerr << "invariant violation: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
