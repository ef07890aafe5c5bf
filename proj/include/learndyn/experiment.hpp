#ifndef LEARNDYN_EXPERIMENT_HPP
#define LEARNDYN_EXPERIMENT_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "learndyn/builtin_games.hpp"
#include "learndyn/chain_analysis.hpp"
#include "learndyn/cycles.hpp"
#include "learndyn/dynamics.hpp"
#include "learndyn/errors.hpp"
#include "learndyn/fixtures.hpp"
#include "learndyn/format.hpp"

namespace learndyn {

inline constexpr const char* kToolVersion = "0.1.0";

/// Operations in execution (dependency) order.
inline const std::vector<std::string>& operation_order() {
  static const std::vector<std::string> ops = {"simulate", "stationary", "hitting", "zerocost",
                                               "cda",      "compare",    "validate"};
  return ops;
}

struct ExitValidationOptions {
  std::vector<StateIndex> cycle;  // empty: first nontrivial cycle of each hierarchy
  std::vector<double> temperatures = {0.5, 0.4, 0.3, 0.25, 0.2};
  std::size_t trials = 2000;
};

struct RunOptions {
  std::size_t steps = 1000;
  std::size_t trials = 0;  // Monte Carlo trials for hitting and first-Nash statistics
  std::size_t max_steps = 10'000'000;
  std::optional<std::vector<std::size_t>> initial_state;  // default: all zeros
  std::optional<ExitValidationOptions> exit_validation;
  bool strict = false;
};

struct ExperimentConfig {
  json game;  // fixture reference, built-in shorthand or inline fixture
  std::filesystem::path base_dir;  // relative fixture paths resolve against this
  std::vector<Kernel> kernels;
  std::vector<double> temperatures;
  std::vector<std::string> operations;
  std::vector<std::uint64_t> seeds;
  std::filesystem::path output_dir;
  RunOptions options;

  bool has(const std::string& op) const {
    return std::find(operations.begin(), operations.end(), op) != operations.end();
  }
  bool has_kernel(Kernel k) const { return std::find(kernels.begin(), kernels.end(), k) != kernels.end(); }

  void validate() const {
    if (game.is_null()) throw ConfigError("game: missing");
    if (operations.empty()) throw ConfigError("operations: at least one operation is required");
    for (const auto& op : operations)
      if (std::find(operation_order().begin(), operation_order().end(), op) == operation_order().end())
        throw ConfigError("operations: unknown operation '" + op + "'");
    if (kernels.empty()) throw ConfigError("kernels: at least one kernel is required");
    if (temperatures.empty()) throw ConfigError("temperatures: at least one temperature is required");
    for (double t : temperatures)
      if (!(t > 0.0) || !std::isfinite(t)) throw ConfigError("temperatures: values must be positive and finite");
    const bool stochastic = has("simulate") || (has("hitting") && options.trials > 0) ||
                            (has("validate") && options.exit_validation);
    if (stochastic && seeds.empty()) throw ConfigError("seeds: explicit seeds are required for sampling operations");
    if (has("compare") && !(has_kernel(Kernel::LogLinear) && has_kernel(Kernel::Metropolis)))
      throw ConfigError("kernels: compare needs both lll and ml");
    if (output_dir.empty()) throw ConfigError("output_dir: missing");
    if (options.exit_validation) {
      const auto& ev = *options.exit_validation;
      if (ev.temperatures.size() < 2) throw ConfigError("options.exit_validation.temperatures: need at least two values");
      for (std::size_t j = 0; j < ev.temperatures.size(); ++j)
        if (!(ev.temperatures[j] > 0.0) || (j && !(ev.temperatures[j] < ev.temperatures[j - 1])))
          throw ConfigError("options.exit_validation.temperatures: must be positive and decreasing");
      if (ev.trials == 0) throw ConfigError("options.exit_validation.trials: must be positive");
    }
  }

  static ExperimentConfig from_json(const json& j, const std::filesystem::path& base_dir = {}) {
    using detail::get;
    using detail::get_or;
    if (!j.is_object()) throw ConfigError("config: expected an object");
    static const std::set<std::string> known = {"game", "kernels", "temperatures", "operations", "seeds", "output_dir", "options"};
    for (const auto& [key, value] : j.items())
      if (!known.count(key)) throw ConfigError("config: unknown field '" + key + "'");

    ExperimentConfig c;
    c.base_dir = base_dir;
    c.game = detail::field(j, "game", "config");
    if (!c.game.is_object()) throw ConfigError("game: expected an object");

    const auto& kernels = detail::field(j, "kernels", "config");
    if (kernels.is_string()) {
      const auto s = kernels.get<std::string>();
      if (s == "both")
        c.kernels = {Kernel::LogLinear, Kernel::Metropolis};
      else
        c.kernels = {parse_kernel_field(s)};
    } else {
      for (const auto& s : get<std::vector<std::string>>(j, "kernels", "config")) {
        const auto k = parse_kernel_field(s);
        if (!c.has_kernel(k)) c.kernels.push_back(k);
      }
    }

    c.temperatures = get<std::vector<double>>(j, "temperatures", "config");
    c.operations = get<std::vector<std::string>>(j, "operations", "config");
    c.seeds = get_or<std::vector<std::uint64_t>>(j, "seeds", "config", {});
    c.output_dir = get_or<std::string>(j, "output_dir", "config", "");

    if (j.contains("options")) {
      const auto& o = j["options"];
      static const std::set<std::string> known_opts = {"steps", "trials", "max_steps", "initial_state", "exit_validation", "strict"};
      if (!o.is_object()) throw ConfigError("options: expected an object");
      for (const auto& [key, value] : o.items())
        if (!known_opts.count(key)) throw ConfigError("options: unknown field '" + key + "'");
      c.options.steps = get_or<std::size_t>(o, "steps", "options", c.options.steps);
      c.options.trials = get_or<std::size_t>(o, "trials", "options", c.options.trials);
      c.options.max_steps = get_or<std::size_t>(o, "max_steps", "options", c.options.max_steps);
      c.options.strict = get_or<bool>(o, "strict", "options", false);
      if (o.contains("initial_state")) c.options.initial_state = get<std::vector<std::size_t>>(o, "initial_state", "options");
      if (o.contains("exit_validation")) {
        const auto& e = o["exit_validation"];
        ExitValidationOptions ev;
        ev.cycle = get_or<std::vector<StateIndex>>(e, "cycle", "options.exit_validation", {});
        ev.temperatures = get_or<std::vector<double>>(e, "temperatures", "options.exit_validation", ev.temperatures);
        ev.trials = get_or<std::size_t>(e, "trials", "options.exit_validation", ev.trials);
        c.options.exit_validation = ev;
      }
    }
    c.validate();
    return c;
  }

  static ExperimentConfig load(const std::filesystem::path& path) {
    return from_json(read_json_file(path), path.parent_path());
  }

  /// Canonical form (sorted keys); the digest is taken over its dump.
  json to_json() const {
    json kernels_json = json::array();
    for (auto k : kernels) kernels_json.push_back(k == Kernel::LogLinear ? "lll" : "ml");
    json opts = {{"steps", options.steps},
                 {"trials", options.trials},
                 {"max_steps", options.max_steps},
                 {"strict", options.strict}};
    if (options.initial_state) opts["initial_state"] = *options.initial_state;
    if (options.exit_validation)
      opts["exit_validation"] = {{"cycle", options.exit_validation->cycle},
                                 {"temperatures", options.exit_validation->temperatures},
                                 {"trials", options.exit_validation->trials}};
    return {{"game", game},
            {"kernels", kernels_json},
            {"temperatures", temperatures},
            {"operations", operations},
            {"seeds", seeds},
            {"output_dir", output_dir.generic_string()},
            {"options", opts}};
  }

 private:
  static Kernel parse_kernel_field(const std::string& s) {
    try {
      return parse_kernel(s);
    } catch (const ArgumentError& e) {
      throw ConfigError(std::string("kernels: ") + e.what());
    }
  }
};

/// Resolves the config's game source: {"fixture": path}, {"builtin": name[, "seed": n]}
/// or an inline fixture document.
inline LoadedGame load_config_game(const ExperimentConfig& c) {
  const auto& g = c.game;
  if (g.contains("fixture")) {
    std::filesystem::path p = detail::get<std::string>(g, "fixture", "game");
    if (p.is_relative()) p = c.base_dir / p;
    return game_from_json(read_json_file(p), "game.fixture");
  }
  if (g.contains("builtin")) {
    json doc = {{"type", "builtin"}, {"name", detail::get<std::string>(g, "builtin", "game")}};
    if (g.contains("seed")) doc["seed"] = g["seed"];
    return game_from_json(doc, "game");
  }
  return game_from_json(g, "game");
}

inline std::string fnv1a_hex(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : data) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

struct RunManifest {
  std::string config_digest;
  std::string tool_version = kToolVersion;
  std::map<std::string, std::vector<std::string>> outputs;  // operation -> files, relative to output_dir
  std::map<std::string, double> timings_ms;                 // kept out of manifest.json
  bool passed = true;
  json report;

  json to_json() const {
    return {{"config_digest", config_digest}, {"tool_version", tool_version}, {"outputs", outputs}, {"passed", passed}};
  }
};

// ---------------------------------------------------------------------------
// JSON views of analysis results

inline json num(double v) {
  if (std::isfinite(v)) return v;
  return format_number(v);
}

inline json to_json(const CheckOutcome& c) {
  json j = {{"name", c.name}, {"passed", c.passed}, {"checked", c.checked}, {"failures", c.failures},
            {"witnesses", c.witnesses}};
  if (c.skipped) j["skipped"] = true;
  if (!c.note.empty()) j["note"] = c.note;
  return j;
}

inline json profiles_json(const ProfileSpace& space, const std::vector<StateIndex>& states) {
  json out = json::array();
  for (auto s : states) out.push_back(space.profile(s).actions());
  return out;
}

inline json to_json(const CycleHierarchy& h, const ProfileSpace& space) {
  json nodes = json::array();
  for (std::size_t id = 0; id < h.nodes().size(); ++id) {
    const auto& c = h.node(id);
    if (c.size() < 2 && c.exit_height == 0.0) continue;  // trivial singletons are implied
    nodes.push_back({{"id", id},
                     {"members", profiles_json(space, c.members)},
                     {"order", c.order},
                     {"exit_height", num(c.exit_height)},
                     {"mixing_height", num(c.mixing_height)},
                     {"potential", num(c.potential)},
                     {"children", c.children}});
  }
  json levels = json::array();
  for (std::size_t k = 0; k < h.levels().size(); ++k) {
    json cycles = json::array();
    for (auto id : h.level(k).cycles) cycles.push_back(profiles_json(space, h.node(id).members));
    levels.push_back({{"level", k}, {"cycles", cycles}});
  }
  return {{"depth", h.depth()}, {"cycles", nodes}, {"levels", levels}};
}

inline json to_json(const StructureReport& r) {
  json checks = json::array();
  for (const auto& c : r.checks) checks.push_back(to_json(c));
  json diag = json::array();
  for (const auto& d : r.exit_heights)
    diag.push_back({{"node", d.node}, {"cda", num(d.cda)}, {"min_form", num(d.min_form)}, {"max_form", num(d.max_form)}});
  return {{"checks", checks},
          {"exit_height_forms", {{"min_form_matches", r.min_form_matches}, {"max_form_matches", r.max_form_matches}, {"cycles", diag}}}};
}

inline json to_json(const HierarchyComparison& c, const ProfileSpace& space) {
  json shared = json::array();
  for (const auto& s : c.shared)
    shared.push_back({{"members", profiles_json(space, s.members)},
                      {"exit_height_lll", num(s.exit_lll)},
                      {"exit_height_ml", num(s.exit_ml)},
                      {"mixing_height_lll", num(s.mixing_lll)},
                      {"mixing_height_ml", num(s.mixing_ml)}});
  json only_lll = json::array(), only_ml = json::array();
  for (const auto& m : c.only_lll) only_lll.push_back(profiles_json(space, m));
  for (const auto& m : c.only_ml) only_ml.push_back(profiles_json(space, m));
  return {{"shared", shared},
          {"only_lll", only_lll},
          {"only_ml", only_ml},
          {"checks", {to_json(c.exit_dominance), to_json(c.mixing_dominance), to_json(c.altitude_dominance)}}};
}

inline json to_json(const ExitRegression& r, const ProfileSpace& space) {
  json pts = json::array();
  for (const auto& p : r.points)
    pts.push_back({{"temperature", p.temperature}, {"trials", p.trials}, {"truncated", p.truncated},
                   {"mean_exit_time", num(p.mean)}, {"std_error", num(p.std_error)},
                   {"visited_all_fraction", p.visited_all_fraction}});
  return {{"members", profiles_json(space, r.members)},
          {"start", space.profile(r.start).actions()},
          {"expected_height", num(r.expected_height)},
          {"slope", num(r.slope)},
          {"intercept", num(r.intercept)},
          {"r_squared", num(r.r_squared)},
          {"truncated", r.truncated},
          {"points", pts}};
}

// ---------------------------------------------------------------------------
// Runner

namespace detail {

class Runner {
 public:
  explicit Runner(const ExperimentConfig& config) : config_(config), loaded_(load_config_game(config)) {}

  RunManifest run() {
    namespace fs = std::filesystem;
    fs::create_directories(config_.output_dir);
    manifest_.config_digest = fnv1a_hex(config_.to_json().dump());

    for (const auto& op : operation_order()) {
      if (!config_.has(op)) continue;
      const auto start = std::chrono::steady_clock::now();
      current_op_ = op;
      if (op == "simulate") simulate();
      if (op == "stationary") stationary();
      if (op == "hitting") hitting();
      if (op == "zerocost") zerocost();
      if (op == "cda") cda();
      if (op == "compare") compare();
      if (op == "validate") validate();
      manifest_.timings_ms[op] =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    }

    json constants = json::object();
    for (const auto& [key, model] : models_) {
      json c = {{"gamma", num(model.gamma())}, {"z_max", num(model.z_max())}, {"gamma_fallback", model.gamma_is_fallback()}};
      constants[kernel_name(model.kernel())][format_number(model.temperature())] = c;
    }
    for (const auto& [key, value] : extra_constants_.items()) constants[key] = value;

    json verdicts = json::array();
    for (const auto& v : verdicts_) verdicts.push_back(v);
    report_["tool_version"] = kToolVersion;
    report_["config_digest"] = manifest_.config_digest;
    report_["game"] = game_summary();
    report_["constants"] = constants;
    report_["verdicts"] = verdicts;
    report_["passed"] = manifest_.passed;
    if (!report_.contains("results")) throw ConfigError("report: no analysis results were produced");

    write_text("report.json", report_.dump(2) + "\n", "report");
    manifest_.outputs["run"].push_back("manifest.json");
    write_text_unlisted("manifest.json", manifest_.to_json().dump(2) + "\n");
    manifest_.report = report_;
    return manifest_;
  }

 private:
  const GameDefinition& game() const { return loaded_.game; }
  const ProfileSpace& space() const { return loaded_.game.space(); }

  BuildOptions build_options() const { return {}; }

  const TransitionModel& model(Kernel k, double T) {
    const auto key = std::make_pair(k == Kernel::LogLinear ? 0 : 1, T);
    auto it = models_.find(key);
    if (it == models_.end()) it = models_.emplace(key, build_transition_model(game(), k, T, build_options())).first;
    return it->second;
  }

  const std::vector<StateIndex>& nash() {
    if (!nash_) nash_ = enumerate_nash(game()).members;
    return *nash_;
  }

  ActionProfile initial_state() const {
    ActionProfile a(config_.options.initial_state ? *config_.options.initial_state
                                                  : std::vector<std::size_t>(space().players(), 0));
    if (!space().valid(a)) throw ConfigError("options.initial_state: invalid profile " + a.to_string());
    return a;
  }

  static std::string tag(double T) { return "T" + format_number(T); }

  void verdict(const std::string& name, bool passed, json detail = json::object()) {
    json v = {{"name", name}, {"operation", current_op_}, {"passed", passed}};
    if (!detail.empty()) v["detail"] = std::move(detail);
    verdicts_.push_back(v);
    manifest_.passed = manifest_.passed && passed;
  }

  void verdict(const CheckOutcome& c, const std::string& prefix) {
    if (c.skipped) return;
    verdict(prefix + c.name, c.passed, c.witnesses.empty() ? json::object() : json{{"witnesses", c.witnesses}});
  }

  void write_text(const std::string& file, const std::string& body, const std::string& op) {
    write_text_unlisted(file, body);
    manifest_.outputs[op].push_back(file);
  }

  void write_text_unlisted(const std::string& file, const std::string& body) {
    const auto path = config_.output_dir / file;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << body;
    if (!out) throw Error("write failed: " + path.string());
  }

  json game_summary() const {
    json g = {{"name", game().name()}, {"players", game().players()}, {"action_sizes", space().action_sizes()},
              {"states", space().size()}};
    if (space().size() <= kDefaultStateCap) g["nash"] = profiles_json(space(), enumerate_nash(game()).members);
    return g;
  }

  // --- operations -----------------------------------------------------------

  void simulate() {
    json out = json::object();
    json traces = json::array();
    const auto a0 = initial_state();
    for (auto k : config_.kernels)
      for (double T : config_.temperatures)
        for (auto seed : config_.seeds) {
          const auto tr = simulate_trace(k, T, a0, seed);
          std::ostringstream csv;
          write_trace_csv(tr, game(), csv);
          const std::string file = "trace_" + kernel_name(k) + "_" + tag(T) + "_s" + std::to_string(seed) + ".csv";
          write_text(file, csv.str(), "simulate");
          std::size_t accepted = 0;
          for (const auto& r : tr.steps) accepted += r.accepted;
          traces.push_back({{"kernel", kernel_name(k)}, {"temperature", T}, {"seed", seed}, {"steps", tr.steps.size()},
                            {"accepted", accepted}, {"final_profile", space().profile(tr.states.back()).actions()},
                            {"file", file}});
        }
    out["traces"] = traces;

    if (config_.options.trials > 0) {
      const auto target = state_mask(space().size(), nash());
      json stats = json::array();
      for (double T : config_.temperatures)
        for (auto seed : config_.seeds) {
          json row = {{"temperature", T}, {"seed", seed}, {"trials", config_.options.trials}};
          std::map<Kernel, MonteCarloEstimate> est;
          for (auto k : config_.kernels) {
            est[k] = monte_carlo_hitting(game(), k, T, a0, target, config_.options.trials, seed, config_.options.max_steps);
            row[kernel_name(k)] = {{"mean", num(est[k].mean)}, {"std_error", num(est[k].std_error)},
                                   {"censored", est[k].censored}};
          }
          if (est.size() == 2) {
            const double p = welch_one_sided_less(est[Kernel::LogLinear].samples, est[Kernel::Metropolis].samples);
            row["welch_p_lll_less_than_ml"] = num(p);
            row["lll_faster_at_0.05"] = p < 0.05;
          }
          stats.push_back(row);
        }
      out["first_nash"] = stats;
    }
    results()["simulate"] = out;
  }

  Trace simulate_trace(Kernel k, double T, const ActionProfile& a0, std::uint64_t seed) const {
    return learndyn::simulate(game(), k, T, a0, config_.options.steps, seed);
  }

  void stationary() {
    json out = json::array();
    for (double T : config_.temperatures) {
      const auto g = gibbs(game(), T);
      std::map<Kernel, StationaryDistribution> solved;
      json row = {{"temperature", T}};
      for (auto k : config_.kernels) {
        const auto& m = model(k, T);
        solved[k] = stationary_solve(m);
        const double tv = total_variation(solved[k].probabilities, g.probabilities);
        row[kernel_name(k)] = {{"tv_to_gibbs", num(tv)}, {"residual", num(stationary_residual(m, solved[k].probabilities))}};
        verdict("stationary_matches_gibbs_" + kernel_name(k) + "_" + tag(T), tv <= 1e-8, {{"tv", num(tv)}});
      }
      std::ostringstream csv;
      csv << "state_index,profile,potential,gibbs";
      for (auto k : config_.kernels) csv << ',' << kernel_name(k);
      csv << '\n';
      for (StateIndex s = 0; s < space().size(); ++s) {
        csv << s << ",\"" << space().profile(s).to_string() << "\"," << format_number(game().potential(s)) << ','
            << format_number(g.probabilities[s]);
        for (auto k : config_.kernels) csv << ',' << format_number(solved[k].probabilities[s]);
        csv << '\n';
      }
      const std::string file = "stationary_" + tag(T) + ".csv";
      write_text(file, csv.str(), "stationary");
      row["file"] = file;
      out.push_back(row);
    }
    results()["stationary"] = out;
  }

  const ZeroCostGraph& zero_stats(Kernel k) {
    auto it = zero_.find(k);
    if (it == zero_.end()) it = zero_.emplace(k, zero_cost_stats(model(k, config_.temperatures.front()), nash())).first;
    return it->second;
  }

  void hitting() {
    json out = json::array();
    const auto a0 = initial_state();
    for (double T : config_.temperatures) {
      json row = {{"temperature", T}};
      std::map<Kernel, std::vector<double>> h;
      for (auto k : config_.kernels) {
        const auto& m = model(k, T);
        h[k] = exact_hitting_times(m, nash());
        const double worst = *std::max_element(h[k].begin(), h[k].end());
        const auto b = hitting_bound(m, zero_stats(k));
        json entry = {{"max_expected_hitting_time", num(worst)}, {"eta", b.eta}, {"gamma", num(b.gamma)},
                      {"bound", num(b.bound)}, {"log_bound", num(b.log_bound)}, {"eta_out_of_range", b.eta_out_of_range},
                      {"from_initial", num(h[k][space().index(a0)])}};
        const bool ok = worst == 0.0 || std::log(worst) <= b.log_bound + 1e-12;
        verdict("hitting_within_bound_" + kernel_name(k) + "_" + tag(T), ok);
        if (config_.options.trials > 0) {
          const auto mc = monte_carlo_hitting(m, a0, nash(), config_.options.trials, config_.seeds.front(),
                                              config_.options.max_steps);
          entry["monte_carlo"] = {{"trials", mc.trials}, {"censored", mc.censored}, {"mean", num(mc.mean)},
                                  {"std_error", num(mc.std_error)}, {"ci95", {num(mc.ci_low()), num(mc.ci_high())}}};
        }
        row[kernel_name(k)] = entry;
      }
      std::ostringstream csv;
      csv << "state_index,profile,is_nash";
      for (auto k : config_.kernels) csv << ",hitting_" << kernel_name(k);
      csv << '\n';
      const auto mask = state_mask(space().size(), nash());
      for (StateIndex s = 0; s < space().size(); ++s) {
        csv << s << ",\"" << space().profile(s).to_string() << "\"," << int(mask[s]);
        for (auto k : config_.kernels) csv << ',' << format_number(h[k][s]);
        csv << '\n';
      }
      const std::string file = "hitting_" + tag(T) + ".csv";
      write_text(file, csv.str(), "hitting");
      row["file"] = file;
      out.push_back(row);
    }
    results()["hitting"] = out;
  }

  void zerocost() {
    json out = json::object();
    for (auto k : config_.kernels) {
      const auto& z = zero_stats(k);
      json per_t = json::array();
      for (double T : config_.temperatures) {
        const auto b = hitting_bound(model(k, T), z);
        per_t.push_back({{"temperature", T}, {"gamma", num(b.gamma)}, {"bound", num(b.bound)}, {"log_bound", num(b.log_bound)}});
      }
      out[kernel_name(k)] = {{"zero_cost_edges", z.edge_count()}, {"sigma_max", z.sigma_max()}, {"xi_max", z.xi_max()},
                             {"eta", z.sigma_max()}, {"eta_out_of_range", z.sigma_max() >= space().size()},
                             {"bounds", per_t}};
      bool xi_ge_sigma = true;
      for (StateIndex s = 0; s < space().size(); ++s) xi_ge_sigma = xi_ge_sigma && z.xi[s] >= z.sigma[s];
      verdict("xi_at_least_sigma_" + kernel_name(k), xi_ge_sigma);
    }
    const bool both = config_.has_kernel(Kernel::LogLinear) && config_.has_kernel(Kernel::Metropolis);
    if (both) {
      const auto& zl = zero_stats(Kernel::LogLinear);
      const auto& zm = zero_stats(Kernel::Metropolis);
      bool dominated = true;
      for (StateIndex s = 0; s < space().size(); ++s) dominated = dominated && zm.sigma[s] <= zl.sigma[s];
      verdict("sigma_ml_at_most_sigma_lll", dominated);
      json mplr = json::array();
      for (double T : config_.temperatures) {
        const auto v = mplr_condition(model(Kernel::LogLinear, T), zl, zm);
        json row = {{"temperature", T}, {"gamma_lll", num(v.gamma_lll)}, {"min_actions", num(v.lhs)}};
        if (v.mplr) {
          row["mplr"] = num(*v.mplr);
          row["argmax"] = space().profile(*v.argmax).actions();
          row["rhs"] = num(v.rhs());
          row["log_rhs"] = num(v.log_rhs);
          row["holds"] = v.holds;
        } else {
          row["mplr"] = "undefined";
        }
        mplr.push_back(row);
      }
      out["mplr"] = mplr;
      extra_constants_["mplr"] = mplr;
    }

    std::ostringstream csv;
    csv << "state_index,profile";
    for (auto k : config_.kernels) csv << ",sigma_" << kernel_name(k) << ",xi_" << kernel_name(k);
    csv << '\n';
    for (StateIndex s = 0; s < space().size(); ++s) {
      csv << s << ",\"" << space().profile(s).to_string() << '"';
      for (auto k : config_.kernels) csv << ',' << zero_stats(k).sigma[s] << ',' << zero_stats(k).xi[s];
      csv << '\n';
    }
    write_text("zerocost.csv", csv.str(), "zerocost");
    out["file"] = "zerocost.csv";
    results()["zerocost"] = out;
  }

  const CycleHierarchy& hierarchy(Kernel k) {
    auto it = hierarchies_.find(k);
    if (it == hierarchies_.end()) it = hierarchies_.emplace(k, decompose(model(k, config_.temperatures.front()))).first;
    return it->second;
  }

  void cda() {
    json out = json::object();
    for (auto k : config_.kernels) {
      const auto& h = hierarchy(k);
      const AltitudeTable alt(h.graph());
      const auto structure = verify_structure(h, alt, k);
      for (const auto& c : structure.checks) verdict(c, "structure_" + kernel_name(k) + "_");
      json entry = to_json(h, space());
      entry["structure"] = to_json(structure);
      json files = json::array();
      for (std::size_t level = 0; level < h.levels().size(); ++level) {
        const std::string file = "cda_" + kernel_name(k) + "_level" + std::to_string(level) + ".dot";
        write_text(file, export_dot(h, level), "cda");
        files.push_back(file);
      }
      entry["dot_files"] = files;
      out[kernel_name(k)] = entry;
    }
    results()["cda"] = out;
  }

  void compare() {
    const auto cmp = compare_hierarchies(hierarchy(Kernel::LogLinear), hierarchy(Kernel::Metropolis));
    verdict(cmp.exit_dominance, "compare_");
    verdict(cmp.mixing_dominance, "compare_");
    verdict(cmp.altitude_dominance, "compare_");
    results()["compare"] = to_json(cmp, space());
  }

  void validate() {
    json out = json::object();
    json regularity = json::array();
    for (auto k : config_.kernels)
      for (double T : config_.temperatures) {
        const auto rep = verify_regularity(model(k, T));
        json checks = json::array();
        for (const auto& c : rep.checks) {
          checks.push_back(to_json(c));
          verdict(c, "regularity_" + kernel_name(k) + "_" + tag(T) + "_");
        }
        regularity.push_back({{"kernel", kernel_name(k)}, {"temperature", T}, {"gamma_lll", num(rep.gamma_lll)},
                              {"gamma_ml", num(rep.gamma_ml)}, {"checks", checks}});
      }
    out["regularity"] = regularity;

    if (config_.options.exit_validation) {
      const auto& ev = *config_.options.exit_validation;
      json exits = json::object();
      for (auto k : config_.kernels) {
        const auto& h = hierarchy(k);
        std::vector<StateIndex> members = ev.cycle;
        std::optional<std::size_t> node;
        if (members.empty()) {
          for (std::size_t id = 0; id < h.nodes().size(); ++id)
            if (id != h.root() && h.node(id).size() > 1) {
              node = id;
              members = h.node(id).members;
              break;
            }
        } else {
          for (auto s : members)
            if (s >= space().size()) throw ConfigError("options.exit_validation.cycle: state index out of range");
          node = h.find(members);
        }
        if (members.empty()) {
          exits[kernel_name(k)] = {{"skipped", "hierarchy has no nontrivial proper cycle"}};
          continue;
        }
        auto reg = empirical_exit_validation(game(), k, members, ev.temperatures, ev.trials, config_.seeds.front(),
                                             build_options());
        json entry;
        if (node) {
          reg.expected_height = h.node(*node).exit_height;
          entry = to_json(reg, space());
          entry["relative_slope_error"] = num(std::abs(reg.slope - reg.expected_height) / reg.expected_height);
        } else {
          entry = to_json(reg, space());
          entry["note"] = "set is not a cycle of this hierarchy";
        }
        exits[kernel_name(k)] = entry;
      }
      out["exit_times"] = exits;
    }
    results()["validate"] = out;
  }

  json& results() { return report_["results"]; }

  const ExperimentConfig& config_;
  LoadedGame loaded_;
  RunManifest manifest_;
  json report_ = json::object();
  json extra_constants_ = json::object();
  std::vector<json> verdicts_;
  std::string current_op_;
  std::map<std::pair<int, double>, TransitionModel> models_;
  std::map<Kernel, ZeroCostGraph> zero_;
  std::map<Kernel, CycleHierarchy> hierarchies_;
  std::optional<std::vector<StateIndex>> nash_;
};

}  // namespace detail

/// Executes the configured operations in dependency order and writes
/// report.json, manifest.json and the per-operation CSV/DOT artifacts.
inline RunManifest run(const ExperimentConfig& config) {
  config.validate();
  detail::Runner runner(config);
  return runner.run();
}

}  // namespace learndyn

#endif  // LEARNDYN_EXPERIMENT_HPP
