#ifndef LEARNDYN_DYNAMICS_HPP
#define LEARNDYN_DYNAMICS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "learndyn/errors.hpp"
#include "learndyn/game.hpp"
#include "learndyn/rng.hpp"

namespace learndyn {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();
inline constexpr double kZeroCostTolerance = 1e-9;

enum class Kernel { LogLinear, Metropolis };

inline std::string kernel_name(Kernel k) { return k == Kernel::LogLinear ? "LLL" : "ML"; }

inline Kernel parse_kernel(std::string_view s) {
  if (s == "lll" || s == "LLL" || s == "log-linear") return Kernel::LogLinear;
  if (s == "ml" || s == "ML" || s == "metropolis") return Kernel::Metropolis;
  throw ArgumentError("unknown kernel '" + std::string(s) + "' (expected lll or ml)");
}

inline void require_temperature(double T) {
  if (!(T > 0.0) || !std::isfinite(T)) throw ArgumentError("temperature must be positive and finite");
}

/// Log-linear revision of player i at profile a: the probability of each
/// alpha' in A_i, proportional to exp(-(U_i(alpha*,a_-i) - U_i(alpha',a_-i)) / T).
inline std::vector<double> lll_step_distribution(const GameDefinition& game, std::size_t player,
                                                 const ActionProfile& a, double T) {
  require_temperature(T);
  if (player >= game.players()) throw ArgumentError("player index out of range");
  const auto u = utilities_over_actions(game, player, a);
  const double best = *std::max_element(u.begin(), u.end());
  std::vector<double> p(u.size());
  double z = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) z += p[k] = std::exp(-(best - u[k]) / T);
  for (auto& v : p) v /= z;
  return p;
}

/// Metropolis acceptance min{1, exp(-[U_i(alpha,a_-i) - U_i(alpha',a_-i)]^+ / T)}.
inline double ml_accept_probability(const GameDefinition& game, std::size_t player, const ActionProfile& a,
                                    std::size_t proposed, double T) {
  require_temperature(T);
  if (player >= game.players()) throw ArgumentError("player index out of range");
  const double loss = game.utility(player, a) - game.utility(player, a.with(player, proposed));
  return loss > 0.0 ? std::exp(-loss / T) : 1.0;
}

/// The player whose action differs between s and t, or nullopt when the
/// profiles are equal or differ in more than one coordinate.
inline std::optional<std::size_t> deviating_player(const ProfileSpace& space, StateIndex s, StateIndex t) {
  std::optional<std::size_t> who;
  for (std::size_t i = 0; i < space.players(); ++i)
    if (space.action_of(s, i) != space.action_of(t, i)) {
      if (who) return std::nullopt;
      who = i;
    }
  return who;
}

/// V(a, a') of the given kernel, computed straight from the utilities.
/// +inf when the profiles are not Hamming neighbors.
inline double transition_cost(const GameDefinition& game, Kernel kernel, StateIndex from, StateIndex to) {
  const auto& space = game.space();
  if (from == to) throw ArgumentError("transition cost is undefined for identical profiles");
  const auto who = deviating_player(space, from, to);
  if (!who) return kInfinity;
  const ActionProfile a = space.profile(from);
  const ActionProfile b = space.profile(to);
  if (kernel == Kernel::Metropolis) return std::max(0.0, game.utility(*who, a) - game.utility(*who, b));
  const auto u = utilities_over_actions(game, *who, a);
  return *std::max_element(u.begin(), u.end()) - u[b[*who]];
}

/// Z_max = max over players and opponent profiles of Z_i(a_-i).
inline double lll_z_max(const GameDefinition& game, double T, std::size_t cap = kDefaultStateCap) {
  require_temperature(T);
  game.require_enumerable(cap);
  const auto& space = game.space();
  double z_max = 1.0;
  for (StateIndex s = 0; s < space.size(); ++s) {
    ActionProfile a = space.profile(s);
    for (std::size_t i = 0; i < game.players(); ++i) {
      if (a[i] != 0) continue;  // visit each a_-i once
      const auto u = utilities_over_actions(game, i, a);
      const double best = *std::max_element(u.begin(), u.end());
      double z = 0.0;
      for (double v : u) z += std::exp(-(best - v) / T);
      z_max = std::max(z_max, z);
    }
  }
  return z_max;
}

inline double ml_gamma(const GameDefinition& game) {
  return 1.0 / (static_cast<double>(game.players()) * static_cast<double>(game.space().max_actions()));
}

inline double lll_gamma(const GameDefinition& game, double T, std::size_t cap = kDefaultStateCap) {
  return 1.0 / (static_cast<double>(game.players()) * lll_z_max(game, T, cap));
}

struct Transition {
  StateIndex target = 0;
  std::size_t player = 0;
  std::size_t action = 0;  // the deviating player's new action
  double probability = 0.0;
  double log_probability = 0.0;
  double cost = 0.0;
};

struct BuildOptions {
  std::size_t state_cap = kDefaultStateCap;
  // Above this many states Gamma_LLL falls back to 1/(n |A|_max).
  std::size_t z_max_cap = kDefaultStateCap;
  double zero_tolerance = kZeroCostTolerance;
  bool reject_equal_potential_neighbors = true;
};

/// Exact transition structure of one learning kernel at one temperature:
/// off-diagonal entries in CSR form (Hamming-1 targets only), the residual
/// diagonal, the cost V of each edge and the constant Gamma_T.
class TransitionModel {
 public:
  Kernel kernel() const noexcept { return kernel_; }
  double temperature() const noexcept { return temperature_; }
  const GameDefinition& game() const noexcept { return game_; }
  const ProfileSpace& space() const noexcept { return game_.space(); }
  std::size_t size() const noexcept { return stay_.size(); }

  double gamma() const noexcept { return gamma_; }
  /// Z_max for LLL models (1 for ML).
  double z_max() const noexcept { return z_max_; }
  bool gamma_is_fallback() const noexcept { return gamma_fallback_; }
  double zero_tolerance() const noexcept { return zero_tolerance_; }

  std::span<const Transition> row(StateIndex s) const {
    return {edges_.data() + row_start_.at(s), edges_.data() + row_start_.at(s + 1)};
  }
  std::size_t edge_count() const noexcept { return edges_.size(); }

  double stay_probability(StateIndex s) const { return stay_.at(s); }
  /// Total off-diagonal mass of row s, summed directly (no cancellation).
  double leave_probability(StateIndex s) const { return leave_.at(s); }

  const Transition* find(StateIndex s, StateIndex t) const {
    for (const auto& e : row(s))
      if (e.target == t) return &e;
    return nullptr;
  }

  double probability(StateIndex s, StateIndex t) const {
    if (s == t) return stay_probability(s);
    const auto* e = find(s, t);
    return e ? e->probability : 0.0;
  }

  double cost(StateIndex s, StateIndex t) const {
    if (s == t) throw ArgumentError("edge cost is undefined for identical profiles");
    if (s >= size() || t >= size()) throw ArgumentError("state index out of range");
    const auto* e = find(s, t);
    return e ? e->cost : kInfinity;
  }

  bool has_potential() const noexcept { return !potential_.empty(); }
  const std::vector<double>& potential() const {
    if (potential_.empty()) throw PreconditionError("model's game has no potential oracle");
    return potential_;
  }

  friend TransitionModel build_transition_model(const GameDefinition&, Kernel, double, const BuildOptions&);

 private:
  TransitionModel(GameDefinition game, Kernel kernel, double T) : kernel_(kernel), temperature_(T), game_(std::move(game)) {}

  Kernel kernel_;
  double temperature_;
  GameDefinition game_;
  double gamma_ = 0.0;
  double z_max_ = 1.0;
  bool gamma_fallback_ = false;
  double zero_tolerance_ = kZeroCostTolerance;
  std::vector<std::size_t> row_start_;
  std::vector<Transition> edges_;
  std::vector<double> stay_;
  std::vector<double> leave_;
  std::vector<double> potential_;
};

inline TransitionModel build_transition_model(const GameDefinition& game, Kernel kernel, double T,
                                              const BuildOptions& options = {}) {
  require_temperature(T);
  game.require_enumerable(options.state_cap);
  const auto& space = game.space();
  const std::size_t count = space.size();
  const double n = static_cast<double>(game.players());
  const double log_n = std::log(n);

  TransitionModel model(game, kernel, T);
  model.zero_tolerance_ = options.zero_tolerance;
  model.row_start_.reserve(count + 1);
  model.stay_.resize(count);
  model.leave_.resize(count);
  std::size_t degree = 0;
  for (auto m : space.action_sizes()) degree += m - 1;
  model.edges_.reserve(count * degree);

  double z_max = 1.0;
  for (StateIndex s = 0; s < count; ++s) {
    model.row_start_.push_back(model.edges_.size());
    ActionProfile a = space.profile(s);
    double leave = 0.0;
    for (std::size_t i = 0; i < game.players(); ++i) {
      const auto u = utilities_over_actions(game, i, a);
      const std::size_t current = a[i];
      const double m = static_cast<double>(u.size());
      double best = *std::max_element(u.begin(), u.end());
      double log_z = 0.0;
      if (kernel == Kernel::LogLinear) {
        double z = 0.0;
        for (double v : u) z += std::exp(-(best - v) / T);
        z_max = std::max(z_max, z);
        log_z = std::log(z);
      }
      for (std::size_t alpha = 0; alpha < u.size(); ++alpha) {
        if (alpha == current) continue;
        const StateIndex t = space.with_action(s, i, alpha);
        if (options.reject_equal_potential_neighbors && std::abs(u[current] - u[alpha]) <= options.zero_tolerance)
          throw RejectedGameError("neighbors " + a.to_string() + " and " + a.with(i, alpha).to_string() +
                                  " have equal potential (player " + std::to_string(i) + " is indifferent)");
        Transition e;
        e.target = t;
        e.player = i;
        e.action = alpha;
        if (kernel == Kernel::LogLinear) {
          e.cost = best - u[alpha];
          e.log_probability = -log_n - e.cost / T - log_z;
        } else {
          e.cost = std::max(0.0, u[current] - u[alpha]);
          e.log_probability = -log_n - std::log(m) - e.cost / T;
        }
        e.probability = std::exp(e.log_probability);
        leave += e.probability;
        model.edges_.push_back(e);
      }
    }
    model.leave_[s] = leave;
    model.stay_[s] = 1.0 - leave;
  }
  model.row_start_.push_back(model.edges_.size());

  if (kernel == Kernel::Metropolis) {
    model.gamma_ = ml_gamma(game);
  } else if (count > options.z_max_cap) {
    model.gamma_ = ml_gamma(game);
    model.gamma_fallback_ = true;
  } else {
    model.z_max_ = z_max;
    model.gamma_ = 1.0 / (n * z_max);
  }

  if (game.has_potential()) model.potential_ = game.potential_table(options.state_cap);
  return model;
}

inline double edge_cost(const TransitionModel& model, const ActionProfile& a, const ActionProfile& b) {
  return model.cost(model.space().index(a), model.space().index(b));
}

// ---------------------------------------------------------------------------
// Regularity checks

struct CheckOutcome {
  CheckOutcome() = default;
  explicit CheckOutcome(std::string check_name) : name(std::move(check_name)) {}

  std::string name;
  bool passed = true;
  bool skipped = false;
  std::size_t checked = 0;
  std::size_t failures = 0;
  std::vector<std::string> witnesses;  // first few failures
  std::string note;

  void fail(std::string witness) {
    passed = false;
    ++failures;
    if (witnesses.size() < 5) witnesses.push_back(std::move(witness));
  }
};

struct RegularityReport {
  Kernel kernel = Kernel::LogLinear;
  double temperature = 0.0;
  double gamma_lll = 0.0;
  double gamma_ml = 0.0;
  std::vector<CheckOutcome> checks;

  bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckOutcome& c) { return c.passed; });
  }
  const CheckOutcome& check(std::string_view name) const {
    for (const auto& c : checks)
      if (c.name == name) return c;
    throw ArgumentError("no check named " + std::string(name));
  }
};

/// Verifies, for every distinct pair with finite cost: the Gamma sandwich,
/// weak reversibility against the potential, V_LLL >= V_ML, zero-cost edge
/// inclusion LLL -> ML, Gamma_LLL >= Gamma_ML, row-stochasticity and
/// V = +inf <=> P = 0.
inline RegularityReport verify_regularity(const TransitionModel& model, double reversibility_tol = 1e-9) {
  const auto& game = model.game();
  const auto& space = model.space();
  const double T = model.temperature();
  const double tol = model.zero_tolerance();
  RegularityReport rep;
  rep.kernel = model.kernel();
  rep.temperature = T;
  if (model.kernel() == Kernel::LogLinear) {
    rep.gamma_lll = model.gamma();
    rep.gamma_ml = ml_gamma(game);
  } else {
    rep.gamma_ml = model.gamma();
    rep.gamma_lll = lll_gamma(game, T);
  }

  auto edge_name = [&](StateIndex s, StateIndex t) {
    return space.profile(s).to_string() + "->" + space.profile(t).to_string();
  };

  CheckOutcome rows{"row_stochastic"};
  CheckOutcome support{"structural_support"};
  CheckOutcome sandwich{"gamma_sandwich"};
  CheckOutcome reversibility{"weak_reversibility"};
  CheckOutcome dominance{"resistance_dominance"};
  CheckOutcome inclusion{"zero_cost_inclusion"};
  CheckOutcome gammas{"gamma_dominance"};

  const double log_gamma = std::log(model.gamma());
  const std::vector<double>* phi = model.has_potential() ? &model.potential() : nullptr;
  if (!phi) {
    reversibility.skipped = true;
    reversibility.note = "game has no potential oracle";
  }

  for (StateIndex s = 0; s < model.size(); ++s) {
    double sum = model.stay_probability(s);
    for (const auto& e : model.row(s)) sum += e.probability;
    ++rows.checked;
    if (std::abs(sum - 1.0) > 1e-12) rows.fail("row " + space.profile(s).to_string() + " sums to " + std::to_string(sum));
    if (model.stay_probability(s) < -1e-15) rows.fail("negative diagonal at " + space.profile(s).to_string());

    std::size_t expected_degree = 0;
    for (auto m : space.action_sizes()) expected_degree += m - 1;
    ++support.checked;
    if (model.row(s).size() != expected_degree) support.fail("row " + space.profile(s).to_string() + " has wrong degree");

    for (const auto& e : model.row(s)) {
      const StateIndex t = e.target;
      ++support.checked;
      if (!deviating_player(space, s, t) || !std::isfinite(e.cost) || !std::isfinite(e.log_probability))
        support.fail(edge_name(s, t));

      // Gamma e^{-V/T} <= P <= Gamma^{-1} e^{-V/T}, compared in log space.
      ++sandwich.checked;
      const double slack = 1e-12 * (1.0 + std::abs(e.log_probability));
      if (e.log_probability < log_gamma - e.cost / T - slack || e.log_probability > -log_gamma - e.cost / T + slack)
        sandwich.fail(edge_name(s, t));

      if (phi) {
        const auto* back = model.find(t, s);
        ++reversibility.checked;
        if (!back) {
          reversibility.fail(edge_name(s, t) + " has no reverse edge");
        } else {
          const double lhs = (*phi)[s] - e.cost;
          const double rhs = (*phi)[t] - back->cost;
          if (std::abs(lhs - rhs) > reversibility_tol) reversibility.fail(edge_name(s, t));
        }
      }

      const double v_lll = model.kernel() == Kernel::LogLinear ? e.cost : transition_cost(game, Kernel::LogLinear, s, t);
      const double v_ml = model.kernel() == Kernel::Metropolis ? e.cost : transition_cost(game, Kernel::Metropolis, s, t);
      ++dominance.checked;
      if (v_lll < v_ml - 1e-12) dominance.fail(edge_name(s, t));
      ++inclusion.checked;
      if (v_lll <= tol && v_ml > tol) inclusion.fail(edge_name(s, t));
    }
  }
  ++gammas.checked;
  if (rep.gamma_lll < rep.gamma_ml) gammas.fail("Gamma_LLL=" + std::to_string(rep.gamma_lll) + " < Gamma_ML=" + std::to_string(rep.gamma_ml));

  rep.checks = {rows, support, sandwich, reversibility, dominance, inclusion, gammas};
  return rep;
}

// ---------------------------------------------------------------------------
// Simulation

struct StepRecord {
  std::size_t player = 0;
  std::size_t proposed_action = 0;
  bool accepted = false;
};

struct Trace {
  std::uint64_t seed = 0;
  Kernel kernel = Kernel::LogLinear;
  double temperature = 0.0;
  ActionProfile initial;
  std::vector<StateIndex> states;  // states[0] is the initial profile
  std::vector<StepRecord> steps;   // steps[k] produced states[k + 1]
};

/// One asynchronous revision of the chosen kernel. Random draws per step, in
/// order: player = below(n); then for LLL one uniform01() inverted against
/// the cumulative weights over A_i (action 0 first); for ML the proposal
/// below(|A_i|) followed by one uniform01() acceptance coin, always drawn.
class Sampler {
 public:
  Sampler(const GameDefinition& game, Kernel kernel, double T) : game_(&game), kernel_(kernel), temperature_(T) {
    require_temperature(T);
  }

  Kernel kernel() const noexcept { return kernel_; }
  double temperature() const noexcept { return temperature_; }

  StepRecord step(ActionProfile& a, Rng& rng) const {
    StepRecord rec;
    rec.player = rng.below(game_->players());
    const std::size_t i = rec.player;
    const auto u = utilities_over_actions(*game_, i, a);
    if (kernel_ == Kernel::LogLinear) {
      const double best = *std::max_element(u.begin(), u.end());
      double z = 0.0;
      std::vector<double> w(u.size());
      for (std::size_t k = 0; k < u.size(); ++k) z += w[k] = std::exp(-(best - u[k]) / temperature_);
      const double x = rng.uniform01() * z;
      double acc = 0.0;
      std::size_t pick = u.size() - 1;
      for (std::size_t k = 0; k < u.size(); ++k) {
        acc += w[k];
        if (x < acc) {
          pick = k;
          break;
        }
      }
      rec.proposed_action = pick;
      rec.accepted = true;
    } else {
      rec.proposed_action = rng.below(u.size());
      const double coin = rng.uniform01();
      const double loss = u[a[i]] - u[rec.proposed_action];
      rec.accepted = coin < (loss > 0.0 ? std::exp(-loss / temperature_) : 1.0);
    }
    if (rec.accepted) a[i] = rec.proposed_action;
    return rec;
  }

 private:
  const GameDefinition* game_;
  Kernel kernel_;
  double temperature_;
};

inline Trace simulate(const GameDefinition& game, Kernel kernel, double T, const ActionProfile& a0, std::size_t steps,
                      std::uint64_t seed) {
  game.space().require_valid(a0);
  Sampler sampler(game, kernel, T);
  Rng rng(seed);
  Trace tr;
  tr.seed = seed;
  tr.kernel = kernel;
  tr.temperature = T;
  tr.initial = a0;
  tr.states.reserve(steps + 1);
  tr.steps.reserve(steps);
  ActionProfile a = a0;
  tr.states.push_back(game.space().index(a));
  for (std::size_t k = 0; k < steps; ++k) {
    tr.steps.push_back(sampler.step(a, rng));
    tr.states.push_back(game.space().index(a));
  }
  return tr;
}

inline Trace simulate(const TransitionModel& model, const ActionProfile& a0, std::size_t steps, std::uint64_t seed) {
  return simulate(model.game(), model.kernel(), model.temperature(), a0, steps, seed);
}

/// Steps until `hit(profile)` first holds (0 if it holds at a0), or nullopt
/// after max_steps revisions.
template <typename Predicate>
std::optional<std::size_t> first_hit_steps(const Sampler& sampler, ActionProfile a, Predicate hit, std::size_t max_steps,
                                           Rng& rng) {
  for (std::size_t t = 0;; ++t) {
    if (hit(a)) return t;
    if (t == max_steps) return std::nullopt;
    sampler.step(a, rng);
  }
}

/// CSV columns: step,state_index,player,proposed_action,accepted,potential.
/// Row 0 is the initial state with empty move fields.
inline void write_trace_csv(const Trace& tr, const GameDefinition& game, std::ostream& os) {
  os << "step,state_index,player,proposed_action,accepted,potential\n";
  char buf[64];
  auto pot = [&](StateIndex s) -> std::string {
    if (!game.has_potential()) return "";
    std::snprintf(buf, sizeof buf, "%.17g", game.potential(s));
    return buf;
  };
  os << 0 << ',' << tr.states.front() << ",,,," << pot(tr.states.front()) << '\n';
  for (std::size_t k = 0; k < tr.steps.size(); ++k) {
    const auto& r = tr.steps[k];
    os << k + 1 << ',' << tr.states[k + 1] << ',' << r.player << ',' << r.proposed_action << ','
       << (r.accepted ? 1 : 0) << ',' << pot(tr.states[k + 1]) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Jump-chain sampling of exit times

struct ExitSample {
  double time = 0.0;  // number of steps until the first state outside the set
  bool visited_all = false;
  bool truncated = false;
  StateIndex exit_state = 0;
};

/// Exact sample of the exit time from `inside`, started at `start`. Self-loops
/// are collapsed: the holding time at s is 1 + Geometric(leave(s)) extra
/// steps, then the jump target is drawn proportionally to the off-diagonal
/// row. Statistically identical to step-by-step simulation of the model.
inline ExitSample sample_exit(const TransitionModel& model, StateIndex start, const std::vector<char>& inside, Rng& rng,
                              std::size_t max_jumps = 100'000'000) {
  ExitSample out;
  std::vector<char> seen(model.size(), 0);
  std::size_t members = 0, seen_count = 0;
  for (char c : inside) members += c != 0;
  StateIndex s = start;
  seen[s] = 1;
  seen_count = 1;
  for (std::size_t jump = 0; jump < max_jumps; ++jump) {
    const double q = model.leave_probability(s);
    if (!(q > 0.0)) {
      out.truncated = true;
      return out;
    }
    if (q < 1.0) {
      const double u = 1.0 - rng.uniform01();  // (0, 1]
      out.time += std::floor(std::log(u) / std::log1p(-q));
    }
    out.time += 1.0;
    const double x = rng.uniform01() * q;
    double acc = 0.0;
    const auto row = model.row(s);
    StateIndex next = row.back().target;
    for (const auto& e : row) {
      acc += e.probability;
      if (x < acc) {
        next = e.target;
        break;
      }
    }
    s = next;
    if (!inside[s]) {
      out.exit_state = s;
      out.visited_all = seen_count == members;
      return out;
    }
    if (!seen[s]) {
      seen[s] = 1;
      ++seen_count;
    }
  }
  out.truncated = true;
  return out;
}

}  // namespace learndyn

#endif  // LEARNDYN_DYNAMICS_HPP
