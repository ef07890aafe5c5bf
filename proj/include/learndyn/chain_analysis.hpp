#ifndef LEARNDYN_CHAIN_ANALYSIS_HPP
#define LEARNDYN_CHAIN_ANALYSIS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <boost/math/distributions/students_t.hpp>

#include "learndyn/dynamics.hpp"
#include "learndyn/errors.hpp"
#include "learndyn/game.hpp"
#include "learndyn/rng.hpp"

namespace learndyn {

/// Largest state count solved with dense methods; above it, iterative solvers.
inline constexpr std::size_t kDenseSolveLimit = 4096;

namespace detail {
// BiCGSTAB iterations before a large solve is declared non-convergent.
inline constexpr Eigen::Index kIterationCap = 20000;
}  // namespace detail

struct StationaryDistribution {
  std::vector<double> probabilities;
  double temperature = 0.0;
  std::optional<Kernel> kernel;  // empty for the closed form
};

inline double total_variation(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) throw ArgumentError("total_variation: distributions of different size");
  double s = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) s += std::abs(p[k] - q[k]);
  return 0.5 * s;
}

/// pi(a) = exp(phi(a)/T) / Z, shifted by max phi.
inline StationaryDistribution gibbs(const GameDefinition& game, double T, std::size_t cap = kDefaultStateCap) {
  require_temperature(T);
  if (!game.has_potential()) throw PreconditionError("gibbs: game has no potential oracle");
  const auto phi = game.potential_table(cap);
  const double top = *std::max_element(phi.begin(), phi.end());
  StationaryDistribution out;
  out.temperature = T;
  out.probabilities.resize(phi.size());
  double z = 0.0;
  for (std::size_t s = 0; s < phi.size(); ++s) z += out.probabilities[s] = std::exp((phi[s] - top) / T);
  for (auto& p : out.probabilities) p /= z;
  return out;
}

/// ||pi^T P - pi^T||_1.
inline double stationary_residual(const TransitionModel& model, const std::vector<double>& pi) {
  std::vector<double> flow(model.size(), 0.0);
  for (StateIndex s = 0; s < model.size(); ++s) {
    flow[s] -= pi[s] * model.leave_probability(s);
    for (const auto& e : model.row(s)) flow[e.target] += pi[s] * e.probability;
  }
  double r = 0.0;
  for (double f : flow) r += std::abs(f);
  return r;
}

namespace detail {

// Grassmann-Taksar-Heyman elimination. Only off-diagonal entries are used,
// so no subtractive cancellation even when rows are nearly absorbing.
inline std::vector<double> gth_solve(const TransitionModel& model) {
  const std::size_t n = model.size();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (StateIndex s = 0; s < n; ++s)
    for (const auto& e : model.row(s)) a(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(e.target)) = e.probability;

  for (Eigen::Index k = static_cast<Eigen::Index>(n) - 1; k > 0; --k) {
    const double s = a.row(k).head(k).sum();
    if (!(s > 0.0)) throw NumericError("stationary_solve: chain is reducible");
    a.col(k).head(k) /= s;
    a.topLeftCorner(k, k).noalias() += a.col(k).head(k) * a.row(k).head(k);
  }
  std::vector<double> pi(n, 0.0);
  pi[0] = 1.0;
  for (Eigen::Index k = 1; k < static_cast<Eigen::Index>(n); ++k) {
    double v = 0.0;
    for (Eigen::Index i = 0; i < k; ++i) v += pi[static_cast<std::size_t>(i)] * a(i, k);
    pi[static_cast<std::size_t>(k)] = v;
  }
  double z = 0.0;
  for (double v : pi) z += v;
  for (auto& v : pi) v /= z;
  return pi;
}

// Pins pi(root) = 1 and solves the balance equations of the other states.
inline std::vector<double> sparse_stationary(const TransitionModel& model) {
  const std::size_t n = model.size();
  StateIndex root = 0;
  if (model.has_potential()) {
    const auto& phi = model.potential();
    root = static_cast<StateIndex>(std::max_element(phi.begin(), phi.end()) - phi.begin());
  }
  auto reduced = [root](StateIndex s) { return static_cast<Eigen::Index>(s < root ? s : s - 1); };

  std::vector<Eigen::Triplet<double>> trips;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n - 1));
  for (StateIndex s = 0; s < n; ++s) {
    if (s != root) trips.emplace_back(reduced(s), reduced(s), model.leave_probability(s));
    for (const auto& e : model.row(s)) {
      if (e.target == root) continue;
      if (s == root)
        rhs[reduced(e.target)] += e.probability;
      else
        trips.emplace_back(reduced(e.target), reduced(s), -e.probability);
    }
  }
  Eigen::SparseMatrix<double> a(static_cast<Eigen::Index>(n - 1), static_cast<Eigen::Index>(n - 1));
  a.setFromTriplets(trips.begin(), trips.end());
  Eigen::BiCGSTAB<Eigen::SparseMatrix<double>> solver;
  solver.setTolerance(1e-14);
  solver.setMaxIterations(kIterationCap);
  solver.compute(a);
  // Warm start from the Gibbs ratios when a potential is known; the caller's
  // residual check still judges the result against the chain itself.
  Eigen::VectorXd guess = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n - 1));
  if (model.has_potential()) {
    const auto& phi = model.potential();
    for (StateIndex s = 0; s < n; ++s)
      if (s != root) guess[reduced(s)] = std::exp((phi[s] - phi[root]) / model.temperature());
  }
  const Eigen::VectorXd x = solver.solveWithGuess(rhs, guess);
  if (solver.info() != Eigen::Success)
    throw NumericError("stationary_solve: iterative solver did not converge after " +
                       std::to_string(solver.iterations()) + " iterations");
  std::vector<double> pi(n);
  double z = 1.0;
  pi[root] = 1.0;
  for (StateIndex s = 0; s < n; ++s)
    if (s != root) z += pi[s] = std::max(0.0, x[reduced(s)]);
  for (auto& v : pi) v /= z;
  return pi;
}

}  // namespace detail

/// Left fixed point of the model. Dense GTH up to kDenseSolveLimit states,
/// Jacobi-preconditioned BiCGSTAB above.
inline StationaryDistribution stationary_solve(const TransitionModel& model, double residual_tol = 1e-10) {
  StationaryDistribution out;
  out.temperature = model.temperature();
  out.kernel = model.kernel();
  if (model.size() == 1) {
    out.probabilities = {1.0};
    return out;
  }
  out.probabilities = model.size() <= kDenseSolveLimit ? detail::gth_solve(model) : detail::sparse_stationary(model);
  const double r = stationary_residual(model, out.probabilities);
  if (!(r <= residual_tol)) throw NumericError("stationary_solve: residual " + std::to_string(r) + " above tolerance");
  return out;
}

// ---------------------------------------------------------------------------
// Hitting times

inline std::vector<char> state_mask(std::size_t size, const std::vector<StateIndex>& members) {
  std::vector<char> mask(size, 0);
  for (auto s : members) {
    if (s >= size) throw ArgumentError("state index out of range");
    mask[s] = 1;
  }
  return mask;
}

/// Expected steps to reach `target` from every state:
/// h = 0 on the target, h(a) = 1 + sum_a' P(a,a') h(a') elsewhere.
inline std::vector<double> exact_hitting_times(const TransitionModel& model, const std::vector<StateIndex>& target) {
  if (target.empty()) throw ArgumentError("exact_hitting_times: target set is empty");
  const auto in_target = state_mask(model.size(), target);
  std::vector<std::size_t> slot(model.size(), 0);
  std::vector<StateIndex> free;
  for (StateIndex s = 0; s < model.size(); ++s)
    if (!in_target[s]) {
      slot[s] = free.size();
      free.push_back(s);
    }
  std::vector<double> h(model.size(), 0.0);
  if (free.empty()) return h;
  const auto m = static_cast<Eigen::Index>(free.size());
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(m);
  Eigen::VectorXd x;

  // Diagonal is the leave probability, accumulated without cancellation.
  if (free.size() <= kDenseSolveLimit) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, m);
    for (std::size_t r = 0; r < free.size(); ++r) {
      const auto s = free[r];
      a(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(r)) = model.leave_probability(s);
      for (const auto& e : model.row(s))
        if (!in_target[e.target]) a(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(slot[e.target])) -= e.probability;
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
    x = lu.solve(ones);
    x += lu.solve(ones - a * x);  // one refinement step
    const double res = (a * x - ones).lpNorm<Eigen::Infinity>();
    if (!std::isfinite(res) || res > 1e-9 * std::max(1.0, x.lpNorm<Eigen::Infinity>()))
      throw NumericError("exact_hitting_times: singular or ill-conditioned system (residual " + std::to_string(res) + ")");
  } else {
    std::vector<Eigen::Triplet<double>> trips;
    for (std::size_t r = 0; r < free.size(); ++r) {
      const auto s = free[r];
      trips.emplace_back(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(r), model.leave_probability(s));
      for (const auto& e : model.row(s))
        if (!in_target[e.target])
          trips.emplace_back(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(slot[e.target]), -e.probability);
    }
    Eigen::SparseMatrix<double> a(m, m);
    a.setFromTriplets(trips.begin(), trips.end());
    Eigen::BiCGSTAB<Eigen::SparseMatrix<double>> solver;
    solver.setTolerance(1e-14);
    solver.setMaxIterations(detail::kIterationCap);
    solver.compute(a);
    x = solver.solve(ones);
    const double res = (a * x - ones).lpNorm<Eigen::Infinity>();
    if (solver.info() != Eigen::Success || !std::isfinite(res) || res > 1e-9 * std::max(1.0, x.lpNorm<Eigen::Infinity>()))
      throw NumericError("exact_hitting_times: iterative solver did not converge");
  }
  for (std::size_t r = 0; r < free.size(); ++r) h[free[r]] = x[static_cast<Eigen::Index>(r)];
  return h;
}

struct MonteCarloEstimate {
  std::size_t trials = 0;
  std::size_t censored = 0;  // trials that hit max_steps; excluded from the mean
  double mean = 0.0;
  double std_error = 0.0;
  std::vector<double> samples;

  double ci_low() const { return mean - 1.96 * std_error; }
  double ci_high() const { return mean + 1.96 * std_error; }
};

inline MonteCarloEstimate summarize(std::vector<double> samples, std::size_t trials) {
  MonteCarloEstimate out;
  out.trials = trials;
  out.censored = trials - samples.size();
  const double k = static_cast<double>(samples.size());
  if (k > 0) {
    double sum = 0.0;
    for (double v : samples) sum += v;
    out.mean = sum / k;
  }
  if (k > 1) {
    double ss = 0.0;
    for (double v : samples) ss += (v - out.mean) * (v - out.mean);
    out.std_error = std::sqrt(ss / (k - 1.0) / k);
  }
  out.samples = std::move(samples);
  return out;
}

/// Step counts until the first visit to `target`, one trace per trial. Trial
/// k uses seed derive_seed(seed, k).
inline MonteCarloEstimate monte_carlo_hitting(const GameDefinition& game, Kernel kernel, double T,
                                              const ActionProfile& a0, const std::vector<char>& target,
                                              std::size_t trials, std::uint64_t seed,
                                              std::size_t max_steps = 10'000'000) {
  game.space().require_valid(a0);
  if (target.size() != game.space().size()) throw ArgumentError("target mask does not match the state space");
  Sampler sampler(game, kernel, T);
  const auto& space = game.space();
  std::vector<double> samples;
  samples.reserve(trials);
  for (std::size_t k = 0; k < trials; ++k) {
    Rng rng(derive_seed(seed, k));
    auto steps = first_hit_steps(sampler, a0, [&](const ActionProfile& a) { return target[space.index(a)] != 0; },
                                 max_steps, rng);
    if (steps) samples.push_back(static_cast<double>(*steps));
  }
  return summarize(std::move(samples), trials);
}

inline MonteCarloEstimate monte_carlo_hitting(const TransitionModel& model, const ActionProfile& a0,
                                              const std::vector<StateIndex>& target, std::size_t trials,
                                              std::uint64_t seed, std::size_t max_steps = 10'000'000) {
  return monte_carlo_hitting(model.game(), model.kernel(), model.temperature(), a0,
                             state_mask(model.size(), target), trials, seed, max_steps);
}

/// One-sided Welch test of H1: mean(a) < mean(b). Returns the p-value.
inline double welch_one_sided_less(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() < 2 || b.size() < 2) throw ArgumentError("welch test needs at least two samples per group");
  auto moments = [](const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::pair{m, ss / static_cast<double>(v.size() - 1)};
  };
  const auto [ma, va] = moments(a);
  const auto [mb, vb] = moments(b);
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double se2 = va / na + vb / nb;
  if (se2 == 0.0) return ma < mb ? 0.0 : 1.0;
  const double t = (ma - mb) / std::sqrt(se2);
  const double df = se2 * se2 / ((va / na) * (va / na) / (na - 1.0) + (vb / nb) * (vb / nb) / (nb - 1.0));
  return boost::math::cdf(boost::math::students_t(df), t);
}

// ---------------------------------------------------------------------------
// Zero-cost paths

struct ZeroCostGraph {
  Kernel kernel = Kernel::LogLinear;
  std::vector<std::vector<StateIndex>> successors;  // edges with V <= zero tolerance
  std::vector<char> in_target;
  std::vector<std::size_t> sigma;  // shortest zero-cost path length to M
  std::vector<std::size_t> xi;     // longest zero-cost path length to M

  std::size_t edge_count() const {
    std::size_t c = 0;
    for (const auto& s : successors) c += s.size();
    return c;
  }
  std::size_t sigma_max() const { return sigma.empty() ? 0 : *std::max_element(sigma.begin(), sigma.end()); }
  std::size_t xi_max() const { return xi.empty() ? 0 : *std::max_element(xi.begin(), xi.end()); }
};

inline ZeroCostGraph zero_cost_stats(const TransitionModel& model, const std::vector<StateIndex>& nash) {
  const std::size_t n = model.size();
  const auto& space = model.space();
  ZeroCostGraph g;
  g.kernel = model.kernel();
  g.in_target = state_mask(n, nash);
  g.successors.resize(n);
  std::vector<std::vector<StateIndex>> predecessors(n);
  std::vector<std::size_t> out_degree(n, 0);
  for (StateIndex s = 0; s < n; ++s)
    for (const auto& e : model.row(s))
      if (e.cost <= model.zero_tolerance()) {
        if (g.in_target[s])
          throw InvariantViolation("zero-cost edge leaves Nash state " + space.profile(s).to_string());
        g.successors[s].push_back(e.target);
        predecessors[e.target].push_back(s);
        ++out_degree[s];
      }

  constexpr auto unset = static_cast<std::size_t>(-1);
  g.sigma.assign(n, unset);
  std::deque<StateIndex> queue;
  for (StateIndex s = 0; s < n; ++s)
    if (g.in_target[s]) {
      g.sigma[s] = 0;
      queue.push_back(s);
    }
  while (!queue.empty()) {
    const auto v = queue.front();
    queue.pop_front();
    for (auto u : predecessors[v])
      if (g.sigma[u] == unset) {
        g.sigma[u] = g.sigma[v] + 1;
        queue.push_back(u);
      }
  }
  for (StateIndex s = 0; s < n; ++s)
    if (g.sigma[s] == unset)
      throw InvariantViolation("state " + space.profile(s).to_string() + " has no zero-cost path to the Nash set");

  // Longest path by reverse topological order (Kahn on out-degrees).
  g.xi.assign(n, 0);
  std::vector<std::size_t> remaining = out_degree;
  std::size_t processed = 0;
  for (StateIndex s = 0; s < n; ++s)
    if (remaining[s] == 0) queue.push_back(s);
  while (!queue.empty()) {
    const auto v = queue.front();
    queue.pop_front();
    ++processed;
    for (auto u : predecessors[v]) {
      g.xi[u] = std::max(g.xi[u], g.xi[v] + 1);
      if (--remaining[u] == 0) queue.push_back(u);
    }
  }
  if (processed != n) throw InvariantViolation("zero-cost graph contains a cycle");
  return g;
}

inline ZeroCostGraph zero_cost_stats(const TransitionModel& model) {
  return zero_cost_stats(model, enumerate_nash(model.game()).members);
}

struct HittingBound {
  std::size_t eta = 0;
  double gamma = 0.0;
  double bound = 0.0;      // eta / Gamma^eta
  double log_bound = 0.0;  // natural log of the bound (-inf when eta = 0)
  bool eta_out_of_range = false;  // eta >= |A|
};

/// Closed form of int_0^inf (1 - Gamma^eta)^floor(t/eta) dt = eta / Gamma^eta.
inline HittingBound hitting_bound(const TransitionModel& model, const ZeroCostGraph& stats) {
  HittingBound b;
  b.eta = stats.sigma_max();
  b.gamma = model.gamma();
  const double eta = static_cast<double>(b.eta);
  b.log_bound = b.eta == 0 ? -kInfinity : std::log(eta) - eta * std::log(b.gamma);
  b.bound = b.eta == 0 ? 0.0 : eta / std::pow(b.gamma, eta);
  b.eta_out_of_range = b.eta >= model.size();
  return b;
}

struct MplrVerdict {
  std::optional<double> mplr;  // undefined when every state is a Nash equilibrium
  std::optional<StateIndex> argmax;
  double gamma_lll = 0.0;
  double lhs = 0.0;      // |A|_min
  double log_rhs = 0.0;  // log of (1/n) (1/Gamma_LLL)^MPLR
  bool holds = false;

  double rhs() const { return std::exp(log_rhs); }
};

/// MPLR = max over non-Nash a of xi_LLL(a) / sigma_ML(a) and the sufficient
/// condition |A|_min >= (1/n) (1/Gamma_LLL)^MPLR.
inline MplrVerdict mplr_condition(const TransitionModel& lll, const ZeroCostGraph& lll_stats,
                                  const ZeroCostGraph& ml_stats) {
  if (lll.kernel() != Kernel::LogLinear) throw ArgumentError("mplr_condition: first model must be LLL");
  if (lll_stats.xi.size() != ml_stats.sigma.size() || lll_stats.xi.size() != lll.size())
    throw ArgumentError("mplr_condition: statistics over different state spaces");
  MplrVerdict v;
  v.gamma_lll = lll.gamma();
  v.lhs = static_cast<double>(lll.space().min_actions());
  for (StateIndex s = 0; s < lll.size(); ++s) {
    if (ml_stats.in_target[s]) continue;
    const double r = static_cast<double>(lll_stats.xi[s]) / static_cast<double>(ml_stats.sigma[s]);
    if (!v.mplr || r > *v.mplr) {
      v.mplr = r;
      v.argmax = s;
    }
  }
  if (!v.mplr) return v;
  v.log_rhs = -std::log(static_cast<double>(lll.game().players())) - *v.mplr * std::log(v.gamma_lll);
  v.holds = std::log(v.lhs) >= v.log_rhs - 1e-12;
  return v;
}

inline MplrVerdict mplr_condition(const GameDefinition& game, double T, const BuildOptions& options = {}) {
  const auto nash = enumerate_nash(game, options.state_cap).members;
  const auto lll = build_transition_model(game, Kernel::LogLinear, T, options);
  const auto ml = build_transition_model(game, Kernel::Metropolis, T, options);
  return mplr_condition(lll, zero_cost_stats(lll, nash), zero_cost_stats(ml, nash));
}

}  // namespace learndyn

#endif  // LEARNDYN_CHAIN_ANALYSIS_HPP
