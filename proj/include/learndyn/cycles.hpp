#ifndef LEARNDYN_CYCLES_HPP
#define LEARNDYN_CYCLES_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "learndyn/chain_analysis.hpp"
#include "learndyn/dynamics.hpp"
#include "learndyn/errors.hpp"
#include "learndyn/format.hpp"
#include "learndyn/rng.hpp"

namespace learndyn {

/// Finite-cost transitions V(x, y) between base states, with a potential per state.
class CostGraph {
 public:
  using Edge = std::pair<StateIndex, double>;

  CostGraph(std::vector<double> phi, std::vector<std::vector<Edge>> rows, std::vector<std::string> names = {})
      : phi_(std::move(phi)), rows_(std::move(rows)), names_(std::move(names)) {
    if (rows_.size() != phi_.size()) throw ArgumentError("cost graph: one row per state is required");
    if (phi_.empty()) throw ArgumentError("cost graph: empty state space");
    if (names_.empty())
      for (StateIndex s = 0; s < phi_.size(); ++s) names_.push_back(std::to_string(s));
    if (names_.size() != phi_.size()) throw ArgumentError("cost graph: one name per state is required");
    for (StateIndex s = 0; s < rows_.size(); ++s) {
      auto& row = rows_[s];
      std::sort(row.begin(), row.end());
      for (std::size_t k = 0; k < row.size(); ++k) {
        const auto [t, v] = row[k];
        if (t >= phi_.size() || t == s) throw ArgumentError("cost graph: bad edge from state " + std::to_string(s));
        if (!(v >= 0.0) || std::isinf(v)) throw ArgumentError("cost graph: costs must be finite and nonnegative");
        if (k && row[k - 1].first == t) throw ArgumentError("cost graph: duplicate edge from state " + std::to_string(s));
      }
    }
  }

  /// From a dense table; +inf marks a missing transition, the diagonal is ignored.
  static CostGraph from_matrix(const std::vector<std::vector<double>>& v, std::vector<double> phi,
                               std::vector<std::string> names = {}) {
    std::vector<std::vector<Edge>> rows(v.size());
    for (StateIndex s = 0; s < v.size(); ++s) {
      if (v[s].size() != v.size()) throw ArgumentError("cost matrix must be square");
      for (StateIndex t = 0; t < v.size(); ++t)
        if (t != s && std::isfinite(v[s][t])) rows[s].emplace_back(t, v[s][t]);
    }
    return CostGraph(std::move(phi), std::move(rows), std::move(names));
  }

  static CostGraph from_model(const TransitionModel& model) {
    std::vector<std::vector<Edge>> rows(model.size());
    std::vector<std::string> names;
    for (StateIndex s = 0; s < model.size(); ++s) {
      for (const auto& e : model.row(s)) rows[s].emplace_back(e.target, e.cost);
      names.push_back(model.space().profile(s).to_string());
    }
    return CostGraph(model.potential(), std::move(rows), std::move(names));
  }

  std::size_t size() const noexcept { return phi_.size(); }
  const std::vector<double>& potential() const noexcept { return phi_; }
  double potential(StateIndex s) const { return phi_.at(s); }
  const std::vector<Edge>& row(StateIndex s) const { return rows_.at(s); }
  const std::string& name(StateIndex s) const { return names_.at(s); }

  double cost(StateIndex s, StateIndex t) const {
    for (const auto& [u, v] : row(s))
      if (u == t) return v;
    return kInfinity;
  }

 private:
  std::vector<double> phi_;
  std::vector<std::vector<Edge>> rows_;
  std::vector<std::string> names_;
};

/// Tarjan's algorithm (iterative). Returns the component id of every vertex;
/// ids are assigned in reverse topological order of the condensation.
inline std::vector<std::size_t> strongly_connected_components(const std::vector<std::vector<std::size_t>>& adj,
                                                              std::size_t* count = nullptr) {
  const std::size_t n = adj.size();
  constexpr auto unset = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> index(n, unset), low(n, 0), comp(n, unset);
  std::vector<char> on_stack(n, 0);
  std::vector<std::size_t> stack;
  std::vector<std::pair<std::size_t, std::size_t>> call;  // (vertex, next edge)
  std::size_t next_index = 0, components = 0;
  for (std::size_t root = 0; root < n; ++root) {
    if (index[root] != unset) continue;
    call.emplace_back(root, 0);
    while (!call.empty()) {
      auto& [v, edge] = call.back();
      if (edge == 0 && index[v] == unset) {
        index[v] = low[v] = next_index++;
        stack.push_back(v);
        on_stack[v] = 1;
      }
      if (edge < adj[v].size()) {
        const std::size_t w = adj[v][edge++];
        if (index[w] == unset) {
          call.emplace_back(w, 0);
        } else if (on_stack[w]) {
          low[v] = std::min(low[v], index[w]);
        }
        continue;
      }
      if (low[v] == index[v]) {
        std::size_t w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = 0;
          comp[w] = components;
        } while (w != v);
        ++components;
      }
      const std::size_t done = v;
      call.pop_back();
      if (!call.empty()) low[call.back().first] = std::min(low[call.back().first], low[done]);
    }
  }
  if (count) *count = components;
  return comp;
}

struct CycleNode {
  std::vector<StateIndex> members;  // sorted
  std::size_t order = 0;            // first level containing the cycle
  std::size_t last_level = 0;       // last level containing the cycle
  double exit_height = 0.0;         // +inf for the whole space
  double mixing_height = 0.0;
  double potential = 0.0;
  std::vector<std::size_t> children;  // maximal proper partition, as node ids
  std::optional<std::size_t> parent;

  std::size_t size() const noexcept { return members.size(); }
  bool contains(StateIndex s) const { return std::binary_search(members.begin(), members.end(), s); }
};

struct CycleLevel {
  std::vector<std::size_t> cycles;                                // node ids, ordered by minimal member
  std::vector<double> exit_costs;                                 // H_e^k per position
  std::vector<std::vector<std::pair<std::size_t, double>>> costs;  // V^k rows, by position

  std::size_t size() const noexcept { return cycles.size(); }
  double cost(std::size_t i, std::size_t j) const {
    for (const auto& [t, v] : costs.at(i))
      if (t == j) return v;
    return kInfinity;
  }
  double reduced_cost(std::size_t i, std::size_t j) const { return cost(i, j) - exit_costs.at(i); }
};

class CycleHierarchy {
 public:
  const CostGraph& graph() const noexcept { return graph_; }
  const std::vector<CycleNode>& nodes() const noexcept { return nodes_; }
  const CycleNode& node(std::size_t id) const { return nodes_.at(id); }
  const std::vector<CycleLevel>& levels() const noexcept { return levels_; }
  const CycleLevel& level(std::size_t k) const { return levels_.at(k); }
  /// n_S: index of the final level {S}.
  std::size_t depth() const noexcept { return levels_.size() - 1; }
  std::size_t root() const noexcept { return levels_.back().cycles.front(); }
  double tolerance() const noexcept { return tolerance_; }

  /// Position of the level-k cycle holding state s.
  std::size_t position(std::size_t k, StateIndex s) const {
    const auto& lv = level(k);
    for (std::size_t p = 0; p < lv.size(); ++p)
      if (nodes_[lv.cycles[p]].contains(s)) return p;
    throw ArgumentError("state index out of range");
  }

  std::optional<std::size_t> find(const std::vector<StateIndex>& members) const {
    auto sorted = members;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t id = 0; id < nodes_.size(); ++id)
      if (nodes_[id].members == sorted) return id;
    return std::nullopt;
  }

  /// The smallest cycle containing both states.
  std::size_t smallest_common(StateIndex x, StateIndex y) const {
    std::vector<char> above(nodes_.size(), 0);
    for (std::optional<std::size_t> id = x; id; id = nodes_[*id].parent) above[*id] = 1;
    for (std::optional<std::size_t> id = y; id; id = nodes_[*id].parent)
      if (above[*id]) return *id;
    throw InvariantViolation("cycle tree has no common ancestor");
  }

  friend CycleHierarchy decompose(const CostGraph&, double);

 private:
  explicit CycleHierarchy(CostGraph g) : graph_(std::move(g)) {}

  CostGraph graph_;
  std::vector<CycleNode> nodes_;
  std::vector<CycleLevel> levels_;
  double tolerance_ = kZeroCostTolerance;
};

/// Weak reversibility phi(x) - V(x,y) = phi(y) - V(y,x) on every finite edge,
/// with the reverse edge required to exist.
inline CheckOutcome check_weak_reversibility(const CostGraph& g, double tol = 1e-9) {
  CheckOutcome out{"weak_reversibility"};
  for (StateIndex s = 0; s < g.size(); ++s)
    for (const auto& [t, v] : g.row(s)) {
      ++out.checked;
      const double back = g.cost(t, s);
      if (!std::isfinite(back) || std::abs((g.potential(s) - v) - (g.potential(t) - back)) > tol)
        out.fail(g.name(s) + "->" + g.name(t));
    }
  return out;
}

/// Cycle decomposition of a weakly reversible, irreducible cost graph.
inline CycleHierarchy decompose(const CostGraph& graph, double tol = kZeroCostTolerance) {
  const std::size_t n = graph.size();
  {
    std::vector<std::vector<std::size_t>> adj(n);
    for (StateIndex s = 0; s < n; ++s)
      for (const auto& [t, v] : graph.row(s)) adj[s].push_back(t);
    std::size_t count = 0;
    strongly_connected_components(adj, &count);
    if (count != 1) throw PreconditionError("decompose: cost graph is not irreducible (" + std::to_string(count) + " classes)");
    const auto rev = check_weak_reversibility(graph);
    if (!rev.passed) throw PreconditionError("decompose: weak reversibility fails on " + rev.witnesses.front());
  }

  CycleHierarchy h(graph);
  h.tolerance_ = tol;
  const auto& phi = graph.potential();

  CycleLevel base;
  for (StateIndex s = 0; s < n; ++s) {
    CycleNode node;
    node.members = {s};
    node.potential = phi[s];
    h.nodes_.push_back(node);
    base.cycles.push_back(s);
    base.costs.emplace_back(graph.row(s).begin(), graph.row(s).end());
  }
  h.levels_.push_back(std::move(base));

  while (h.levels_.back().size() > 1) {
    if (h.levels_.size() > n) throw InvariantViolation("decompose: exceeded |S| - 1 coarsening levels");
    auto& cur = h.levels_.back();
    const std::size_t m = cur.size();
    const std::size_t k = h.levels_.size() - 1;

    cur.exit_costs.assign(m, kInfinity);
    for (std::size_t i = 0; i < m; ++i)
      for (const auto& [j, v] : cur.costs[i]) cur.exit_costs[i] = std::min(cur.exit_costs[i], v);
    for (std::size_t i = 0; i < m; ++i) {
      auto& node = h.nodes_[cur.cycles[i]];
      node.exit_height = std::max(node.order == k ? cur.exit_costs[i] : node.exit_height, cur.exit_costs[i]);
      node.last_level = k;
    }

    // Zero reduced-cost graph, its SCCs and the closed ones among them.
    std::vector<std::vector<std::size_t>> zero(m);
    for (std::size_t i = 0; i < m; ++i)
      for (const auto& [j, v] : cur.costs[i])
        if (std::abs(v - cur.exit_costs[i]) <= tol) zero[i].push_back(j);
    std::size_t comps = 0;
    const auto comp = strongly_connected_components(zero, &comps);
    std::vector<char> closed(comps, 1);
    std::vector<std::size_t> comp_size(comps, 0);
    for (std::size_t i = 0; i < m; ++i) {
      ++comp_size[comp[i]];
      for (const auto& [j, v] : cur.costs[i])
        if (comp[j] != comp[i] && v - cur.exit_costs[i] <= tol) closed[comp[i]] = 0;
    }

    // Group level-k positions into level-(k+1) cycles.
    std::vector<std::vector<std::size_t>> groups;
    std::map<std::size_t, std::size_t> group_of_comp;
    std::vector<std::size_t> group_of(m);
    for (std::size_t i = 0; i < m; ++i) {
      if (closed[comp[i]] && comp_size[comp[i]] > 1) {
        auto [it, fresh] = group_of_comp.try_emplace(comp[i], groups.size());
        if (fresh) groups.emplace_back();
        groups[it->second].push_back(i);
        group_of[i] = it->second;
      } else {
        group_of[i] = groups.size();
        groups.push_back({i});
      }
    }
    if (groups.size() == m) throw InvariantViolation("decompose: no closed class at level " + std::to_string(k));

    // Canonical order by minimal member.
    auto min_member = [&](const std::vector<std::size_t>& g) {
      StateIndex best = std::numeric_limits<StateIndex>::max();
      for (auto p : g) best = std::min(best, h.nodes_[cur.cycles[p]].members.front());
      return best;
    };
    std::vector<std::size_t> perm(groups.size());
    for (std::size_t g = 0; g < perm.size(); ++g) perm[g] = g;
    std::sort(perm.begin(), perm.end(), [&](auto a, auto b) { return min_member(groups[a]) < min_member(groups[b]); });
    std::vector<std::size_t> new_pos(groups.size());
    for (std::size_t p = 0; p < perm.size(); ++p) new_pos[perm[p]] = p;

    CycleLevel next;
    std::vector<double> mixing(groups.size(), 0.0);
    for (std::size_t p = 0; p < perm.size(); ++p) {
      const auto& g = groups[perm[p]];
      if (g.size() == 1) {
        next.cycles.push_back(cur.cycles[g.front()]);
        mixing[p] = cur.exit_costs[g.front()];  // carried over: V^{k+1} row equals V^k row
        continue;
      }
      CycleNode node;
      node.order = k + 1;
      node.potential = -kInfinity;
      for (auto i : g) {
        const auto id = cur.cycles[i];
        auto& child = h.nodes_[id];
        node.members.insert(node.members.end(), child.members.begin(), child.members.end());
        node.children.push_back(id);
        node.potential = std::max(node.potential, child.potential);
        mixing[p] = std::max(mixing[p], cur.exit_costs[i]);
        child.parent = h.nodes_.size();
      }
      std::sort(node.members.begin(), node.members.end());
      node.mixing_height = mixing[p];
      next.cycles.push_back(h.nodes_.size());
      h.nodes_.push_back(std::move(node));
    }

    next.costs.resize(groups.size());
    for (std::size_t p = 0; p < perm.size(); ++p) {
      std::map<std::size_t, double> best;
      for (auto i : groups[perm[p]])
        for (const auto& [j, v] : cur.costs[i]) {
          const auto q = new_pos[group_of[j]];
          if (q == p) continue;
          const double c = mixing[p] + (v - cur.exit_costs[i]);
          auto [it, fresh] = best.try_emplace(q, c);
          if (!fresh) it->second = std::min(it->second, c);
        }
      next.costs[p].assign(best.begin(), best.end());
    }
    h.levels_.push_back(std::move(next));
  }

  auto& last = h.levels_.back();
  last.exit_costs = {kInfinity};
  auto& root = h.nodes_[last.cycles.front()];
  root.exit_height = kInfinity;
  root.last_level = h.levels_.size() - 1;
  if (root.order == 0) root.mixing_height = 0.0;  // single-state space
  return h;
}

inline CycleHierarchy decompose(const TransitionModel& model) {
  return decompose(CostGraph::from_model(model), model.zero_tolerance());
}

// ---------------------------------------------------------------------------
// Communication altitude

/// Widest path from x under step weights phi(u) - V(u,v), for every target.
/// The value at x itself is +inf (empty path).
inline std::vector<double> altitudes_from(const CostGraph& g, StateIndex x) {
  std::vector<double> best(g.size(), -kInfinity);
  best.at(x) = kInfinity;
  std::priority_queue<std::pair<double, StateIndex>> queue;
  queue.emplace(kInfinity, x);
  while (!queue.empty()) {
    const auto [b, u] = queue.top();
    queue.pop();
    if (b < best[u]) continue;
    for (const auto& [v, cost] : g.row(u)) {
      const double cand = std::min(b, g.potential(u) - cost);
      if (cand > best[v]) {
        best[v] = cand;
        queue.emplace(cand, v);
      }
    }
  }
  return best;
}

inline double communication_altitude(const CostGraph& g, StateIndex x, StateIndex y) {
  if (x == y) throw ArgumentError("communication altitude needs two distinct states");
  const double a = altitudes_from(g, x).at(y);
  if (a == -kInfinity) throw PreconditionError("states " + g.name(x) + " and " + g.name(y) + " are not connected");
  return a;
}

class AltitudeTable {
 public:
  explicit AltitudeTable(const CostGraph& g) : n_(g.size()) {
    values_.reserve(n_ * n_);
    for (StateIndex x = 0; x < n_; ++x) {
      const auto row = altitudes_from(g, x);
      values_.insert(values_.end(), row.begin(), row.end());
    }
  }

  std::size_t size() const noexcept { return n_; }
  double at(StateIndex x, StateIndex y) const { return values_.at(x * n_ + y); }

  /// A_c(Pi) = min over distinct x, y in Pi; +inf for a singleton.
  double cycle_altitude(const CycleNode& cycle) const {
    double out = kInfinity;
    for (auto x : cycle.members)
      for (auto y : cycle.members)
        if (x != y) out = std::min(out, at(x, y));
    return out;
  }

 private:
  std::size_t n_;
  std::vector<double> values_;
};

// ---------------------------------------------------------------------------
// Structural identities

struct ExitHeightDiagnostic {
  std::size_t node = 0;
  double cda = 0.0;       // H_e from the decomposition
  double min_form = 0.0;  // min_{a in Pi} max_{a' not in Pi} phi(a) - A_c(a, a')
  double max_form = 0.0;  // phi(Pi) - max_{a' not in Pi} A_c(peak, a')
};

struct StructureReport {
  std::vector<CheckOutcome> checks;
  std::vector<ExitHeightDiagnostic> exit_heights;
  bool min_form_matches = true;
  bool max_form_matches = true;

  bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckOutcome& c) { return c.passed; });
  }
  const CheckOutcome& check(std::string_view name) const {
    for (const auto& c : checks)
      if (c.name == name) return c;
    throw ArgumentError("no check named " + std::string(name));
  }
};

inline std::string cycle_name(const CycleHierarchy& h, std::size_t id) {
  std::string s = "{";
  const auto& m = h.node(id).members;
  for (std::size_t k = 0; k < m.size(); ++k) s += (k ? "," : "") + h.graph().name(m[k]);
  return s + "}";
}

/// Checks on every cycle with more than one member:
///   A_c(Pi) = phi(Pi) - H_m(Pi) and A_c(Pi) = phi(Pi') - H_e(Pi') for each child Pi';
/// for every pair: A_c(x,y) = A_c(y,x) = A_c(Pi_xy);
/// for Metropolis hierarchies: H_m(Pi) = phi(Pi) - min_{a in Pi} phi(a).
/// Also evaluates both readings of the altitude formula for exit heights.
inline StructureReport verify_structure(const CycleHierarchy& h, const AltitudeTable& alt,
                                        std::optional<Kernel> kernel = std::nullopt, double tol = 1e-9) {
  const auto& g = h.graph();
  StructureReport rep;
  CheckOutcome mixing{"altitude_mixing_height"};
  CheckOutcome children{"altitude_child_exit_height"};
  CheckOutcome pairs{"altitude_smallest_cycle"};
  CheckOutcome symmetry{"altitude_symmetry"};
  CheckOutcome ml_mixing{"ml_mixing_height"};
  if (kernel != Kernel::Metropolis) {
    ml_mixing.skipped = true;
    ml_mixing.note = "applies to Metropolis hierarchies only";
  }

  for (std::size_t id = 0; id < h.nodes().size(); ++id) {
    const auto& c = h.node(id);
    if (c.size() < 2) continue;
    const double ac = alt.cycle_altitude(c);
    ++mixing.checked;
    if (std::abs(ac - (c.potential - c.mixing_height)) > tol)
      mixing.fail(cycle_name(h, id) + ": A_c=" + format_number(ac) + " phi-H_m=" + format_number(c.potential - c.mixing_height));
    for (auto ch : c.children) {
      const auto& child = h.node(ch);
      ++children.checked;
      if (std::abs(ac - (child.potential - child.exit_height)) > tol)
        children.fail(cycle_name(h, ch) + " in " + cycle_name(h, id));
    }
    if (!ml_mixing.skipped) {
      double lo = kInfinity;
      for (auto s : c.members) lo = std::min(lo, g.potential(s));
      ++ml_mixing.checked;
      if (std::abs(c.mixing_height - (c.potential - lo)) > tol)
        ml_mixing.fail(cycle_name(h, id) + ": H_m=" + format_number(c.mixing_height) + " expected " + format_number(c.potential - lo));
    }
  }

  for (StateIndex x = 0; x < g.size(); ++x)
    for (StateIndex y = x + 1; y < g.size(); ++y) {
      ++symmetry.checked;
      if (std::abs(alt.at(x, y) - alt.at(y, x)) > tol) symmetry.fail(g.name(x) + "," + g.name(y));
      const auto id = h.smallest_common(x, y);
      ++pairs.checked;
      if (std::abs(alt.at(x, y) - alt.cycle_altitude(h.node(id))) > tol)
        pairs.fail(g.name(x) + "," + g.name(y) + " in " + cycle_name(h, id));
    }

  for (std::size_t id = 0; id < h.nodes().size(); ++id) {
    if (id == h.root()) continue;
    const auto& c = h.node(id);
    ExitHeightDiagnostic d;
    d.node = id;
    d.cda = c.exit_height;
    d.min_form = kInfinity;
    StateIndex peak = c.members.front();
    for (auto a : c.members) {
      if (g.potential(a) > g.potential(peak)) peak = a;
      double worst = -kInfinity;
      for (StateIndex b = 0; b < g.size(); ++b)
        if (!c.contains(b)) worst = std::max(worst, g.potential(a) - alt.at(a, b));
      d.min_form = std::min(d.min_form, worst);
    }
    double reach = -kInfinity;
    for (StateIndex b = 0; b < g.size(); ++b)
      if (!c.contains(b)) reach = std::max(reach, alt.at(peak, b));
    d.max_form = c.potential - reach;
    rep.min_form_matches = rep.min_form_matches && std::abs(d.min_form - d.cda) <= tol;
    rep.max_form_matches = rep.max_form_matches && std::abs(d.max_form - d.cda) <= tol;
    rep.exit_heights.push_back(d);
  }

  rep.checks = {mixing, children, pairs, symmetry, ml_mixing};
  return rep;
}

// ---------------------------------------------------------------------------
// Cross-dynamics comparison

struct SharedCycle {
  std::vector<StateIndex> members;
  std::size_t lll_node = 0;
  std::size_t ml_node = 0;
  double exit_lll = 0.0, exit_ml = 0.0;
  double mixing_lll = 0.0, mixing_ml = 0.0;
};

struct HierarchyComparison {
  std::vector<SharedCycle> shared;
  std::vector<std::vector<StateIndex>> only_lll;
  std::vector<std::vector<StateIndex>> only_ml;
  CheckOutcome exit_dominance{"exit_height_dominance"};
  CheckOutcome mixing_dominance{"mixing_height_dominance"};
  CheckOutcome altitude_dominance{"altitude_dominance"};

  bool passed() const { return exit_dominance.passed && mixing_dominance.passed && altitude_dominance.passed; }
};

/// Member-set-identical cycles must satisfy H^LLL >= H^ML for both heights;
/// every pair of states must satisfy A_c^ML >= A_c^LLL.
inline HierarchyComparison compare_hierarchies(const CycleHierarchy& lll, const CycleHierarchy& ml,
                                               double tol = 1e-9) {
  if (lll.graph().size() != ml.graph().size()) throw ArgumentError("compare_hierarchies: different base spaces");
  for (StateIndex s = 0; s < lll.graph().size(); ++s)
    if (std::abs(lll.graph().potential(s) - ml.graph().potential(s)) > tol)
      throw ArgumentError("compare_hierarchies: potentials differ at state " + lll.graph().name(s));

  HierarchyComparison out;
  std::map<std::vector<StateIndex>, std::size_t> ml_index;
  for (std::size_t id = 0; id < ml.nodes().size(); ++id) ml_index[ml.node(id).members] = id;
  std::vector<char> ml_matched(ml.nodes().size(), 0);

  for (std::size_t id = 0; id < lll.nodes().size(); ++id) {
    const auto& a = lll.node(id);
    auto it = ml_index.find(a.members);
    if (it == ml_index.end()) {
      out.only_lll.push_back(a.members);
      continue;
    }
    const auto& b = ml.node(it->second);
    ml_matched[it->second] = 1;
    SharedCycle sc{a.members, id, it->second, a.exit_height, b.exit_height, a.mixing_height, b.mixing_height};
    ++out.exit_dominance.checked;
    if (!(sc.exit_lll >= sc.exit_ml - tol)) out.exit_dominance.fail(cycle_name(lll, id));
    ++out.mixing_dominance.checked;
    if (!(sc.mixing_lll >= sc.mixing_ml - tol)) out.mixing_dominance.fail(cycle_name(lll, id));
    out.shared.push_back(std::move(sc));
  }
  for (std::size_t id = 0; id < ml.nodes().size(); ++id)
    if (!ml_matched[id]) out.only_ml.push_back(ml.node(id).members);

  const AltitudeTable alt_lll(lll.graph()), alt_ml(ml.graph());
  for (StateIndex x = 0; x < alt_lll.size(); ++x)
    for (StateIndex y = 0; y < alt_lll.size(); ++y) {
      if (x == y) continue;
      ++out.altitude_dominance.checked;
      if (alt_ml.at(x, y) < alt_lll.at(x, y) - tol)
        out.altitude_dominance.fail(lll.graph().name(x) + "," + lll.graph().name(y));
    }
  return out;
}

// ---------------------------------------------------------------------------
// Empirical exit times

struct ExitTimePoint {
  double temperature = 0.0;
  std::size_t trials = 0;
  std::size_t truncated = 0;
  double mean = 0.0;
  double std_error = 0.0;
  double visited_all_fraction = 0.0;
};

struct ExitRegression {
  std::vector<StateIndex> members;
  StateIndex start = 0;
  double expected_height = 0.0;
  std::vector<ExitTimePoint> points;
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  bool truncated = false;
};

/// Mean exit time from `members` per temperature, started at the member of
/// minimal potential, and the least-squares fit of ln(mean) against 1/T.
/// Trial k at grid point j uses seed derive_seed(derive_seed(seed, j), k).
inline ExitRegression empirical_exit_validation(const GameDefinition& game, Kernel kernel,
                                                const std::vector<StateIndex>& members,
                                                const std::vector<double>& temperatures, std::size_t trials,
                                                std::uint64_t seed, const BuildOptions& options = {},
                                                std::size_t max_jumps = 100'000'000) {
  if (members.empty()) throw ArgumentError("exit validation needs a nonempty cycle");
  if (temperatures.size() < 2) throw ArgumentError("exit validation needs at least two temperatures");
  for (std::size_t j = 1; j < temperatures.size(); ++j)
    if (!(temperatures[j] < temperatures[j - 1])) throw ArgumentError("temperature grid must be decreasing");
  if (trials == 0) throw ArgumentError("exit validation needs at least one trial");

  ExitRegression out;
  out.members = members;
  std::sort(out.members.begin(), out.members.end());
  const auto phi = game.potential_table(options.state_cap);
  out.start = out.members.front();
  for (auto s : out.members)
    if (phi.at(s) < phi[out.start]) out.start = s;
  const auto inside = state_mask(phi.size(), out.members);

  std::vector<double> xs, ys;
  for (std::size_t j = 0; j < temperatures.size(); ++j) {
    const auto model = build_transition_model(game, kernel, temperatures[j], options);
    const auto stream = derive_seed(seed, j);
    std::vector<double> times;
    std::size_t visited = 0;
    ExitTimePoint pt;
    pt.temperature = temperatures[j];
    pt.trials = trials;
    for (std::size_t k = 0; k < trials; ++k) {
      Rng rng(derive_seed(stream, k));
      const auto s = sample_exit(model, out.start, inside, rng, max_jumps);
      if (s.truncated) {
        ++pt.truncated;
        continue;
      }
      times.push_back(s.time);
      visited += s.visited_all;
    }
    const auto est = summarize(std::move(times), trials);
    pt.mean = est.mean;
    pt.std_error = est.std_error;
    const std::size_t done = trials - pt.truncated;
    pt.visited_all_fraction = done ? static_cast<double>(visited) / static_cast<double>(done) : 0.0;
    out.truncated = out.truncated || pt.truncated > 0;
    out.points.push_back(pt);
    if (done > 0) {
      xs.push_back(1.0 / pt.temperature);
      ys.push_back(std::log(pt.mean));
    }
  }

  if (xs.size() >= 2) {
    const double k = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) mx += xs[i], my += ys[i];
    mx /= k;
    my /= k;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sxx += (xs[i] - mx) * (xs[i] - mx);
      sxy += (xs[i] - mx) * (ys[i] - my);
      syy += (ys[i] - my) * (ys[i] - my);
    }
    out.slope = sxy / sxx;
    out.intercept = my - out.slope * mx;
    out.r_squared = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// DOT export

/// Level k of the hierarchy as a DOT digraph. Level 0 shows states only;
/// higher levels draw one cluster per cycle and one edge per finite V^k,
/// labeled "V^k/V_*^k", between cluster representatives (minimal members).
inline std::string export_dot(const CycleHierarchy& h, std::size_t k) {
  const auto& g = h.graph();
  const auto& lv = h.level(k);
  std::ostringstream os;
  auto quote = [](const std::string& s) {
    std::string q = "\"";
    for (char c : s) q += (c == '"' || c == '\\') ? std::string("\\") + c : std::string(1, c);
    return q + "\"";
  };
  auto state_node = [&](StateIndex s) {
    return "  s" + std::to_string(s) + " [label=" + quote(g.name(s) + "\\nφ=" + format_number(g.potential(s))) + "];\n";
  };

  os << "digraph level_" << k << " {\n";
  os << "  compound=true;\n";
  os << "  node [shape=circle];\n";
  if (k == 0) {
    for (StateIndex s = 0; s < g.size(); ++s) os << state_node(s);
  } else {
    for (std::size_t p = 0; p < lv.size(); ++p) {
      const auto id = lv.cycles[p];
      const auto& c = h.node(id);
      std::string label = "Π_" + std::to_string(c.order) + ": H_e=" + format_number(c.exit_height) +
                          ", H_m=" + format_number(c.mixing_height) + ", φ=" + format_number(c.potential);
      os << "  subgraph cluster_" << p << " {\n";
      os << "    label=" << quote(label) << ";\n";
      for (auto s : c.members) os << "  " << state_node(s);
      os << "  }\n";
    }
  }
  for (std::size_t i = 0; i < lv.size(); ++i)
    for (const auto& [j, v] : lv.costs[i]) {
      const auto from = h.node(lv.cycles[i]).members.front();
      const auto to = h.node(lv.cycles[j]).members.front();
      const double reduced = v - lv.exit_costs[i];
      const bool minimal = std::abs(reduced) <= h.tolerance();
      os << "  s" << from << " -> s" << to << " [label=" << quote(format_number(v) + "/" + format_number(reduced));
      if (k > 0) os << ", ltail=cluster_" << i << ", lhead=cluster_" << j;
      if (!minimal) os << ", style=dotted";
      os << "];\n";
    }
  os << "}\n";
  return os.str();
}

}  // namespace learndyn

#endif  // LEARNDYN_CYCLES_HPP
