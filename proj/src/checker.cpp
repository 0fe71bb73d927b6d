#include "cxdiag/checker.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cxdiag/error.hpp"
#include "cxdiag/value_iteration.hpp"

namespace cxdiag {

namespace {

struct PredEdge {
  StateId source;
  std::uint32_t choice;
};

std::vector<std::vector<PredEdge>> predecessors(const SparseMdp& sp) {
  std::vector<std::vector<PredEdge>> pred(sp.num_states());
  for (StateId s = 0; s < sp.num_states(); ++s)
    for (auto c = sp.state_begin[s]; c < sp.state_begin[s + 1]; ++c)
      for (auto k = sp.choice_begin[c]; k < sp.choice_begin[c + 1]; ++k) {
        auto& list = pred[sp.target[k]];
        if (list.empty() || list.back().source != s || list.back().choice != c) list.push_back({s, c});
      }
  return pred;
}

// States that reach the target with probability 1 under some scheduler. `sat2` states seed the set;
// `allowed` marks states that may lie on the way.
std::vector<char> prob1_max(const SparseMdp& sp, const std::vector<std::vector<PredEdge>>& pred,
                            const std::vector<char>& sat2, const std::vector<char>& allowed) {
  const auto n = sp.num_states();
  std::vector<char> u(allowed);
  std::vector<char> closed(sp.choice_action.size());
  while (true) {
    for (StateId s = 0; s < n; ++s)
      for (auto c = sp.state_begin[s]; c < sp.state_begin[s + 1]; ++c) {
        bool inside = true;
        for (auto k = sp.choice_begin[c]; k < sp.choice_begin[c + 1] && inside; ++k) inside = u[sp.target[k]] != 0;
        closed[c] = inside;
      }
    std::vector<char> r(n, 0);
    std::vector<StateId> queue;
    for (StateId s = 0; s < n; ++s)
      if (sat2[s] && u[s]) {
        r[s] = 1;
        queue.push_back(s);
      }
    for (std::size_t i = 0; i < queue.size(); ++i)
      for (const auto& e : pred[queue[i]])
        if (!r[e.source] && u[e.source] && !sat2[e.source] && closed[e.choice]) {
          r[e.source] = 1;
          queue.push_back(e.source);
        }
    if (r == u) return u;
    u.swap(r);
  }
}

}  // namespace

bool exceeds(double mass, Comparison c, double p) {
  switch (c) {
    case Comparison::LessEqual: return mass > p;
    case Comparison::Less: return mass >= p;
    case Comparison::Greater: return mass <= p;
    case Comparison::GreaterEqual: return mass < p;
  }
  return false;
}

ValueVector compute_pmax(const Mdp& m, const PathFormula& f, const CheckOptions& options) {
  if (f.kind != PathKind::Until) throw DomainError("only Until path formulas can be checked, got " + to_string(f));
  if (!(options.epsilon > 0.0)) throw DomainError("epsilon must be positive");

  const auto n = m.num_states();
  const auto sat1 = BoundFormula::bind(f.left, m.labeling().aps()).satisfying(m.labeling(), n);
  const auto sat2 = BoundFormula::bind(f.right, m.labeling().aps()).satisfying(m.labeling(), n);
  const auto sp = SparseMdp::from(m);
  const auto pred = predecessors(sp);

  ValueVector out;
  out.bound = f.bound;
  out.classes.assign(n, StateClass::Zero);
  out.values.assign(n, 0.0);
  std::vector<StateId> queue;
  for (StateId s = 0; s < n; ++s)
    if (sat2[s]) {
      out.classes[s] = StateClass::Target;
      out.values[s] = 1.0;
      queue.push_back(s);
    }
  for (std::size_t i = 0; i < queue.size(); ++i)
    for (const auto& e : pred[queue[i]])
      if (sat1[e.source] && out.classes[e.source] == StateClass::Zero) {
        out.classes[e.source] = StateClass::Maybe;
        queue.push_back(e.source);
      }

  std::vector<char> active(n);
  for (StateId s = 0; s < n; ++s) active[s] = out.classes[s] == StateClass::Maybe;
  if (!f.bound) {
    std::vector<char> live(n);
    for (StateId s = 0; s < n; ++s) live[s] = out.classes[s] != StateClass::Zero;
    const auto one = prob1_max(sp, pred, sat2, live);
    for (StateId s = 0; s < n; ++s)
      if (one[s] && active[s]) {
        out.values[s] = 1.0;
        active[s] = 0;
      }
  }
  auto sweep = options.kernel == Kernel::Parallel ? bellman_sweep_parallel : bellman_sweep_serial;
  std::vector<double> next(n);

  if (f.bound) {
    for (std::uint32_t k = 0; k < *f.bound; ++k) {
      sweep(sp, active, out.values, next);
      out.values.swap(next);
    }
    out.iterations = *f.bound;
    return out;
  }

  out.residual = 1.0;
  while (out.residual >= options.epsilon) {
    if (out.iterations >= options.max_iterations)
      throw ResourceError("value iteration did not converge within " + std::to_string(options.max_iterations) +
                          " iterations");
    out.residual = sweep(sp, active, out.values, next);
    out.values.swap(next);
    ++out.iterations;
  }
  return out;
}

namespace {

// Step-bounded values: each state picks the action optimal for the steps left when it is first reached.
Scheduler extract_bounded_scheduler(const Mdp& m, const SparseMdp& sp, const ValueVector& v,
                                    const CheckOptions& options) {
  const auto n = m.num_states();
  const std::uint32_t bound = *v.bound;
  Scheduler d(n);
  std::vector<char> active(n);
  std::vector<std::vector<double>> layers(bound + 1, std::vector<double>(n, 0.0));
  for (StateId s = 0; s < n; ++s) {
    active[s] = v.classes[s] == StateClass::Maybe;
    layers[0][s] = v.classes[s] == StateClass::Target ? 1.0 : 0.0;
  }
  for (std::uint32_t k = 1; k <= bound; ++k) bellman_sweep_serial(sp, active, layers[k - 1], layers[k]);

  constexpr auto kUnreached = std::numeric_limits<std::uint32_t>::max();
  std::vector<std::uint32_t> depth(n, kUnreached);
  std::vector<StateId> queue{m.initial_state()};
  depth[m.initial_state()] = 0;
  for (std::size_t i = 0; i < queue.size(); ++i) {
    const StateId s = queue[i];
    if (!active[s]) continue;
    for (auto c = sp.state_begin[s]; c < sp.state_begin[s + 1]; ++c)
      for (auto k = sp.choice_begin[c]; k < sp.choice_begin[c + 1]; ++k)
        if (depth[sp.target[k]] == kUnreached) {
          depth[sp.target[k]] = depth[s] + 1;
          queue.push_back(sp.target[k]);
        }
  }

  for (StateId s = 0; s < n; ++s) {
    const auto first = sp.state_begin[s], last = sp.state_begin[s + 1];
    if (first == last) continue;
    if (!active[s] || bound == 0) {
      d.set(s, sp.choice_action[first]);
      continue;
    }
    const std::uint32_t left = depth[s] < bound ? bound - depth[s] : 1;
    // Ties are broken on ever shorter horizons, then by lowest action id.
    auto better = [&](std::uint32_t c, std::uint32_t incumbent) {
      for (std::uint32_t h = left; h-- > 0;) {
        const double diff = sp.backup(c, layers[h]) - sp.backup(incumbent, layers[h]);
        if (std::abs(diff) > options.scheduler_tolerance) return diff > 0;
      }
      return false;
    };
    auto choice = first;
    for (auto c = first + 1; c < last; ++c)
      if (better(c, choice)) choice = c;
    d.set(s, sp.choice_action[choice]);
  }
  return d;
}

}  // namespace

Scheduler extract_max_scheduler(const Mdp& m, const ValueVector& v, const CheckOptions& options) {
  const auto n = m.num_states();
  const auto sp = SparseMdp::from(m);
  if (v.bound) return extract_bounded_scheduler(m, sp, v, options);
  Scheduler d(n);
  std::vector<double> best(n, 0.0);
  std::vector<char> attracted(n, 0);
  std::vector<StateId> frontier;
  for (StateId s = 0; s < n; ++s) {
    const auto first = sp.state_begin[s], last = sp.state_begin[s + 1];
    if (first == last) continue;
    if (v.classes[s] != StateClass::Maybe) {
      d.set(s, sp.choice_action[first]);
      if (v.classes[s] == StateClass::Target) {
        attracted[s] = 1;
        frontier.push_back(s);
      }
      continue;
    }
    best[s] = 0.0;
    for (auto c = first; c < last; ++c) best[s] = std::max(best[s], sp.backup(c, v.values));
  }
  auto optimal = [&](StateId s, std::uint32_t c) { return sp.backup(c, v.values) >= best[s] - options.scheduler_tolerance; };

  // Backward attractor over optimal actions, one layer at a time.
  const auto pred = predecessors(sp);
  while (!frontier.empty()) {
    std::vector<StateId> candidates;
    for (StateId t : frontier)
      for (const auto& e : pred[t])
        if (!attracted[e.source] && v.classes[e.source] == StateClass::Maybe) candidates.push_back(e.source);
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
    std::vector<StateId> layer;
    for (StateId s : candidates) {
      for (auto c = sp.state_begin[s]; c < sp.state_begin[s + 1]; ++c) {
        if (!optimal(s, c)) continue;
        bool progress = false;
        for (auto k = sp.choice_begin[c]; k < sp.choice_begin[c + 1] && !progress; ++k) progress = attracted[sp.target[k]] != 0;
        if (progress) {
          d.set(s, sp.choice_action[c]);
          layer.push_back(s);
          break;
        }
      }
    }
    for (StateId s : layer) attracted[s] = 1;
    frontier = std::move(layer);
  }

  for (StateId s = 0; s < n; ++s) {
    if (attracted[s] || v.classes[s] != StateClass::Maybe || sp.state_begin[s] == sp.state_begin[s + 1]) continue;
    auto choice = sp.state_begin[s];
    for (auto c = sp.state_begin[s]; c < sp.state_begin[s + 1]; ++c)
      if (sp.backup(c, v.values) > sp.backup(choice, v.values)) choice = c;
    d.set(s, sp.choice_action[choice]);
  }
  return d;
}

std::vector<double> scheduler_values(const Mdp& m, const Scheduler& d, const PathFormula& f, double epsilon) {
  MdpBuilder b(m.num_states(), m.initial_state());
  for (const auto& name : m.actions().names()) b.action(name);
  for (const auto& ap : m.labeling().aps().names()) b.intern_ap(ap);
  for (StateId s = 0; s < m.num_states(); ++s) {
    if (const Choice* c = d[s] == kNoAction ? nullptr : m.find_choice(s, d[s]))
      for (const auto& succ : c->successors) b.add_transition(s, c->action, succ.target, succ.probability);
    for (ApId ap : m.labeling().labels_of(s)) b.add_label(s, m.labeling().aps().name(ap));
  }
  CheckOptions options;
  options.epsilon = epsilon;
  return compute_pmax(std::move(b).build(), f, options).values;
}

Verdict check_property(const Mdp& m, const PropertySpec& spec, const CheckOptions& options) {
  if (spec.comparison == Comparison::Greater || spec.comparison == Comparison::GreaterEqual)
    throw DomainError("lower probability bounds are not supported: " + to_string(spec) +
                      "; use the duality P>=p [ psi ] <=> P<=1-p [ !psi ] and state the property as an upper bound");
  Verdict v;
  v.values = compute_pmax(m, spec.path, options);
  v.pmax = v.values.at(m.initial_state());
  v.threshold = spec.threshold;
  v.comparison = spec.comparison;
  v.holds = !exceeds(v.pmax, spec.comparison, spec.threshold);
  if (!v.holds) v.witness = extract_max_scheduler(m, v.values, options);
  return v;
}

}  // namespace cxdiag
