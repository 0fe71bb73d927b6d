#include "cxdiag/diagnosis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <unordered_map>

namespace cxdiag {

std::string to_string(const Literal& l, const SymbolTable& aps) {
  return (l.positive ? "" : "!") + aps.name(l.ap);
}

std::string to_string(CauseOrigin o) {
  switch (o) {
    case CauseOrigin::Left: return "left";
    case CauseOrigin::Right: return "right";
    case CauseOrigin::Both: return "both";
  }
  return "?";
}

namespace {

constexpr std::uint32_t kUnreachable = std::numeric_limits<std::uint32_t>::max();

std::uint64_t pair_key(StateId s, ActionId a) { return (std::uint64_t{s} << 32) | a; }

struct TransitionKey {
  StateId s;
  ActionId a;
  StateId t;
  bool operator==(const TransitionKey&) const = default;
};

struct TransitionHash {
  std::size_t operator()(const TransitionKey& k) const noexcept {
    return std::hash<std::uint64_t>{}(pair_key(k.s, k.a)) * 31u + k.t;
  }
};

/// Per-state evaluation of a bound NNF formula: truth and the minimal number of literal switches that
/// falsify each node.
class CauseFinder {
 public:
  CauseFinder(const BoundFormula& f, OrRule rule) : f_(f), rule_(rule), truth_(f.size()), cost_(f.size()) {}

  bool load(const Labeling& labels, StateId s, DiagnosisStats* stats) {
    const auto nodes = f_.nodes();
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const auto& n = nodes[i];
      switch (n.kind) {
        case FormulaKind::True:
          truth_[i] = 1;
          cost_[i] = kUnreachable;
          break;
        case FormulaKind::Atom:
          truth_[i] = labels.holds(s, n.ap);
          cost_[i] = truth_[i] ? 1 : 0;
          break;
        case FormulaKind::Not:
          truth_[i] = !truth_[n.lhs];
          cost_[i] = truth_[i] ? 1 : 0;
          break;
        case FormulaKind::And:
          truth_[i] = truth_[n.lhs] && truth_[n.rhs];
          cost_[i] = std::min(cost_[n.lhs], cost_[n.rhs]);
          break;
        case FormulaKind::Or:
          truth_[i] = truth_[n.lhs] || truth_[n.rhs];
          cost_[i] = (cost_[n.lhs] == kUnreachable || cost_[n.rhs] == kUnreachable) ? kUnreachable
                                                                                      : cost_[n.lhs] + cost_[n.rhs];
          break;
      }
    }
    if (stats) stats->formula_nodes += nodes.size();
    return truth_.back() != 0;
  }

  void collect(std::vector<FoundCause>& out, std::uint32_t w, DiagnosisStats* stats) const {
    visit(f_.root(), w, out, stats);
  }

 private:
  void visit(std::uint32_t i, std::uint32_t w, std::vector<FoundCause>& out, DiagnosisStats* stats) const {
    if (stats) ++stats->formula_nodes;
    const auto& n = f_.nodes()[i];
    switch (n.kind) {
      case FormulaKind::True: return;
      case FormulaKind::Atom:
        if (truth_[i]) out.push_back({{n.ap, true}, w});
        return;
      case FormulaKind::Not: {
        const auto& inner = f_.nodes()[n.lhs];
        if (truth_[i] && inner.kind == FormulaKind::Atom) out.push_back({{inner.ap, false}, w});
        return;
      }
      case FormulaKind::And:
        visit(n.lhs, w, out, stats);
        visit(n.rhs, w, out, stats);
        return;
      case FormulaKind::Or: {
        const bool l = truth_[n.lhs], r = truth_[n.rhs];
        if (l && r) {
          if (rule_ == OrRule::Unit) {
            visit(n.lhs, w + 1, out, stats);
            visit(n.rhs, w + 1, out, stats);
          } else {
            if (cost_[n.rhs] != kUnreachable) visit(n.lhs, w + cost_[n.rhs], out, stats);
            if (cost_[n.lhs] != kUnreachable) visit(n.rhs, w + cost_[n.lhs], out, stats);
          }
        } else if (l) {
          visit(n.lhs, w, out, stats);
        } else if (r) {
          visit(n.rhs, w, out, stats);
        }
        return;
      }
    }
  }

  const BoundFormula& f_;
  OrRule rule_;
  std::vector<char> truth_;
  std::vector<std::uint32_t> cost_;
};

void dedupe(std::vector<FoundCause>& causes) {
  std::sort(causes.begin(), causes.end(), [](const auto& a, const auto& b) {
    return a.literal != b.literal ? a.literal < b.literal : a.k < b.k;
  });
  causes.erase(std::unique(causes.begin(), causes.end(), [](const auto& a, const auto& b) { return a.literal == b.literal; }),
               causes.end());
}

bool contains(const FinitePath& p, StateId s) { return std::find(p.states.begin(), p.states.end(), s) != p.states.end(); }

struct Sides {
  BoundFormula left, right;
};

Sides bind_sides(const Counterexample& cx) {
  return {BoundFormula::bind(cx.property.path.left, cx.labels.aps()),
          BoundFormula::bind(cx.property.path.right, cx.labels.aps())};
}

bool satisfies(const Counterexample& cx, const Sides& f, const FinitePath& p, StateId s,
               const std::vector<ApId>& flipped) {
  auto holds_at = [&](StateId x) {
    return [&, x](ApId ap) {
      bool v = cx.labels.holds(x, ap);
      if (x == s && std::find(flipped.begin(), flipped.end(), ap) != flipped.end()) v = !v;
      return v;
    };
  };
  return eval_until(
      p.states, cx.property.path.kind, cx.property.path.bound,
      [&](StateId x, std::size_t) { return f.left.eval(holds_at(x)); },
      [&](StateId x, std::size_t) { return f.right.eval(holds_at(x)); });
}

// Ranking keys: values relative to the counterexample mass, quantised so that equal ratios compare
// equal whatever the scale.
long long rank_key(double value, double total) { return std::llround(value / total * 1e12); }

}  // namespace

std::vector<FoundCause> find_causes(StateId s, const Labeling& labels, const StateFormula& psi, std::uint32_t w,
                                    OrRule rule, DiagnosisStats* stats) {
  if (!is_nnf(psi)) throw DomainError("find_causes needs a formula in negation normal form, got " + to_string(psi));
  auto bound = BoundFormula::bind(psi, labels.aps());
  CauseFinder finder(bound, rule);
  if (!finder.load(labels, s, stats))
    throw DomainError("state " + std::to_string(s) + " does not satisfy " + to_string(psi));
  std::vector<FoundCause> out;
  finder.collect(out, w, stats);
  dedupe(out);
  return out;
}

double state_mass(const Counterexample& cx, StateId s) {
  double m = 0.0;
  for (const auto& wp : cx.paths)
    if (contains(wp.path, s)) m += wp.probability;
  return m;
}

double transition_mass(const Counterexample& cx, StateId s, ActionId a, StateId t) {
  double m = 0.0;
  for (const auto& wp : cx.paths) {
    const auto& p = wp.path;
    for (std::size_t j = 0; j < p.actions.size(); ++j)
      if (p.states[j] == s && p.actions[j] == a && p.states[j + 1] == t) {
        m += wp.probability;
        break;
      }
  }
  return m;
}

double mass_after_flip(const Counterexample& cx, StateId s, const std::vector<ApId>& flipped) {
  const auto sides = bind_sides(cx);
  double m = 0.0;
  for (const auto& wp : cx.paths)
    if (satisfies(cx, sides, wp.path, s, flipped)) m += wp.probability;
  return m;
}

bool is_critical(const Counterexample& cx, StateId s, const Literal& literal, double p) {
  return !exceeds(mass_after_flip(cx, s, {literal.ap}), cx.property.comparison, p);
}

OracleResult responsibility_oracle(const Counterexample& cx, StateId s, const Literal& literal, double p,
                                   std::size_t cap) {
  OracleResult out;
  if (cx.labels.holds(s, literal.ap) != literal.positive) return out;

  std::vector<ApId> others;
  for (const auto& f : {cx.property.path.left, cx.property.path.right})
    for (const auto& name : atoms_of(f))
      if (auto id = cx.labels.aps().find(name); id && *id != literal.ap) others.push_back(*id);
  std::sort(others.begin(), others.end());
  others.erase(std::unique(others.begin(), others.end()), others.end());
  if (others.size() + 1 > cap)
    throw ResourceError("responsibility oracle: " + std::to_string(others.size() + 1) + " propositions exceed the cap of " +
                        std::to_string(cap));

  const auto sides = bind_sides(cx);
  double fixed = 0.0;
  std::vector<const WeightedPath*> through;
  for (const auto& wp : cx.paths) {
    if (contains(wp.path, s)) through.push_back(&wp);
    else if (satisfies(cx, sides, wp.path, s, {})) fixed += wp.probability;
  }
  auto valid = [&](const std::vector<ApId>& flipped) {
    double m = fixed;
    for (const auto* wp : through)
      if (satisfies(cx, sides, wp->path, s, flipped)) m += wp->probability;
    return exceeds(m, cx.property.comparison, p);
  };

  const auto n = others.size();
  for (std::size_t k = 0; k <= n; ++k) {
    std::vector<std::size_t> idx(k);
    for (std::size_t i = 0; i < k; ++i) idx[i] = i;
    while (true) {
      std::vector<ApId> w;
      for (auto i : idx) w.push_back(others[i]);
      if (valid(w)) {
        w.push_back(literal.ap);
        if (!valid(w)) {
          w.pop_back();
          out.k = static_cast<std::uint32_t>(k);
          out.contingency = std::move(w);
          return out;
        }
      }
      // next k-combination in lexicographic order
      std::size_t i = k;
      while (i > 0 && idx[i - 1] == n - k + i - 1) --i;
      if (i == 0) break;
      ++idx[i - 1];
      for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
    }
  }
  return out;
}

const Cause* DiagnosisReport::find_cause(StateId s, const Literal& l) const {
  for (const auto& c : causes)
    if (c.state == s && c.literal == l) return &c;
  return nullptr;
}

const BlameEntry* DiagnosisReport::find_blame(StateId s, ActionId a) const {
  for (const auto& e : actions)
    if (e.state == s && e.action == a) return &e;
  return nullptr;
}

namespace {

std::vector<double> max_dR_by_state(const std::vector<Cause>& causes, std::size_t n) {
  std::vector<double> out(n, 0.0);
  for (const auto& c : causes) out[c.state] = std::max(out[c.state], c.dR);
  return out;
}

std::size_t state_space(const Counterexample& cx) {
  std::size_t n = cx.labels.num_states();
  for (const auto& wp : cx.paths)
    for (StateId s : wp.path.states) n = std::max<std::size_t>(n, s + 1);
  return n;
}

void order_causes(std::vector<Cause>& causes, double total) {
  std::sort(causes.begin(), causes.end(), [total](const Cause& a, const Cause& b) {
    auto ka = rank_key(a.dR * a.mass, total), kb = rank_key(b.dR * b.mass, total);
    if (ka != kb) return ka > kb;
    if (a.state != b.state) return a.state < b.state;
    return a.literal < b.literal;
  });
}

}  // namespace

BlameEntry blame(const Counterexample& cx, StateId s, ActionId a, const std::vector<Cause>& causes) {
  const auto best = max_dR_by_state(causes, state_space(cx));
  BlameEntry e{s, a, 0.0, {}};
  std::map<StateId, double> masses;
  for (const auto& wp : cx.paths) {
    const auto& p = wp.path;
    double strongest = -1.0;
    std::vector<StateId> seen;
    for (std::size_t j = 0; j < p.actions.size(); ++j) {
      if (p.states[j] != s || p.actions[j] != a) continue;
      StateId t = p.states[j + 1];
      strongest = std::max(strongest, best[t]);
      if (std::find(seen.begin(), seen.end(), t) == seen.end()) {
        seen.push_back(t);
        masses[t] += wp.probability;
      }
    }
    if (strongest > 0.0) e.dB += wp.probability * strongest;
  }
  for (const auto& [t, m] : masses) {
    Contribution c;
    c.successor = t;
    c.mass = m;
    c.max_dR = best[t];
    for (const auto& cause : causes)
      if (cause.state == t) c.causes.push_back(cause);
    e.contributions.push_back(std::move(c));
  }
  return e;
}

DiagnosisReport generate_diagnoses(const Counterexample& cx, const PropertySpec& spec, const SourceAnnotations* sources,
                                   const DiagnosisOptions& options) {
  if (spec.path.kind != PathKind::Until)
    throw DomainError("diagnosis supports Until and bounded Until only, got " + to_string(spec.path));
  DiagnosisReport r;
  r.counterexample = cx;
  auto& stats = r.stats;
  const auto& labels = cx.labels;
  const auto left = BoundFormula::bind(to_nnf(spec.path.left), labels.aps());
  const auto right = BoundFormula::bind(to_nnf(spec.path.right), labels.aps());
  CauseFinder left_finder(left, options.or_rule), right_finder(right, options.or_rule);

  struct Mass {
    std::size_t last_path;
    double mass;
  };
  struct CauseSlot {
    std::uint32_t k;
    CauseOrigin origin;
  };
  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::unordered_map<StateId, Mass> state_masses;
  std::unordered_map<TransitionKey, Mass, TransitionHash> transition_masses;
  std::map<std::pair<StateId, Literal>, CauseSlot> found;
  std::vector<FoundCause> scratch;
  double total = 0.0;

  for (std::size_t i = 0; i < cx.paths.size(); ++i) {
    const auto& wp = cx.paths[i];
    const auto& p = wp.path;
    total += wp.probability;
    for (std::size_t j = 0; j < p.states.size(); ++j) {
      ++stats.path_steps;
      const StateId s = p.states[j];
      auto [sm, fresh] = state_masses.try_emplace(s, Mass{kNone, 0.0});
      if (sm->second.last_path != i) {
        sm->second.last_path = i;
        sm->second.mass += wp.probability;
      }
      const bool last = j + 1 == p.states.size();
      auto& finder = last ? right_finder : left_finder;
      const auto origin = last ? CauseOrigin::Right : CauseOrigin::Left;
      if (!finder.load(labels, s, &stats))
        throw DomainError("state " + std::to_string(s) + " on path " + std::to_string(i) + " does not satisfy " +
                          to_string(last ? spec.path.right : spec.path.left));
      scratch.clear();
      finder.collect(scratch, 0, &stats);
      for (const auto& c : scratch) {
        auto [slot, inserted] = found.try_emplace({s, c.literal}, CauseSlot{c.k, origin});
        if (!inserted) {
          slot->second.k = std::min(slot->second.k, c.k);
          if (slot->second.origin != origin) slot->second.origin = CauseOrigin::Both;
        }
      }
      if (!last) {
        ++stats.path_steps;
        auto [tm, fresh_t] = transition_masses.try_emplace(TransitionKey{s, p.actions[j], p.states[j + 1]}, Mass{kNone, 0.0});
        if (tm->second.last_path != i) {
          tm->second.last_path = i;
          tm->second.mass += wp.probability;
        }
      }
    }
  }
  if (!(total > 0.0)) throw DomainError("counterexample carries no probability mass");

  for (const auto& [key, slot] : found) {
    Cause c;
    c.state = key.first;
    c.literal = key.second;
    c.k = slot.k;
    c.dR = 1.0 / (slot.k + 1.0);
    c.mass = state_masses.at(c.state).mass;
    c.normalized_mass = c.mass / total;
    c.origin = slot.origin;
    r.causes.push_back(c);
  }
  order_causes(r.causes, total);
  const auto best = max_dR_by_state(r.causes, state_space(cx));

  // Blame: each path contributes once per (state, action), weighted by the strongest cause it reaches.
  struct Running {
    std::size_t last_path;
    double strongest;
    double dB;
  };
  std::unordered_map<std::uint64_t, Running> running;
  std::vector<std::uint64_t> touched;
  for (std::size_t i = 0; i < cx.paths.size(); ++i) {
    const auto& wp = cx.paths[i];
    const auto& p = wp.path;
    touched.clear();
    for (std::size_t j = 0; j < p.actions.size(); ++j) {
      ++stats.blame_terms;
      const auto key = pair_key(p.states[j], p.actions[j]);
      auto [it, fresh] = running.try_emplace(key, Running{kNone, 0.0, 0.0});
      const double v = best[p.states[j + 1]];
      if (it->second.last_path != i) {
        it->second.last_path = i;
        it->second.strongest = v;
        touched.push_back(key);
      } else {
        it->second.strongest = std::max(it->second.strongest, v);
      }
    }
    for (auto key : touched) {
      auto& run = running.at(key);
      run.dB += wp.probability * run.strongest;
    }
  }

  std::map<std::uint64_t, std::vector<std::pair<StateId, double>>> successors;
  for (const auto& [key, m] : transition_masses) successors[pair_key(key.s, key.a)].emplace_back(key.t, m.mass);

  std::unordered_map<StateId, std::vector<std::size_t>> causes_at;
  for (std::size_t i = 0; i < r.causes.size(); ++i) causes_at[r.causes[i].state].push_back(i);

  for (auto& [key, succ] : successors) {
    BlameEntry e;
    e.state = static_cast<StateId>(key >> 32);
    e.action = static_cast<ActionId>(key & 0xffffffffu);
    e.dB = running.at(key).dB;
    for (const auto& [t, m] : succ) {
      Contribution c;
      c.successor = t;
      c.mass = m;
      c.max_dR = best[t];
      if (auto it = causes_at.find(t); it != causes_at.end())
        for (auto idx : it->second) c.causes.push_back(r.causes[idx]);
      if (sources) {
        if (auto id = sources->actions.find(cx.actions.name(e.action))) {
          auto refs = sources->map.lookup(e.state, *id, t);
          c.sources.assign(refs.begin(), refs.end());
        }
      }
      e.contributions.push_back(std::move(c));
    }
    std::sort(e.contributions.begin(), e.contributions.end(), [total](const Contribution& a, const Contribution& b) {
      auto top = [total](const Contribution& c) {
        return c.causes.empty() ? -1 : rank_key(c.causes.front().dR * c.causes.front().mass, total);
      };
      auto ka = top(a), kb = top(b);
      if (ka != kb) return ka > kb;
      return a.successor < b.successor;
    });
    r.actions.push_back(std::move(e));
  }
  std::sort(r.actions.begin(), r.actions.end(), [total](const BlameEntry& a, const BlameEntry& b) {
    auto ka = rank_key(a.dB, total), kb = rank_key(b.dB, total);
    if (ka != kb) return ka > kb;
    if (a.state != b.state) return a.state < b.state;
    return a.action < b.action;
  });

  if (!r.causes.empty()) {
    auto top = rank_key(r.causes.front().dR * r.causes.front().mass, total);
    for (std::size_t i = 0; i < r.causes.size() && rank_key(r.causes[i].dR * r.causes[i].mass, total) == top; ++i)
      r.most_responsible.push_back(i);
  }
  if (!r.actions.empty()) {
    auto top = rank_key(r.actions.front().dB, total);
    for (std::size_t i = 0; i < r.actions.size() && rank_key(r.actions[i].dB, total) == top; ++i)
      r.most_blamed.push_back(i);
  }
  r.annotated = sources != nullptr;
  return r;
}

bool check_unique_successor_law(const Counterexample& cx, StateId s, ActionId a, StateId t) {
  const double pr = state_mass(cx, s);
  const double tm = transition_mass(cx, s, a, t);
  const bool equal = std::abs(pr - tm) <= 1e-12 * std::max(1.0, pr);
  bool unique = true;
  for (const auto& wp : cx.paths) {
    const auto& p = wp.path;
    for (std::size_t j = 0; j < p.actions.size(); ++j)
      if (p.states[j] == s && p.actions[j] == a && p.states[j + 1] != t) unique = false;
  }
  return equal == unique;
}

bool check_full_blame_law(const DiagnosisReport& report, StateId s, ActionId a) {
  const auto& cx = report.counterexample;
  const BlameEntry* e = report.find_blame(s, a);
  const double dB = e ? e->dB : 0.0;
  double total = 0.0;
  for (const auto& wp : cx.paths) total += wp.probability;
  const bool equal = std::abs(dB - total) <= 1e-12 * std::max(1.0, total);

  std::vector<char> critical(state_space(cx), 0);
  for (const auto& c : report.causes)
    if (c.k == 0) critical[c.state] = 1;
  bool every = true;
  for (const auto& wp : cx.paths) {
    const auto& p = wp.path;
    bool hit = false;
    for (std::size_t j = 0; j < p.actions.size() && !hit; ++j)
      hit = p.states[j] == s && p.actions[j] == a && critical[p.states[j + 1]];
    every = every && hit;
  }
  return equal == every;
}

}  // namespace cxdiag
