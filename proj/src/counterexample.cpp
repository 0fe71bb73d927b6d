#include "cxdiag/counterexample.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <sstream>

namespace cxdiag {

namespace {

// Partial-path priorities are inflated slightly so that rounding in g*h never lets a complete path
// overtake a partial one that would complete with the same probability.
constexpr double kHeuristicSlack = 1.0 + 1e-12;

std::string format_mass(double v) {
  std::ostringstream out;
  out.precision(12);
  out << v;
  return out.str();
}

}  // namespace

PathEnumerator::PathEnumerator(const Dtmc& chain, const PathFormula& f, std::size_t max_paths, double min_prob)
    : chain_(chain), bound_(f.bound), max_paths_(max_paths), min_prob_(min_prob) {
  const auto n = chain.num_states();
  sat1_ = BoundFormula::bind(f.left, chain.labeling().aps()).satisfying(chain.labeling(), n);
  sat2_ = BoundFormula::bind(f.right, chain.labeling().aps()).satisfying(chain.labeling(), n);

  // h(s): best probability of completing from s, found by a max-product Dijkstra run backwards.
  std::vector<std::vector<std::pair<StateId, double>>> pred(n);
  for (StateId s : chain.reachable_states()) {
    if (sat2_[s] || !sat1_[s]) continue;
    for (const auto& e : chain.edges(s)) pred[e.target].emplace_back(s, e.probability);
  }
  heuristic_.assign(n, 0.0);
  using Item = std::pair<double, StateId>;
  std::priority_queue<Item> open;
  for (StateId s : chain.reachable_states())
    if (sat2_[s]) {
      heuristic_[s] = 1.0;
      open.emplace(1.0, s);
    }
  std::vector<char> done(n, 0);
  while (!open.empty()) {
    auto [h, s] = open.top();
    open.pop();
    if (done[s]) continue;
    done[s] = 1;
    for (auto [u, p] : pred[s]) {
      double cand = p * h;
      if (cand > heuristic_[u]) {
        heuristic_[u] = cand;
        open.emplace(cand, u);
      }
    }
  }

  nodes_.push_back({chain.initial_state(), kNoAction, kRoot, 0, 1.0});
  push(0);
}

bool PathEnumerator::before(const Entry& a, const Entry& b) const {
  if (a.priority != b.priority) return a.priority > b.priority;
  if (a.complete != b.complete) return !a.complete;
  if (a.node == b.node) return false;
  auto ta = trace(a.node).states, tb = trace(b.node).states;
  if (ta != tb) return ta < tb;
  return a.node < b.node;
}

FinitePath PathEnumerator::trace(std::uint32_t node) const {
  FinitePath p;
  p.states.resize(nodes_[node].depth + 1);
  p.actions.resize(nodes_[node].depth);
  for (auto k = node; k != kRoot; k = nodes_[k].parent) {
    const auto& nd = nodes_[k];
    p.states[nd.depth] = nd.state;
    if (nd.depth > 0) p.actions[nd.depth - 1] = nd.action;
  }
  return p;
}

void PathEnumerator::push(std::uint32_t node) {
  const auto& nd = nodes_[node];
  Entry e{nd.probability, true, node};
  if (!sat2_[nd.state]) {
    if (!sat1_[nd.state] || heuristic_[nd.state] == 0.0) return;
    if (bound_ && nd.depth >= *bound_) return;
    e = Entry{nd.probability * heuristic_[nd.state] * kHeuristicSlack, false, node};
  }
  heap_.push_back(e);
  std::push_heap(heap_.begin(), heap_.end(), [this](const Entry& x, const Entry& y) { return before(y, x); });
}

std::optional<WeightedPath> PathEnumerator::next() {
  auto cmp = [this](const Entry& x, const Entry& y) { return before(y, x); };
  while (!heap_.empty() && emitted_ < max_paths_) {
    Entry top = heap_.front();
    if (top.priority < min_prob_) {
      heap_.clear();
      break;
    }
    std::pop_heap(heap_.begin(), heap_.end(), cmp);
    heap_.pop_back();
    if (top.complete) {
      ++emitted_;
      return WeightedPath{trace(top.node), nodes_[top.node].probability};
    }
    ++expanded_;
    const Node parent = nodes_[top.node];
    for (const auto& e : chain_.edges(parent.state)) {
      double p = parent.probability * e.probability;
      if (!(p > 0.0)) continue;
      nodes_.push_back({e.target, e.action, top.node, parent.depth + 1, p});
      push(static_cast<std::uint32_t>(nodes_.size() - 1));
    }
  }
  return std::nullopt;
}

std::vector<WeightedPath> enumerate_satisfying_paths(const Dtmc& chain, const PathFormula& f, std::size_t max_paths,
                                                     double min_prob) {
  PathEnumerator it(chain, f, max_paths, min_prob);
  std::vector<WeightedPath> out;
  while (auto p = it.next()) out.push_back(std::move(*p));
  return out;
}

IncompleteCounterexample::IncompleteCounterexample(double partial_mass, std::size_t paths, double threshold)
    : ResourceError("counterexample incomplete: " + std::to_string(paths) + " paths carry mass " +
                    format_mass(partial_mass) + ", which does not exceed " + format_mass(threshold) +
                    " (raise --max-paths, lower --min-prob, or tighten --epsilon)"),
      partial_mass_(partial_mass),
      paths_(paths) {}

Counterexample build_mipcx(const Mdp& m, const PropertySpec& spec, const CounterexampleOptions& options) {
  auto verdict = check_property(m, spec, options.check);
  if (verdict.holds) throw DomainError("property holds; there is no counterexample: " + to_string(spec));
  return build_mipcx(m, spec, *verdict.witness, verdict.pmax, options);
}

Counterexample build_mipcx(const Mdp& m, const PropertySpec& spec, const Scheduler& d, double pmax,
                           const CounterexampleOptions& options) {
  if (spec.path.kind != PathKind::Until)
    throw DomainError("counterexamples are generated for Until properties only, got " + to_string(spec.path));
  Counterexample cx;
  cx.property = spec;
  cx.pmax = pmax;
  cx.scheduler = d;
  cx.actions = m.actions();
  cx.labels = m.labeling();
  const Dtmc chain = induce_dtmc(m, d);
  PathEnumerator it(chain, spec.path, options.max_paths, options.min_prob);
  while (!exceeds(cx.total_mass, spec.comparison, spec.threshold)) {
    auto p = it.next();
    if (!p) throw IncompleteCounterexample(cx.total_mass, cx.paths.size(), spec.threshold);
    cx.total_mass += p->probability;
    cx.paths.push_back(std::move(*p));
  }
  return cx;
}

std::string to_string(CxViolationKind kind) {
  switch (kind) {
    case CxViolationKind::UnsupportedFormula: return "unsupported formula";
    case CxViolationKind::MalformedPath: return "malformed path";
    case CxViolationKind::PathNotSatisfying: return "path does not satisfy the formula";
    case CxViolationKind::TargetNotLast: return "last state does not satisfy the target formula";
    case CxViolationKind::EarlierTarget: return "target formula holds before the last state";
    case CxViolationKind::DuplicatePath: return "duplicate path";
    case CxViolationKind::NotDescending: return "paths not in descending probability";
    case CxViolationKind::MassMismatch: return "total mass mismatch";
    case CxViolationKind::MassBelowThreshold: return "mass below threshold";
    case CxViolationKind::ProbabilityMismatch: return "path probability mismatch";
    case CxViolationKind::SchedulerMismatch: return "path disagrees with scheduler";
  }
  return "unknown";
}

std::vector<CxViolation> verify_counterexample(const Counterexample& cx, const Labeling& labels, const Mdp* model) {
  std::vector<CxViolation> out;
  auto report = [&](CxViolationKind kind, std::optional<std::size_t> path, std::string detail) {
    std::string msg = to_string(kind);
    if (path) msg = "path " + std::to_string(*path) + ": " + msg;
    if (!detail.empty()) msg += " (" + detail + ")";
    out.push_back({kind, path, std::move(msg)});
  };
  const auto& f = cx.property.path;
  if (f.kind != PathKind::Until) {
    report(CxViolationKind::UnsupportedFormula, std::nullopt, to_string(f));
    return out;
  }
  BoundFormula left, right;
  try {
    left = BoundFormula::bind(f.left, labels.aps());
    right = BoundFormula::bind(f.right, labels.aps());
  } catch (const DomainError& e) {
    report(CxViolationKind::UnsupportedFormula, std::nullopt, e.what());
    return out;
  }

  double sum = 0.0;
  for (std::size_t i = 0; i < cx.paths.size(); ++i) {
    const auto& wp = cx.paths[i];
    const auto& states = wp.path.states;
    sum += wp.probability;
    if (states.empty() || wp.path.actions.size() + 1 != states.size()) {
      report(CxViolationKind::MalformedPath, i, "state and action counts disagree");
      continue;
    }
    if (!(wp.probability > 0.0) || wp.probability > 1.0)
      report(CxViolationKind::MalformedPath, i, "probability " + format_mass(wp.probability) + " outside (0,1]");
    const StateId last = states.back();
    if (!right.eval(labels, last)) report(CxViolationKind::TargetNotLast, i, "state " + std::to_string(last));
    for (std::size_t j = 0; j + 1 < states.size(); ++j) {
      if (right.eval(labels, states[j])) {
        report(CxViolationKind::EarlierTarget, i, "position " + std::to_string(j) + ", state " + std::to_string(states[j]));
        break;
      }
    }
    bool sat = eval_until(
        states, f.kind, f.bound, [&](StateId s, std::size_t) { return left.eval(labels, s); },
        [&](StateId s, std::size_t) { return right.eval(labels, s); });
    if (!sat) report(CxViolationKind::PathNotSatisfying, i, to_string(f));
    for (std::size_t j = 0; j < wp.path.actions.size(); ++j) {
      ActionId chosen = cx.scheduler[states[j]];
      if (chosen != kNoAction && chosen != wp.path.actions[j]) {
        report(CxViolationKind::SchedulerMismatch, i, "state " + std::to_string(states[j]));
        break;
      }
    }
    if (model != nullptr) {
      try {
        double p = path_probability(*model, wp.path);
        if (std::abs(p - wp.probability) > 1e-12 * std::max(p, wp.probability))
          report(CxViolationKind::ProbabilityMismatch, i, "model gives " + format_mass(p));
      } catch (const DomainError& e) {
        report(CxViolationKind::MalformedPath, i, e.what());
      }
    }
    if (i > 0 && wp.probability > cx.paths[i - 1].probability) report(CxViolationKind::NotDescending, i, "");
  }

  std::vector<std::size_t> order(cx.paths.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return cx.paths[a].path < cx.paths[b].path; });
  for (std::size_t k = 1; k < order.size(); ++k)
    if (cx.paths[order[k]].path == cx.paths[order[k - 1]].path)
      report(CxViolationKind::DuplicatePath, order[k], "same as path " + std::to_string(order[k - 1]));

  if (std::abs(sum - cx.total_mass) > 1e-9)
    report(CxViolationKind::MassMismatch, std::nullopt,
           "declared " + format_mass(cx.total_mass) + ", paths sum to " + format_mass(sum));
  if (!exceeds(sum, cx.property.comparison, cx.property.threshold))
    report(CxViolationKind::MassBelowThreshold, std::nullopt,
           format_mass(sum) + " does not exceed " + format_mass(cx.property.threshold));
  return out;
}

}  // namespace cxdiag
