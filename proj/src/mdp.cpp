#include "cxdiag/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "cxdiag/error.hpp"

namespace cxdiag {

std::uint32_t SymbolTable::intern(std::string_view name) {
  if (auto it = index_.find(std::string(name)); it != index_.end()) return it->second;
  auto id = static_cast<std::uint32_t>(names_.size());
  names_.emplace_back(name);
  index_.emplace(names_.back(), id);
  return id;
}

std::optional<std::uint32_t> SymbolTable::find(std::string_view name) const {
  if (auto it = index_.find(std::string(name)); it != index_.end()) return it->second;
  return std::nullopt;
}

void Labeling::add(StateId s, ApId ap) {
  if (s >= sets_.size()) sets_.resize(s + 1);
  auto& set = sets_[s];
  auto it = std::lower_bound(set.begin(), set.end(), ap);
  if (it == set.end() || *it != ap) set.insert(it, ap);
}

bool Labeling::holds(StateId s, ApId ap) const {
  if (s >= sets_.size()) return false;
  return std::binary_search(sets_[s].begin(), sets_[s].end(), ap);
}

std::span<const ApId> Labeling::labels_of(StateId s) const {
  if (s >= sets_.size()) return {};
  return sets_[s];
}

const Choice* Mdp::find_choice(StateId s, ActionId a) const {
  for (const auto& c : choices_.at(s))
    if (c.action == a) return &c;
  return nullptr;
}

std::size_t Mdp::num_transitions() const {
  std::size_t n = 0;
  for (const auto& cs : choices_)
    for (const auto& c : cs) n += c.successors.size();
  return n;
}

MdpBuilder::MdpBuilder(std::size_t num_states, StateId init) {
  mdp_.init_ = init;
  mdp_.choices_.resize(num_states);
  mdp_.labels_.resize(num_states);
}

void MdpBuilder::add_transition(StateId s, ActionId a, StateId target, double probability) {
  if (s >= mdp_.choices_.size()) throw DomainError("transition source " + std::to_string(s) + " out of range");
  auto& cs = mdp_.choices_[s];
  auto it = std::find_if(cs.begin(), cs.end(), [a](const Choice& c) { return c.action == a; });
  if (it == cs.end()) {
    cs.push_back(Choice{a, {}});
    it = std::prev(cs.end());
  }
  it->successors.push_back(Successor{target, probability});
}

Mdp MdpBuilder::build() && {
  for (auto& cs : mdp_.choices_) {
    std::sort(cs.begin(), cs.end(), [](const Choice& x, const Choice& y) { return x.action < y.action; });
    for (auto& c : cs)
      std::stable_sort(c.successors.begin(), c.successors.end(),
                       [](const Successor& x, const Successor& y) { return x.target < y.target; });
  }
  mdp_.labels_.resize(mdp_.choices_.size());
  return std::move(mdp_);
}

std::string to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::InitialStateOutOfRange: return "initial state out of range";
    case ViolationKind::TargetOutOfRange: return "target out of range";
    case ViolationKind::NonPositiveProbability: return "non-positive probability";
    case ViolationKind::DuplicateTransition: return "duplicate transition";
    case ViolationKind::DistributionSum: return "distribution sum";
    case ViolationKind::NoEnabledAction: return "no enabled action";
  }
  return "unknown";
}

std::vector<MdpViolation> validate_mdp(const Mdp& m) {
  std::vector<MdpViolation> out;
  const auto n = m.num_states();
  auto act = [&](ActionId a) { return m.actions().name(a); };
  if (m.initial_state() >= n)
    out.push_back({ViolationKind::InitialStateOutOfRange, m.initial_state(), {}, {},
                   "initial state " + std::to_string(m.initial_state()) + " >= " + std::to_string(n)});

  for (StateId s = 0; s < n; ++s) {
    for (const auto& c : m.choices(s)) {
      double sum = 0.0;
      for (std::size_t i = 0; i < c.successors.size(); ++i) {
        const auto& succ = c.successors[i];
        sum += succ.probability;
        if (succ.target >= n)
          out.push_back({ViolationKind::TargetOutOfRange, s, c.action, succ.target,
                         "state " + std::to_string(s) + " action " + act(c.action) + ": target " +
                             std::to_string(succ.target) + " out of range"});
        if (!(succ.probability > 0.0))
          out.push_back({ViolationKind::NonPositiveProbability, s, c.action, succ.target,
                         "state " + std::to_string(s) + " action " + act(c.action) + ": probability " +
                             std::to_string(succ.probability) + " to " + std::to_string(succ.target)});
        if (i > 0 && c.successors[i - 1].target == succ.target)
          out.push_back({ViolationKind::DuplicateTransition, s, c.action, succ.target,
                         "state " + std::to_string(s) + " action " + act(c.action) + ": duplicate target " +
                             std::to_string(succ.target)});
      }
      if (std::abs(sum - 1.0) > kDistributionTolerance)
        out.push_back({ViolationKind::DistributionSum, s, c.action, {},
                       "state " + std::to_string(s) + " action " + act(c.action) + ": distribution sums to " +
                           std::to_string(sum)});
    }
    if (m.choices(s).empty())
      out.push_back({ViolationKind::NoEnabledAction, s, {}, {}, "state " + std::to_string(s) + " has no enabled action"});
  }
  return out;
}

namespace {

void require_state(const Mdp& m, StateId s) {
  if (s >= m.num_states()) throw DomainError("unknown state " + std::to_string(s));
}

bool is_full(const Choice& c) {
  double sum = 0.0;
  for (const auto& succ : c.successors) sum += succ.probability;
  return std::abs(sum - 1.0) <= kDistributionTolerance;
}

}  // namespace

std::vector<ActionId> enabled_actions(const Mdp& m, StateId s) {
  require_state(m, s);
  std::vector<ActionId> out;
  for (const auto& c : m.choices(s))
    if (is_full(c)) out.push_back(c.action);
  return out;
}

std::vector<StateId> successors(const Mdp& m, StateId s, ActionId a) {
  require_state(m, s);
  const Choice* c = m.find_choice(s, a);
  if (c == nullptr || !is_full(*c))
    throw DomainError("action " + (a < m.actions().size() ? m.actions().name(a) : std::to_string(a)) +
                      " is not enabled in state " + std::to_string(s));
  std::vector<StateId> out;
  for (const auto& succ : c->successors)
    if (succ.probability > 0.0) out.push_back(succ.target);
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

void Scheduler::set(StateId s, ActionId a) {
  if (s >= choice_.size()) choice_.resize(s + 1, kNoAction);
  choice_[s] = a;
}

Dtmc induce_dtmc(const Mdp& m, const Scheduler& d) {
  Dtmc out;
  const auto n = m.num_states();
  require_state(m, m.initial_state());
  out.init_ = m.initial_state();
  out.edges_.resize(n);
  out.reachable_.assign(n, 0);
  out.labels_ = m.labeling();
  out.actions_ = m.actions();

  std::deque<StateId> queue{m.initial_state()};
  out.reachable_[m.initial_state()] = 1;
  while (!queue.empty()) {
    StateId s = queue.front();
    queue.pop_front();
    out.order_.push_back(s);
    ActionId a = d[s];
    if (a == kNoAction) throw DomainError("scheduler has no choice for reachable state " + std::to_string(s));
    const Choice* c = m.find_choice(s, a);
    if (c == nullptr || !is_full(*c))
      throw DomainError("scheduler picks disabled action at state " + std::to_string(s));
    for (const auto& succ : c->successors) {
      if (!(succ.probability > 0.0)) continue;
      out.edges_[s].push_back(DtmcEdge{succ.target, succ.probability, a});
      if (!out.reachable_[succ.target]) {
        out.reachable_[succ.target] = 1;
        queue.push_back(succ.target);
      }
    }
  }
  std::sort(out.order_.begin(), out.order_.end());
  return out;
}

double path_probability(const Mdp& m, const FinitePath& path) {
  if (path.states.empty()) throw DomainError("empty path");
  if (path.actions.size() + 1 != path.states.size())
    throw DomainError("path has " + std::to_string(path.states.size()) + " states but " +
                      std::to_string(path.actions.size()) + " actions");
  for (StateId s : path.states) require_state(m, s);
  double p = 1.0;
  for (std::size_t i = 0; i < path.actions.size(); ++i) {
    const Choice* c = m.find_choice(path.states[i], path.actions[i]);
    double step = 0.0;
    if (c != nullptr)
      for (const auto& succ : c->successors)
        if (succ.target == path.states[i + 1]) step += succ.probability;
    if (!(step > 0.0)) throw DomainError("path step " + std::to_string(i) + " is disconnected");
    p *= step;
  }
  return p;
}

}  // namespace cxdiag
