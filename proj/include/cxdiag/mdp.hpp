#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace cxdiag {

using StateId = std::uint32_t;
using ActionId = std::uint32_t;
using ApId = std::uint32_t;

inline constexpr ActionId kNoAction = std::numeric_limits<ActionId>::max();

/// Tolerance used when checking that a distribution sums to one.
inline constexpr double kDistributionTolerance = 1e-9;

/// Interned string table; ids are dense and assigned in insertion order.
class SymbolTable {
 public:
  std::uint32_t intern(std::string_view name);
  std::optional<std::uint32_t> find(std::string_view name) const;
  const std::string& name(std::uint32_t id) const { return names_.at(id); }
  std::size_t size() const noexcept { return names_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

/// Atomic-proposition labelling L : S -> 2^AP.
class Labeling {
 public:
  Labeling() = default;
  explicit Labeling(std::size_t num_states) : sets_(num_states) {}

  void resize(std::size_t num_states) { sets_.resize(num_states); }
  ApId intern(std::string_view ap) { return aps_.intern(ap); }
  void add(StateId s, ApId ap);
  void add(StateId s, std::string_view ap) { add(s, intern(ap)); }

  bool holds(StateId s, ApId ap) const;
  /// Sorted AP ids holding at `s`; empty for states beyond the table.
  std::span<const ApId> labels_of(StateId s) const;

  const SymbolTable& aps() const noexcept { return aps_; }
  std::size_t num_states() const noexcept { return sets_.size(); }

 private:
  SymbolTable aps_;
  std::vector<std::vector<ApId>> sets_;
};

struct Successor {
  StateId target;
  double probability;
};

/// One action-labelled distribution leaving a state.
struct Choice {
  ActionId action;
  std::vector<Successor> successors;
};

/// Explicit finite MDP. Construct through MdpBuilder; immutable afterwards.
class Mdp {
 public:
  std::size_t num_states() const noexcept { return choices_.size(); }
  StateId initial_state() const noexcept { return init_; }
  std::span<const Choice> choices(StateId s) const { return choices_.at(s); }
  const Choice* find_choice(StateId s, ActionId a) const;

  const SymbolTable& actions() const noexcept { return actions_; }
  const Labeling& labeling() const noexcept { return labels_; }
  std::size_t num_transitions() const;

 private:
  friend class MdpBuilder;
  StateId init_ = 0;
  SymbolTable actions_;
  Labeling labels_;
  std::vector<std::vector<Choice>> choices_;
};

/// Accumulates transitions and labels. No validation happens here; run validate_mdp on the result.
class MdpBuilder {
 public:
  MdpBuilder(std::size_t num_states, StateId init);

  ActionId action(std::string_view label) { return mdp_.actions_.intern(label); }
  void add_transition(StateId s, ActionId a, StateId target, double probability);
  void add_transition(StateId s, std::string_view a, StateId target, double probability) {
    add_transition(s, action(a), target, probability);
  }
  void add_label(StateId s, std::string_view ap) { mdp_.labels_.add(s, ap); }
  ApId intern_ap(std::string_view ap) { return mdp_.labels_.intern(ap); }

  /// Choices sorted by action id, successors by target id. Duplicates are kept.
  Mdp build() &&;

 private:
  Mdp mdp_;
};

enum class ViolationKind {
  InitialStateOutOfRange,
  TargetOutOfRange,
  NonPositiveProbability,
  DuplicateTransition,
  DistributionSum,
  NoEnabledAction,
};

struct MdpViolation {
  ViolationKind kind;
  StateId state;
  std::optional<ActionId> action;
  std::optional<StateId> target;
  std::string message;
};

std::string to_string(ViolationKind kind);

/// Every structural breach of the MDP definition; empty means valid.
std::vector<MdpViolation> validate_mdp(const Mdp& m);

/// Actions at `s` whose distribution sums to one. Throws DomainError for an unknown state.
std::vector<ActionId> enabled_actions(const Mdp& m, StateId s);

/// States reachable from `s` with positive probability under `a`. Throws DomainError if `a` is not enabled.
std::vector<StateId> successors(const Mdp& m, StateId s, ActionId a);

/// Memoryless deterministic scheduler; kNoAction marks an unassigned state.
class Scheduler {
 public:
  Scheduler() = default;
  explicit Scheduler(std::size_t num_states) : choice_(num_states, kNoAction) {}
  explicit Scheduler(std::vector<ActionId> choice) : choice_(std::move(choice)) {}

  ActionId operator[](StateId s) const { return s < choice_.size() ? choice_[s] : kNoAction; }
  void set(StateId s, ActionId a);
  std::size_t size() const noexcept { return choice_.size(); }
  const std::vector<ActionId>& choices() const noexcept { return choice_; }

  bool operator==(const Scheduler&) const = default;

 private:
  std::vector<ActionId> choice_;
};

struct DtmcEdge {
  StateId target;
  double probability;
  ActionId action;  ///< provenance: the MDP action the scheduler picked
};

/// Markov chain induced by a scheduler. Keeps the MDP's state ids; unreachable states carry no edges.
class Dtmc {
 public:
  std::size_t num_states() const noexcept { return edges_.size(); }
  StateId initial_state() const noexcept { return init_; }
  std::span<const DtmcEdge> edges(StateId s) const { return edges_.at(s); }
  bool reachable(StateId s) const { return reachable_.at(s) != 0; }
  const std::vector<StateId>& reachable_states() const noexcept { return order_; }
  const Labeling& labeling() const noexcept { return labels_; }
  const SymbolTable& actions() const noexcept { return actions_; }

 private:
  friend Dtmc induce_dtmc(const Mdp&, const Scheduler&);
  StateId init_ = 0;
  std::vector<std::vector<DtmcEdge>> edges_;
  std::vector<char> reachable_;
  std::vector<StateId> order_;
  Labeling labels_;
  SymbolTable actions_;
};

/// Fixes the scheduler's choice at every reachable state. Throws DomainError when a reachable
/// state has no (or a disabled) scheduled action.
Dtmc induce_dtmc(const Mdp& m, const Scheduler& d);

struct FinitePath {
  std::vector<StateId> states;
  std::vector<ActionId> actions;  ///< size() == states.size() - 1

  std::size_t steps() const noexcept { return actions.size(); }
  StateId last() const { return states.back(); }
  bool operator==(const FinitePath&) const = default;
  auto operator<=>(const FinitePath&) const = default;
};

struct WeightedPath {
  FinitePath path;
  double probability = 0.0;
};

/// Product of step probabilities along `path`; 1 for a single-state path.
/// Throws DomainError naming the first disconnected step.
double path_probability(const Mdp& m, const FinitePath& path);

}  // namespace cxdiag
