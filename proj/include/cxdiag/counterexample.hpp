#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "cxdiag/checker.hpp"
#include "cxdiag/error.hpp"
#include "cxdiag/mdp.hpp"
#include "cxdiag/pctl.hpp"

namespace cxdiag {

inline constexpr std::size_t kDefaultMaxPaths = 100'000;
inline constexpr double kDefaultMinProb = 1e-15;

/// Lazily enumerates the satisfying finite paths of a chain in non-increasing probability.
/// Every path ends at its first phi2-state; ties are ordered by the state sequence.
class PathEnumerator {
 public:
  PathEnumerator(const Dtmc& chain, const PathFormula& f, std::size_t max_paths = kDefaultMaxPaths,
                 double min_prob = kDefaultMinProb);

  std::optional<WeightedPath> next();
  std::size_t emitted() const noexcept { return emitted_; }
  std::size_t expanded() const noexcept { return expanded_; }

 private:
  struct Node {
    StateId state;
    ActionId action;       // action taken into `state`
    std::uint32_t parent;  // kRoot for the initial node
    std::uint32_t depth;
    double probability;
  };
  struct Entry {
    double priority;
    bool complete;
    std::uint32_t node;
  };
  static constexpr std::uint32_t kRoot = std::numeric_limits<std::uint32_t>::max();

  bool before(const Entry& a, const Entry& b) const;
  FinitePath trace(std::uint32_t node) const;
  void push(std::uint32_t node);

  const Dtmc& chain_;
  std::optional<std::uint32_t> bound_;
  std::vector<char> sat1_, sat2_;
  std::vector<double> heuristic_;
  std::vector<Node> nodes_;
  std::vector<Entry> heap_;
  std::size_t max_paths_;
  double min_prob_;
  std::size_t emitted_ = 0;
  std::size_t expanded_ = 0;
};

/// Convenience wrapper draining a PathEnumerator.
std::vector<WeightedPath> enumerate_satisfying_paths(const Dtmc& chain, const PathFormula& f,
                                                     std::size_t max_paths = kDefaultMaxPaths,
                                                     double min_prob = kDefaultMinProb);

/// A set of paths under one scheduler whose mass breaks the property's bound.
/// Carries its own action and proposition tables so it can be diagnosed without the model.
struct Counterexample {
  PropertySpec property;
  double pmax = 0.0;
  Scheduler scheduler;
  std::vector<WeightedPath> paths;  // descending probability
  double total_mass = 0.0;
  SymbolTable actions;
  Labeling labels;
};

struct CounterexampleOptions {
  CheckOptions check;
  std::size_t max_paths = kDefaultMaxPaths;
  double min_prob = kDefaultMinProb;
};

/// Raised when enumeration stops before the accumulated mass breaks the bound.
class IncompleteCounterexample : public ResourceError {
 public:
  IncompleteCounterexample(double partial_mass, std::size_t paths, double threshold);
  double partial_mass() const noexcept { return partial_mass_; }
  std::size_t paths() const noexcept { return paths_; }

 private:
  double partial_mass_;
  std::size_t paths_;
};

/// Most indicative counterexample: the fewest most probable paths under the maximising scheduler.
/// Throws DomainError when the property holds.
Counterexample build_mipcx(const Mdp& m, const PropertySpec& spec, const CounterexampleOptions& options = {});

/// Greedy assembly from an already extracted scheduler.
Counterexample build_mipcx(const Mdp& m, const PropertySpec& spec, const Scheduler& d, double pmax,
                           const CounterexampleOptions& options = {});

enum class CxViolationKind {
  UnsupportedFormula,
  MalformedPath,
  PathNotSatisfying,
  TargetNotLast,
  EarlierTarget,
  DuplicatePath,
  NotDescending,
  MassMismatch,
  MassBelowThreshold,
  ProbabilityMismatch,
  SchedulerMismatch,
};

std::string to_string(CxViolationKind kind);

struct CxViolation {
  CxViolationKind kind;
  std::optional<std::size_t> path;
  std::string message;
};

/// Every breach of the counterexample invariants. With a model, path probabilities and scheduler
/// consistency are also checked.
std::vector<CxViolation> verify_counterexample(const Counterexample& cx, const Labeling& labels,
                                               const Mdp* model = nullptr);

/// JSON exchange format (format_version 1).
std::string counterexample_to_json(const Counterexample& cx);
/// Throws ParseError on malformed input.
Counterexample counterexample_from_json(std::string_view text);

}  // namespace cxdiag
