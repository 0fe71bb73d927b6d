#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "cxdiag/mdp.hpp"
#include "cxdiag/pctl.hpp"

namespace cxdiag {

inline constexpr double kDefaultEpsilon = 1e-6;

enum class StateClass : std::uint8_t {
  Zero,    // no phi1-path reaches phi2
  Target,  // satisfies phi2
  Maybe,   // solved numerically
};

enum class Kernel : std::uint8_t { Serial, Parallel };

struct CheckOptions {
  double epsilon = kDefaultEpsilon;
  std::size_t max_iterations = 10'000'000;
  Kernel kernel = Kernel::Parallel;
  /// Slack admitted when deciding which actions count as optimal during scheduler extraction.
  double scheduler_tolerance = kDefaultEpsilon;
};

/// Maximal until-probabilities for every state.
struct ValueVector {
  std::vector<double> values;
  std::vector<StateClass> classes;
  std::size_t iterations = 0;
  double residual = 0.0;
  std::optional<std::uint32_t> bound;

  double at(StateId s) const { return values.at(s); }
};

/// Throws DomainError for WeakUntil or a non-positive epsilon.
ValueVector compute_pmax(const Mdp& m, const PathFormula& f, const CheckOptions& options = {});

/// Memoryless scheduler attaining the values in `v` (within the scheduler tolerance). Among optimal
/// actions, prefers ones that make progress towards the target set so end components cannot trap it;
/// remaining ties go to the lowest action id. For step-bounded values an optimal scheduler may need
/// memory; each state then takes the action optimal for the horizon left at its shortest distance
/// from the initial state, which need not attain the bounded optimum.
Scheduler extract_max_scheduler(const Mdp& m, const ValueVector& v, const CheckOptions& options = {});

/// Until-probability of every state in the chain induced by `d`, by value iteration to `epsilon`.
std::vector<double> scheduler_values(const Mdp& m, const Scheduler& d, const PathFormula& f,
                                     double epsilon = 1e-12);

struct Verdict {
  bool holds = true;
  double pmax = 0.0;
  double threshold = 0.0;
  Comparison comparison = Comparison::LessEqual;
  std::optional<Scheduler> witness;
  ValueVector values;
};

/// True when `mass` breaks the upper bound `p` under comparison `c`.
bool exceeds(double mass, Comparison c, double p);

/// Only upper bounds (<, <=) are supported; lower bounds raise DomainError.
Verdict check_property(const Mdp& m, const PropertySpec& spec, const CheckOptions& options = {});

}  // namespace cxdiag
