#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cxdiag/counterexample.hpp"
#include "cxdiag/program.hpp"

namespace cxdiag {

/// X = x: an atomic proposition with the value it takes in the cause.
struct Literal {
  ApId ap = 0;
  bool positive = true;

  auto operator<=>(const Literal&) const = default;
};

std::string to_string(const Literal& l, const SymbolTable& aps);

/// Which side of the until produced a cause.
enum class CauseOrigin : std::uint8_t { Left, Right, Both };

std::string to_string(CauseOrigin o);

/// Responsibility 1/(k+1) for a contingency of size k.
struct FoundCause {
  Literal literal;
  std::uint32_t k = 0;
  double dR() const noexcept { return 1.0 / (k + 1.0); }
};

/// How a disjunction whose operands both hold charges each branch.
enum class OrRule : std::uint8_t {
  /// Charge the number of literal switches needed to falsify the sibling.
  MinimalFlip,
  /// Charge one switch per such disjunction, whatever the sibling's shape.
  Unit,
};

struct DiagnosisStats {
  std::size_t formula_nodes = 0;  // nodes visited while finding causes
  std::size_t path_steps = 0;     // states and transitions visited for masses
  std::size_t blame_terms = 0;    // per-path blame contributions

  std::size_t total() const noexcept { return formula_nodes + path_steps + blame_terms; }
};

/// Syntactic causes of `s |= psi`. `psi` must be in negation normal form and hold at `s`
/// (DomainError otherwise). Literals found more than once keep their largest responsibility.
std::vector<FoundCause> find_causes(StateId s, const Labeling& labels, const StateFormula& psi, std::uint32_t w = 0,
                                    OrRule rule = OrRule::MinimalFlip, DiagnosisStats* stats = nullptr);

/// Sum of the probabilities of the paths visiting `s`, each path counted once.
double state_mass(const Counterexample& cx, StateId s);

/// Sum of the probabilities of the paths taking the step (s, a, t).
double transition_mass(const Counterexample& cx, StateId s, ActionId a, StateId t);

/// Mass of the paths that still satisfy the formula once the given propositions are toggled at
/// every occurrence of `s`.
double mass_after_flip(const Counterexample& cx, StateId s, const std::vector<ApId>& flipped);

/// Whether toggling the literal's proposition at `s` leaves a set of paths that no longer breaks `p`.
bool is_critical(const Counterexample& cx, StateId s, const Literal& literal, double p);

struct OracleResult {
  /// Size of the smallest contingency, or empty when the literal is not a cause.
  std::optional<std::uint32_t> k;
  std::vector<ApId> contingency;

  bool is_cause() const noexcept { return k.has_value(); }
  double dR() const noexcept { return k ? 1.0 / (*k + 1.0) : 0.0; }
};

inline constexpr std::size_t kDefaultOracleCap = 20;

/// Brute-force responsibility. Searches contingencies W over the property's propositions other than
/// the literal's, smallest first: switching W alone must keep the path set a counterexample, and
/// switching W together with the literal must not. Throws ResourceError past `cap` propositions.
OracleResult responsibility_oracle(const Counterexample& cx, StateId s, const Literal& literal, double p,
                                   std::size_t cap = kDefaultOracleCap);

struct Cause {
  StateId state = 0;
  Literal literal;
  std::uint32_t k = 0;
  double dR = 1.0;
  double mass = 0.0;
  double normalized_mass = 0.0;
  CauseOrigin origin = CauseOrigin::Left;
};

struct Contribution {
  StateId successor = 0;
  double mass = 0.0;
  double max_dR = 0.0;  // 0 when the successor has no cause
  std::vector<Cause> causes;  // descending dR * mass
  std::vector<SourceRef> sources;
};

struct BlameEntry {
  StateId state = 0;
  ActionId action = 0;
  double dB = 0.0;
  std::vector<Contribution> contributions;
};

/// Source-command lookup for transitions. `actions` is the action table the map's ids refer to.
struct SourceAnnotations {
  const SourceMap& map;
  const SymbolTable& actions;
};

struct DiagnosisOptions {
  OrRule or_rule = OrRule::MinimalFlip;
};

struct DiagnosisReport {
  Counterexample counterexample;
  std::vector<Cause> causes;  // all causes, descending dR * mass
  std::vector<BlameEntry> actions;  // descending dB
  std::vector<std::size_t> most_responsible;  // indices into causes
  std::vector<std::size_t> most_blamed;       // indices into actions
  bool annotated = false;
  DiagnosisStats stats;

  const Cause* find_cause(StateId s, const Literal& l) const;
  const BlameEntry* find_blame(StateId s, ActionId a) const;
};

/// Causes, transition masses and blame for every state and action of the counterexample, ordered for
/// presentation. Throws DomainError for WeakUntil.
DiagnosisReport generate_diagnoses(const Counterexample& cx, const PropertySpec& spec,
                                   const SourceAnnotations* sources = nullptr, const DiagnosisOptions& options = {});

/// Blame of a single (state, action) from a finished report's causes.
BlameEntry blame(const Counterexample& cx, StateId s, ActionId a, const std::vector<Cause>& causes);

/// Transition mass equals the state's mass exactly when the successor is the state's only successor
/// in the counterexample. Returns whether that equivalence holds for (s, a, t).
bool check_unique_successor_law(const Counterexample& cx, StateId s, ActionId a, StateId t);

/// Blame equals the counterexample's mass exactly when every path takes an a-step out of s into a
/// state with a critical cause. Returns whether that equivalence holds for (s, a).
bool check_full_blame_law(const DiagnosisReport& report, StateId s, ActionId a);

/// Human-readable report, actions first, then their causes and transitions.
struct TextOptions {
  bool normalize = false;
  const std::vector<std::string>* state_names = nullptr;
};
std::string render_text(const DiagnosisReport& r, const TextOptions& options = {});
std::string render_json(const DiagnosisReport& r);

}  // namespace cxdiag
