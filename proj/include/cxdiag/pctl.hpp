#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cxdiag/mdp.hpp"

namespace cxdiag {

enum class FormulaKind : std::uint8_t { True, Atom, Not, And, Or };

/// Propositional state formula over atomic propositions. Immutable, cheap to copy.
class StateFormula {
 public:
  StateFormula();  // `true`

  static StateFormula truth();
  static StateFormula atom(std::string name);
  static StateFormula negation(StateFormula operand);
  static StateFormula conjunction(StateFormula lhs, StateFormula rhs);
  static StateFormula disjunction(StateFormula lhs, StateFormula rhs);

  FormulaKind kind() const noexcept;
  const std::string& atom_name() const;
  /// Operand of Not, left operand of And/Or.
  StateFormula lhs() const;
  StateFormula rhs() const;

  /// Number of nodes.
  std::size_t size() const;

  friend bool operator==(const StateFormula& a, const StateFormula& b);

 private:
  struct Node;
  explicit StateFormula(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const Node> node_;
};

enum class PathKind : std::uint8_t { Until, WeakUntil };

struct PathFormula {
  PathKind kind = PathKind::Until;
  StateFormula left;
  StateFormula right;
  std::optional<std::uint32_t> bound;

  friend bool operator==(const PathFormula&, const PathFormula&) = default;
};

enum class Comparison : std::uint8_t { Less, LessEqual, Greater, GreaterEqual };

struct PropertySpec {
  Comparison comparison = Comparison::LessEqual;
  double threshold = 0.0;
  PathFormula path;

  friend bool operator==(const PropertySpec&, const PropertySpec&) = default;
};

std::string to_string(const StateFormula& f);
std::string to_string(const PathFormula& f);
std::string to_string(const PropertySpec& p);
std::string to_string(Comparison c);

/// Parses `P <op> <p> [ <phi1> (U | W | U<=n | W<=n) <phi2> ]`. State formulas use `!`, `&`, `|`,
/// parentheses, `true`, bare identifiers and quoted label names. When `defined_labels` is given, every
/// quoted name must appear in it. Throws ParseError (with line/column) on any error.
PropertySpec parse_property(std::string_view text, const SymbolTable* defined_labels = nullptr);

/// One property per non-empty line; `#` and `//` start comments.
std::vector<PropertySpec> parse_properties_file(std::string_view text, const SymbolTable* defined_labels = nullptr);

/// Throws DomainError when `f` names an AP unknown to the labelling.
bool eval_state_formula(const Labeling& labels, StateId s, const StateFormula& f);

/// Finite-trace semantics: Until needs a witness position within the path (and bound);
/// WeakUntil additionally accepts paths whose every position (up to the bound) satisfies the left side.
bool eval_path_formula(const FinitePath& path, const Labeling& labels, const PathFormula& f);

/// Negation normal form: Not only directly above Atom (or True).
StateFormula to_nnf(const StateFormula& f);
bool is_nnf(const StateFormula& f);

/// Sorted, de-duplicated atom names.
std::vector<std::string> atoms_of(const StateFormula& f);

/// A state formula with atoms resolved to AP ids and nodes flattened children-first.
class BoundFormula {
 public:
  struct Node {
    FormulaKind kind;
    ApId ap;            // Atom only
    std::uint32_t lhs;  // Not/And/Or
    std::uint32_t rhs;  // And/Or
  };

  BoundFormula() = default;
  /// Throws DomainError for atoms missing from `aps`.
  static BoundFormula bind(const StateFormula& f, const SymbolTable& aps);

  std::span<const Node> nodes() const noexcept { return nodes_; }
  std::uint32_t root() const noexcept { return static_cast<std::uint32_t>(nodes_.size() - 1); }
  std::size_t size() const noexcept { return nodes_.size(); }
  const std::vector<ApId>& aps() const noexcept { return aps_; }

  /// `holds(ap)` answers whether an AP is true; `truth` receives one value per node.
  template <class Holds>
  void evaluate(Holds&& holds, std::span<char> truth) const {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const auto& n = nodes_[i];
      switch (n.kind) {
        case FormulaKind::True: truth[i] = 1; break;
        case FormulaKind::Atom: truth[i] = holds(n.ap) ? 1 : 0; break;
        case FormulaKind::Not: truth[i] = !truth[n.lhs]; break;
        case FormulaKind::And: truth[i] = truth[n.lhs] && truth[n.rhs]; break;
        case FormulaKind::Or: truth[i] = truth[n.lhs] || truth[n.rhs]; break;
      }
    }
  }

  template <class Holds>
  bool eval(Holds&& holds) const {
    std::vector<char> truth(nodes_.size());
    evaluate(holds, truth);
    return truth.back() != 0;
  }

  bool eval(const Labeling& labels, StateId s) const {
    return eval([&](ApId ap) { return labels.holds(s, ap); });
  }

  /// Per-state satisfaction for states 0..num_states-1.
  std::vector<char> satisfying(const Labeling& labels, std::size_t num_states) const;

 private:
  std::uint32_t flatten(const StateFormula& f, const SymbolTable& aps);
  std::vector<Node> nodes_;
  std::vector<ApId> aps_;
};

/// Finite-path Until/WeakUntil over arbitrary state predicates.
template <class SatLeft, class SatRight>
bool eval_until(std::span<const StateId> states, PathKind kind, std::optional<std::uint32_t> bound, SatLeft&& left,
                SatRight&& right) {
  const std::size_t horizon = bound ? std::min<std::size_t>(*bound + std::size_t{1}, states.size()) : states.size();
  for (std::size_t j = 0; j < horizon; ++j) {
    if (right(states[j], j)) return true;
    if (!left(states[j], j)) return false;
  }
  return kind == PathKind::WeakUntil;
}

}  // namespace cxdiag
