#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "cxdiag/mdp.hpp"

namespace cxdiag {

// A small guarded-command modelling language:
//
//   mdp
//   const int K = 2;
//   const double loss = 0.1;
//   module station
//     s : [0..4] init 0;
//     [send] (s=0) -> 0.9:(s'=1) + 0.1:(s'=2);
//     [] (s=2) -> (s'=0);
//   endmodule
//   label "done" = s=1;
//
// Modules synchronise on shared action labels (every module whose alphabet contains the label takes
// part); unlabelled commands interleave.

enum class ValueType : std::uint8_t { Int, Real, Bool };

struct Value {
  ValueType type = ValueType::Int;
  double number = 0.0;  // bools are 0/1

  static Value integer(long long v) { return {ValueType::Int, static_cast<double>(v)}; }
  static Value real(double v) { return {ValueType::Real, v}; }
  static Value boolean(bool v) { return {ValueType::Bool, v ? 1.0 : 0.0}; }
};

enum class ExprOp : std::uint8_t {
  Literal,
  Name,      // unresolved identifier
  Variable,  // resolved: index into the global valuation
  Neg,
  Not,
  Add,
  Sub,
  Mul,
  Div,
  Min,
  Max,
  Eq,
  Ne,
  Lt,
  Le,
  Gt,
  Ge,
  And,
  Or,
};

struct Expr {
  ExprOp op = ExprOp::Literal;
  Value literal;
  std::string name;
  std::uint32_t variable = 0;
  std::vector<Expr> args;
  std::size_t line = 0;
  std::size_t column = 0;
};

struct VariableDecl {
  std::string name;
  int low = 0;
  int high = 0;
  int init = 0;
  std::size_t line = 0;
};

struct Assignment {
  std::string variable;
  Expr value;
};

struct Update {
  Expr probability;
  std::vector<Assignment> assignments;
};

struct Command {
  std::string action;  // empty = internal
  Expr guard;
  std::vector<Update> updates;
  std::size_t line = 0;
};

struct Module {
  std::string name;
  std::vector<VariableDecl> variables;
  std::vector<Command> commands;
  std::size_t line = 0;
};

struct LabelDecl {
  std::string name;
  Expr expr;
  std::size_t line = 0;
};

struct Program {
  std::string file;
  std::map<std::string, Value> constants;  // after overrides and folding
  std::vector<Module> modules;
  std::vector<LabelDecl> labels;
};

/// `NAME=value` pairs from the command line.
using ConstantOverrides = std::map<std::string, std::string>;

/// Parses and type-checks a program. Constants are folded (overrides win over declared values),
/// variable bounds evaluated, and every update list whose probabilities are constant must sum to one.
/// Throws ParseError with the location of the problem.
Program parse_program(std::string_view text, const ConstantOverrides& overrides = {}, std::string file = {});

struct SourceRef {
  std::string module;
  std::size_t line = 0;

  auto operator<=>(const SourceRef&) const = default;
};

/// (state, action, successor) -> guarded commands that produced the transition.
class SourceMap {
 public:
  using Key = std::tuple<StateId, ActionId, StateId>;

  void add(StateId s, ActionId a, StateId t, const SourceRef& ref);
  std::span<const SourceRef> lookup(StateId s, ActionId a, StateId t) const;
  std::size_t size() const noexcept { return entries_.size(); }
  const std::map<Key, std::vector<SourceRef>>& entries() const noexcept { return entries_; }

 private:
  std::map<Key, std::vector<SourceRef>> entries_;
};

struct BuildOptions {
  std::size_t state_cap = 1'000'000;
};

struct BuildResult {
  Mdp mdp;
  SourceMap source_map;
  std::vector<std::string> variables;
  std::vector<std::vector<int>> valuations;  ///< indexed by state id
  /// BFS tree: the (predecessor, action) that discovered each state; init has kNoAction.
  std::vector<std::pair<StateId, ActionId>> discovered_from;

  std::string describe(StateId s) const;
};

/// Explores the reachable state space from the initial valuation. States are numbered in BFS order.
/// Throws DomainError on bound or probability violations, ResourceError past the state cap.
BuildResult build_mdp(const Program& p, const BuildOptions& options = {});

/// Evaluates an expression whose names have been resolved to variables.
Value evaluate(const Expr& e, std::span<const int> valuation);

}  // namespace cxdiag
