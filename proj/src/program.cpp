#include "cxdiag/program.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <deque>
#include <set>
#include <sstream>
#include <unordered_map>

#include "cxdiag/error.hpp"

namespace cxdiag {

// ---------------------------------------------------------------------------
// lexer

namespace {

enum class T {
  End,
  Ident,
  Number,
  String,
  LBracket,
  RBracket,
  LParen,
  RParen,
  Semi,
  Colon,
  Comma,
  Prime,
  Eq,
  Ne,
  Lt,
  Le,
  Gt,
  Ge,
  Plus,
  Minus,
  Star,
  Slash,
  And,
  Or,
  Not,
  Arrow,
  DotDot,
};

struct Tok {
  T kind;
  std::string text;
  std::size_t line;
  std::size_t column;
};

std::vector<Tok> lex(std::string_view src) {
  std::vector<Tok> out;
  std::size_t pos = 0, line = 1, col = 1;
  auto adv = [&](std::size_t n = 1) {
    for (std::size_t k = 0; k < n && pos < src.size(); ++k, ++pos) {
      if (src[pos] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
  };
  auto at = [&](std::size_t off) { return pos + off < src.size() ? src[pos + off] : '\0'; };
  while (pos < src.size()) {
    char c = src[pos];
    if (std::isspace(static_cast<unsigned char>(c))) {
      adv();
      continue;
    }
    if (c == '/' && at(1) == '/') {
      while (pos < src.size() && src[pos] != '\n') adv();
      continue;
    }
    std::size_t l = line, k = col;
    auto push = [&](T kind, std::size_t n) {
      out.push_back({kind, std::string(src.substr(pos, n)), l, k});
      adv(n);
    };
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t end = pos;
      while (end < src.size() && (std::isalnum(static_cast<unsigned char>(src[end])) || src[end] == '_')) ++end;
      push(T::Ident, end - pos);
    } else if (std::isdigit(static_cast<unsigned char>(c)) || (c == '.' && std::isdigit(static_cast<unsigned char>(at(1))))) {
      std::size_t end = pos;
      while (end < src.size() && std::isdigit(static_cast<unsigned char>(src[end]))) ++end;
      if (end < src.size() && src[end] == '.' && !(end + 1 < src.size() && src[end + 1] == '.')) {
        ++end;
        while (end < src.size() && std::isdigit(static_cast<unsigned char>(src[end]))) ++end;
      }
      if (end < src.size() && (src[end] == 'e' || src[end] == 'E')) {
        std::size_t e = end + 1;
        if (e < src.size() && (src[e] == '+' || src[e] == '-')) ++e;
        if (e < src.size() && std::isdigit(static_cast<unsigned char>(src[e]))) {
          end = e;
          while (end < src.size() && std::isdigit(static_cast<unsigned char>(src[end]))) ++end;
        }
      }
      push(T::Number, end - pos);
    } else if (c == '"') {
      std::size_t end = pos + 1;
      while (end < src.size() && src[end] != '"' && src[end] != '\n') ++end;
      if (end >= src.size() || src[end] != '"') throw ParseError("unterminated string", l, k);
      out.push_back({T::String, std::string(src.substr(pos + 1, end - pos - 1)), l, k});
      adv(end - pos + 1);
    } else if (c == '-' && at(1) == '>') {
      push(T::Arrow, 2);
    } else if (c == '.' && at(1) == '.') {
      push(T::DotDot, 2);
    } else if (c == '!' && at(1) == '=') {
      push(T::Ne, 2);
    } else if (c == '<' && at(1) == '=') {
      push(T::Le, 2);
    } else if (c == '>' && at(1) == '=') {
      push(T::Ge, 2);
    } else {
      T kind;
      switch (c) {
        case '[': kind = T::LBracket; break;
        case ']': kind = T::RBracket; break;
        case '(': kind = T::LParen; break;
        case ')': kind = T::RParen; break;
        case ';': kind = T::Semi; break;
        case ':': kind = T::Colon; break;
        case ',': kind = T::Comma; break;
        case '\'': kind = T::Prime; break;
        case '=': kind = T::Eq; break;
        case '<': kind = T::Lt; break;
        case '>': kind = T::Gt; break;
        case '+': kind = T::Plus; break;
        case '-': kind = T::Minus; break;
        case '*': kind = T::Star; break;
        case '/': kind = T::Slash; break;
        case '&': kind = T::And; break;
        case '|': kind = T::Or; break;
        case '!': kind = T::Not; break;
        default: throw ParseError(std::string("unexpected character '") + c + "'", l, k);
      }
      push(kind, 1);
    }
  }
  out.push_back({T::End, "", line, col});
  return out;
}

[[noreturn]] void fail_at(const std::string& msg, const Tok& t) { throw ParseError(msg, t.line, t.column); }
[[noreturn]] void fail_at(const std::string& msg, const Expr& e) { throw ParseError(msg, e.line, e.column); }

// ---------------------------------------------------------------------------
// raw syntax tree

struct RawVariable {
  std::string name;
  Expr low, high;
  std::optional<Expr> init;
  std::size_t line, column;
};

struct RawModule {
  std::string name;
  std::vector<RawVariable> variables;
  std::vector<Command> commands;
  std::size_t line;
};

struct RawConstant {
  std::string name;
  ValueType type;
  std::optional<Expr> value;
  std::size_t line, column;
};

struct RawProgram {
  std::vector<RawConstant> constants;
  std::vector<RawModule> modules;
  std::vector<LabelDecl> labels;
};

class Parser {
 public:
  explicit Parser(std::vector<Tok> toks) : toks_(std::move(toks)) {}

  RawProgram program() {
    RawProgram p;
    if (is_ident("mdp")) ++pos_;
    while (peek().kind != T::End) {
      if (is_ident("const")) p.constants.push_back(constant());
      else if (is_ident("module")) p.modules.push_back(module());
      else if (is_ident("label")) p.labels.push_back(label());
      else fail_at("expected 'const', 'module' or 'label'", peek());
    }
    return p;
  }

 private:
  const Tok& peek(std::size_t off = 0) const { return toks_[std::min(pos_ + off, toks_.size() - 1)]; }
  bool is_ident(std::string_view word, std::size_t off = 0) const {
    return peek(off).kind == T::Ident && peek(off).text == word;
  }
  const Tok& expect(T kind, const char* what) {
    if (peek().kind != kind) fail_at(std::string("expected ") + what, peek());
    return toks_[pos_++];
  }
  void expect_word(const char* word) {
    if (!is_ident(word)) fail_at(std::string("expected '") + word + "'", peek());
    ++pos_;
  }
  const Tok& name(const char* what) {
    static const std::set<std::string> reserved{"module", "endmodule", "const", "label", "init", "true", "false", "min", "max"};
    const Tok& t = expect(T::Ident, what);
    if (reserved.count(t.text)) fail_at("'" + t.text + "' is reserved", t);
    return t;
  }

  RawConstant constant() {
    const Tok& kw = peek();
    ++pos_;
    ValueType type = ValueType::Int;
    if (is_ident("int")) {
      ++pos_;
    } else if (is_ident("double")) {
      type = ValueType::Real;
      ++pos_;
    } else if (is_ident("bool")) {
      type = ValueType::Bool;
      ++pos_;
    }
    const Tok& id = name("constant name");
    RawConstant c{id.text, type, std::nullopt, kw.line, id.column};
    if (peek().kind == T::Eq) {
      ++pos_;
      c.value = expr();
    }
    expect(T::Semi, "';'");
    return c;
  }

  LabelDecl label() {
    const Tok& kw = peek();
    ++pos_;
    const Tok& id = expect(T::String, "quoted label name");
    expect(T::Eq, "'='");
    LabelDecl l{id.text, expr(), kw.line};
    expect(T::Semi, "';'");
    return l;
  }

  RawModule module() {
    const Tok& kw = peek();
    ++pos_;
    RawModule m{name("module name").text, {}, {}, kw.line};
    while (!is_ident("endmodule")) {
      if (peek().kind == T::End) fail_at("missing 'endmodule' for module '" + m.name + "'", peek());
      if (peek().kind == T::LBracket) {
        m.commands.push_back(command());
      } else {
        m.variables.push_back(variable());
      }
    }
    ++pos_;
    return m;
  }

  RawVariable variable() {
    const Tok& id = name("variable declaration or command");
    expect(T::Colon, "':'");
    if (is_ident("bool")) fail_at("only bounded integer variables are supported", peek());
    expect(T::LBracket, "'['");
    RawVariable v{id.text, expr(), {}, std::nullopt, id.line, id.column};
    expect(T::DotDot, "'..'");
    v.high = expr();
    expect(T::RBracket, "']'");
    if (is_ident("init")) {
      ++pos_;
      v.init = expr();
    }
    expect(T::Semi, "';'");
    return v;
  }

  Command command() {
    const Tok& open = expect(T::LBracket, "'['");
    Command c;
    c.line = open.line;
    if (peek().kind == T::Ident) c.action = name("action label").text;
    expect(T::RBracket, "']'");
    c.guard = expr();
    expect(T::Arrow, "'->'");
    c.updates.push_back(update());
    while (peek().kind == T::Plus) {
      ++pos_;
      c.updates.push_back(update());
    }
    expect(T::Semi, "';'");
    return c;
  }

  bool at_assignment() const {
    return (peek().kind == T::LParen && peek(1).kind == T::Ident && peek(2).kind == T::Prime) || is_ident("true");
  }

  Update update() {
    Update u;
    if (at_assignment()) {
      u.probability.literal = Value::real(1.0);
      u.probability.line = peek().line;
      u.probability.column = peek().column;
    } else {
      u.probability = additive();
      expect(T::Colon, "':'");
    }
    if (is_ident("true")) {
      ++pos_;
      return u;
    }
    u.assignments.push_back(assignment());
    while (peek().kind == T::And) {
      ++pos_;
      u.assignments.push_back(assignment());
    }
    return u;
  }

  Assignment assignment() {
    expect(T::LParen, "'(' starting an assignment");
    const Tok& id = name("variable");
    expect(T::Prime, "'''");
    expect(T::Eq, "'='");
    Assignment a{id.text, expr()};
    expect(T::RParen, "')'");
    return a;
  }

  // expressions -----------------------------------------------------------

  static Expr node(ExprOp op, std::vector<Expr> args, const Tok& at) {
    Expr e;
    e.op = op;
    e.args = std::move(args);
    e.line = at.line;
    e.column = at.column;
    return e;
  }

  Expr expr() { return disjunction(); }

  Expr disjunction() {
    auto lhs = conjunction();
    while (peek().kind == T::Or) {
      const Tok& op = toks_[pos_++];
      lhs = node(ExprOp::Or, {std::move(lhs), conjunction()}, op);
    }
    return lhs;
  }

  Expr conjunction() {
    auto lhs = negation();
    // `&` also separates assignments; a conjunct never starts with `(x'`.
    while (peek().kind == T::And && !(peek(1).kind == T::LParen && peek(2).kind == T::Ident && peek(3).kind == T::Prime)) {
      const Tok& op = toks_[pos_++];
      lhs = node(ExprOp::And, {std::move(lhs), negation()}, op);
    }
    return lhs;
  }

  Expr negation() {
    if (peek().kind == T::Not) {
      const Tok& op = toks_[pos_++];
      return node(ExprOp::Not, {negation()}, op);
    }
    return relation();
  }

  Expr relation() {
    auto lhs = additive();
    ExprOp op;
    switch (peek().kind) {
      case T::Eq: op = ExprOp::Eq; break;
      case T::Ne: op = ExprOp::Ne; break;
      case T::Lt: op = ExprOp::Lt; break;
      case T::Le: op = ExprOp::Le; break;
      case T::Gt: op = ExprOp::Gt; break;
      case T::Ge: op = ExprOp::Ge; break;
      default: return lhs;
    }
    const Tok& at = toks_[pos_++];
    return node(op, {std::move(lhs), additive()}, at);
  }

  Expr additive() {
    auto lhs = multiplicative();
    while (peek().kind == T::Plus || peek().kind == T::Minus) {
      // `+` between updates: `... + 0.5:(x'=1)` is handled by the caller, which never calls
      // additive() across an update boundary because assignments end with ')'.
      const Tok& op = toks_[pos_++];
      lhs = node(op.kind == T::Plus ? ExprOp::Add : ExprOp::Sub, {std::move(lhs), multiplicative()}, op);
    }
    return lhs;
  }

  Expr multiplicative() {
    auto lhs = unary();
    while (peek().kind == T::Star || peek().kind == T::Slash) {
      const Tok& op = toks_[pos_++];
      lhs = node(op.kind == T::Star ? ExprOp::Mul : ExprOp::Div, {std::move(lhs), unary()}, op);
    }
    return lhs;
  }

  Expr unary() {
    if (peek().kind == T::Minus) {
      const Tok& op = toks_[pos_++];
      return node(ExprOp::Neg, {unary()}, op);
    }
    return primary();
  }

  Expr primary() {
    const Tok& t = peek();
    if (t.kind == T::Number) {
      ++pos_;
      Expr e = node(ExprOp::Literal, {}, t);
      bool is_int = t.text.find_first_of(".eE") == std::string::npos;
      e.literal = is_int ? Value::integer(std::stoll(t.text)) : Value::real(std::stod(t.text));
      return e;
    }
    if (t.kind == T::LParen) {
      ++pos_;
      auto inner = expr();
      expect(T::RParen, "')'");
      return inner;
    }
    if (t.kind == T::Ident) {
      ++pos_;
      if (t.text == "true" || t.text == "false") {
        Expr e = node(ExprOp::Literal, {}, t);
        e.literal = Value::boolean(t.text == "true");
        return e;
      }
      if (t.text == "min" || t.text == "max") {
        expect(T::LParen, "'('");
        std::vector<Expr> args{expr()};
        while (peek().kind == T::Comma) {
          ++pos_;
          args.push_back(expr());
        }
        expect(T::RParen, "')'");
        if (args.size() < 2) fail_at(t.text + " needs at least two arguments", t);
        return node(t.text == "min" ? ExprOp::Min : ExprOp::Max, std::move(args), t);
      }
      Expr e = node(ExprOp::Name, {}, t);
      e.name = t.text;
      return e;
    }
    fail_at("expected expression", t);
  }

  std::vector<Tok> toks_;
  std::size_t pos_ = 0;
};

// ---------------------------------------------------------------------------
// evaluation and semantic checks

const char* type_name(ValueType t) {
  switch (t) {
    case ValueType::Int: return "int";
    case ValueType::Real: return "double";
    case ValueType::Bool: return "bool";
  }
  return "?";
}

Value apply_op(const Expr& e, std::span<const Value> args) {
  auto numeric = [&](std::size_t i) {
    if (args[i].type == ValueType::Bool) throw DomainError(std::string("expected number, got bool at line ") + std::to_string(e.line));
    return args[i].number;
  };
  auto boolean = [&](std::size_t i) {
    if (args[i].type != ValueType::Bool)
      throw DomainError(std::string("expected bool, got ") + type_name(args[i].type) + " at line " + std::to_string(e.line));
    return args[i].number != 0.0;
  };
  auto arith_type = [&] {
    for (const auto& a : args)
      if (a.type == ValueType::Real) return ValueType::Real;
    return ValueType::Int;
  };
  switch (e.op) {
    case ExprOp::Neg: return {arith_type(), -numeric(0)};
    case ExprOp::Not: return Value::boolean(!boolean(0));
    case ExprOp::Add: return {arith_type(), numeric(0) + numeric(1)};
    case ExprOp::Sub: return {arith_type(), numeric(0) - numeric(1)};
    case ExprOp::Mul: return {arith_type(), numeric(0) * numeric(1)};
    case ExprOp::Div: {
      double d = numeric(1);
      if (d == 0.0) throw DomainError("division by zero at line " + std::to_string(e.line));
      return Value::real(numeric(0) / d);
    }
    case ExprOp::Min:
    case ExprOp::Max: {
      double v = numeric(0);
      for (std::size_t i = 1; i < args.size(); ++i) v = e.op == ExprOp::Min ? std::min(v, numeric(i)) : std::max(v, numeric(i));
      return {arith_type(), v};
    }
    case ExprOp::Eq:
    case ExprOp::Ne: {
      if ((args[0].type == ValueType::Bool) != (args[1].type == ValueType::Bool))
        throw DomainError("comparing bool with number at line " + std::to_string(e.line));
      bool eq = args[0].number == args[1].number;
      return Value::boolean(e.op == ExprOp::Eq ? eq : !eq);
    }
    case ExprOp::Lt: return Value::boolean(numeric(0) < numeric(1));
    case ExprOp::Le: return Value::boolean(numeric(0) <= numeric(1));
    case ExprOp::Gt: return Value::boolean(numeric(0) > numeric(1));
    case ExprOp::Ge: return Value::boolean(numeric(0) >= numeric(1));
    case ExprOp::And: return Value::boolean(boolean(0) && boolean(1));
    case ExprOp::Or: return Value::boolean(boolean(0) || boolean(1));
    default: break;
  }
  throw DomainError("cannot evaluate expression");
}

struct Scope {
  const std::map<std::string, Value>* constants;
  const std::map<std::string, std::uint32_t>* variables;  // may be null: constants only
};

// Replaces names by literals/variables and folds constant subtrees.
void resolve(Expr& e, const Scope& scope) {
  if (e.op == ExprOp::Name) {
    if (auto it = scope.constants->find(e.name); it != scope.constants->end()) {
      e.op = ExprOp::Literal;
      e.literal = it->second;
      return;
    }
    if (scope.variables != nullptr) {
      if (auto it = scope.variables->find(e.name); it != scope.variables->end()) {
        e.op = ExprOp::Variable;
        e.variable = it->second;
        return;
      }
    }
    fail_at("unknown identifier '" + e.name + "'", e);
  }
  if (e.op == ExprOp::Literal || e.op == ExprOp::Variable) return;
  bool constant = true;
  for (auto& a : e.args) {
    resolve(a, scope);
    constant = constant && a.op == ExprOp::Literal;
  }
  if (!constant) return;
  std::vector<Value> vals;
  for (const auto& a : e.args) vals.push_back(a.literal);
  try {
    e.literal = apply_op(e, vals);
  } catch (const DomainError& err) {
    fail_at(err.what(), e);
  }
  e.op = ExprOp::Literal;
  e.args.clear();
}

Value fold_constant(Expr e, const std::map<std::string, Value>& constants) {
  resolve(e, Scope{&constants, nullptr});
  if (e.op != ExprOp::Literal) fail_at("expression is not constant", e);
  return e.literal;
}

int to_int(const Value& v, const Expr& at, const char* what) {
  if (v.type == ValueType::Bool || v.number != std::floor(v.number))
    fail_at(std::string(what) + " must be an integer", at);
  return static_cast<int>(v.number);
}

Value parse_override(const std::string& name, const std::string& text, ValueType type) {
  try {
    std::size_t used = 0;
    switch (type) {
      case ValueType::Int: {
        long long v = std::stoll(text, &used);
        if (used == text.size()) return Value::integer(v);
        break;
      }
      case ValueType::Real: {
        double v = std::stod(text, &used);
        if (used == text.size()) return Value::real(v);
        break;
      }
      case ValueType::Bool:
        if (text == "true" || text == "false") return Value::boolean(text == "true");
        break;
    }
  } catch (const std::exception&) {
  }
  throw ParseError("bad value '" + text + "' for constant " + name + " of type " + type_name(type), 0, 0);
}

}  // namespace

Value evaluate(const Expr& e, std::span<const int> valuation) {
  switch (e.op) {
    case ExprOp::Literal: return e.literal;
    case ExprOp::Variable: return Value::integer(valuation[e.variable]);
    case ExprOp::Name: throw DomainError("unresolved identifier '" + e.name + "'");
    case ExprOp::And: {
      Value l = evaluate(e.args[0], valuation);
      if (l.type == ValueType::Bool && l.number == 0.0) return l;
      Value vals[2] = {l, evaluate(e.args[1], valuation)};
      return apply_op(e, vals);
    }
    case ExprOp::Or: {
      Value l = evaluate(e.args[0], valuation);
      if (l.type == ValueType::Bool && l.number != 0.0) return l;
      Value vals[2] = {l, evaluate(e.args[1], valuation)};
      return apply_op(e, vals);
    }
    default: break;
  }
  Value small[4];
  std::vector<Value> big;
  std::span<Value> vals;
  if (e.args.size() <= 4) {
    vals = std::span<Value>(small, e.args.size());
  } else {
    big.resize(e.args.size());
    vals = big;
  }
  for (std::size_t i = 0; i < e.args.size(); ++i) vals[i] = evaluate(e.args[i], valuation);
  return apply_op(e, vals);
}

Program parse_program(std::string_view text, const ConstantOverrides& overrides, std::string file) {
  RawProgram raw = Parser(lex(text)).program();
  Program out;
  out.file = std::move(file);

  for (const auto& [name, value] : overrides) {
    bool declared = std::any_of(raw.constants.begin(), raw.constants.end(), [&](const RawConstant& c) { return c.name == name; });
    if (!declared) throw ParseError("override for undeclared constant '" + name + "'", 0, 0);
  }
  for (const auto& c : raw.constants) {
    if (out.constants.count(c.name)) throw ParseError("duplicate constant '" + c.name + "'", c.line, c.column);
    Value v;
    if (auto it = overrides.find(c.name); it != overrides.end()) {
      v = parse_override(c.name, it->second, c.type);
    } else if (c.value) {
      v = fold_constant(*c.value, out.constants);
      if (c.type == ValueType::Int && (v.type != ValueType::Int)) fail_at("constant " + c.name + " must be int", *c.value);
      if (c.type == ValueType::Bool && v.type != ValueType::Bool) fail_at("constant " + c.name + " must be bool", *c.value);
      if (c.type == ValueType::Real && v.type == ValueType::Bool) fail_at("constant " + c.name + " must be numeric", *c.value);
      v.type = c.type;
    } else {
      throw ParseError("constant '" + c.name + "' has no value; pass --const " + c.name + "=<value>", c.line, c.column);
    }
    out.constants[c.name] = v;
  }

  std::map<std::string, std::uint32_t> var_index;
  std::map<std::string, std::string> var_owner;
  std::set<std::string> module_names;
  for (const auto& rm : raw.modules) {
    if (!module_names.insert(rm.name).second) throw ParseError("duplicate module '" + rm.name + "'", rm.line, 1);
    Module m{rm.name, {}, {}, rm.line};
    for (const auto& rv : rm.variables) {
      if (var_index.count(rv.name) || out.constants.count(rv.name))
        throw ParseError("duplicate variable '" + rv.name + "'", rv.line, rv.column);
      VariableDecl v;
      v.name = rv.name;
      v.line = rv.line;
      v.low = to_int(fold_constant(rv.low, out.constants), rv.low, "lower bound");
      v.high = to_int(fold_constant(rv.high, out.constants), rv.high, "upper bound");
      if (v.low > v.high) throw ParseError("empty range for '" + rv.name + "'", rv.line, rv.column);
      v.init = rv.init ? to_int(fold_constant(*rv.init, out.constants), *rv.init, "initial value") : v.low;
      if (v.init < v.low || v.init > v.high)
        throw ParseError("initial value of '" + rv.name + "' outside its range", rv.line, rv.column);
      var_index.emplace(rv.name, static_cast<std::uint32_t>(var_index.size()));
      var_owner.emplace(rv.name, rm.name);
      m.variables.push_back(v);
    }
    m.commands = rm.commands;
    out.modules.push_back(std::move(m));
  }

  const Scope scope{&out.constants, &var_index};
  for (auto& m : out.modules) {
    for (auto& c : m.commands) {
      resolve(c.guard, scope);
      if (c.guard.op == ExprOp::Literal && c.guard.literal.type != ValueType::Bool)
        fail_at("guard must be boolean", c.guard);
      bool constant_probs = true;
      double sum = 0.0;
      for (auto& u : c.updates) {
        resolve(u.probability, scope);
        if (u.probability.op == ExprOp::Literal) {
          if (u.probability.literal.type == ValueType::Bool) fail_at("probability must be numeric", u.probability);
          if (u.probability.literal.number < 0.0) fail_at("negative probability", u.probability);
          sum += u.probability.literal.number;
        } else {
          constant_probs = false;
        }
        std::set<std::string> assigned;
        for (auto& a : u.assignments) {
          auto owner = var_owner.find(a.variable);
          if (owner == var_owner.end()) throw ParseError("assignment to unknown variable '" + a.variable + "'", c.line, 1);
          if (owner->second != m.name)
            throw ParseError("module '" + m.name + "' assigns variable '" + a.variable + "' owned by '" + owner->second + "'",
                             c.line, 1);
          if (!assigned.insert(a.variable).second)
            throw ParseError("variable '" + a.variable + "' assigned twice in one update", c.line, 1);
          resolve(a.value, scope);
        }
      }
      if (constant_probs && std::abs(sum - 1.0) > kDistributionTolerance) {
        std::ostringstream msg;
        msg << "update probabilities sum to " << sum << " in module '" << m.name << "'";
        throw ParseError(msg.str(), c.line, 1);
      }
    }
  }

  std::set<std::string> label_names;
  for (auto l : raw.labels) {
    if (!label_names.insert(l.name).second) throw ParseError("duplicate label \"" + l.name + "\"", l.line, 1);
    resolve(l.expr, scope);
    out.labels.push_back(std::move(l));
  }
  return out;
}

// ---------------------------------------------------------------------------
// state-space construction

void SourceMap::add(StateId s, ActionId a, StateId t, const SourceRef& ref) {
  auto& refs = entries_[Key{s, a, t}];
  auto it = std::lower_bound(refs.begin(), refs.end(), ref);
  if (it == refs.end() || *it != ref) refs.insert(it, ref);
}

std::span<const SourceRef> SourceMap::lookup(StateId s, ActionId a, StateId t) const {
  if (auto it = entries_.find(Key{s, a, t}); it != entries_.end()) return it->second;
  return {};
}

std::string BuildResult::describe(StateId s) const {
  std::string out = "(";
  const auto& v = valuations.at(s);
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += variables[i] + "=" + std::to_string(v[i]);
  }
  return out + ")";
}

namespace {

struct ValuationHash {
  std::size_t operator()(const std::vector<int>& v) const noexcept {
    std::size_t h = 1469598103934665603ull;
    for (int x : v) {
      h ^= static_cast<std::size_t>(static_cast<unsigned>(x));
      h *= 1099511628211ull;
    }
    return h;
  }
};

struct Branch {
  double probability;
  std::vector<int> target;
  std::vector<SourceRef> sources;
};

struct PendingChoice {
  std::string action;
  std::vector<Branch> branches;
};

class Explorer {
 public:
  Explorer(const Program& p, const BuildOptions& opt) : program_(p), options_(opt) {
    for (std::size_t mi = 0; mi < p.modules.size(); ++mi) {
      for (const auto& v : p.modules[mi].variables) {
        var_names_.push_back(v.name);
        low_.push_back(v.low);
        high_.push_back(v.high);
        init_.push_back(v.init);
      }
      for (const auto& c : p.modules[mi].commands)
        if (!c.action.empty() && std::find(action_order_.begin(), action_order_.end(), c.action) == action_order_.end())
          action_order_.push_back(c.action);
    }
    for (const auto& a : action_order_) {
      std::vector<std::size_t> participants;
      for (std::size_t mi = 0; mi < p.modules.size(); ++mi)
        for (const auto& c : p.modules[mi].commands)
          if (c.action == a) {
            participants.push_back(mi);
            break;
          }
      participants_.push_back(std::move(participants));
    }
  }

  BuildResult run() {
    BuildResult out;
    out.variables = var_names_;
    intern(init_, kNoAction, 0);

    struct Row {
      StateId s;
      std::string action;
      StateId t;
      double p;
      std::vector<SourceRef> sources;
    };
    std::vector<Row> rows;
    for (std::size_t i = 0; i < valuations_.size(); ++i) {
      const auto s = static_cast<StateId>(i);
      auto choices = expand(valuations_[i]);
      if (choices.empty()) {
        choices.push_back({"_deadlock", {{1.0, valuations_[i], {SourceRef{"(deadlock)", 0}}}}});
      }
      for (auto& choice : choices) {
        // merge branches that lead to the same valuation
        std::map<StateId, std::pair<double, std::vector<SourceRef>>> merged;
        for (auto& b : choice.branches) {
          if (b.probability == 0.0) continue;
          StateId t = intern(b.target, s, 0);
          auto& slot = merged[t];
          slot.first += b.probability;
          slot.second.insert(slot.second.end(), b.sources.begin(), b.sources.end());
        }
        for (auto& [t, pr] : merged) rows.push_back({s, choice.action, t, pr.first, std::move(pr.second)});
      }
    }

    MdpBuilder builder(valuations_.size(), 0);
    for (const auto& l : program_.labels) builder.intern_ap(l.name);
    std::vector<ActionId> discovered_action(valuations_.size(), kNoAction);
    for (const auto& r : rows) {
      ActionId a = builder.action(r.action);
      builder.add_transition(r.s, a, r.t, r.p);
      for (const auto& ref : r.sources) out.source_map.add(r.s, a, r.t, ref);
      if (r.t != 0 && discovered_action[r.t] == kNoAction && parent_[r.t] == r.s) discovered_action[r.t] = a;
    }
    for (std::size_t i = 0; i < valuations_.size(); ++i)
      for (const auto& l : program_.labels) {
        Value v = evaluate(l.expr, valuations_[i]);
        if (v.type != ValueType::Bool) throw DomainError("label \"" + l.name + "\" is not boolean");
        if (v.number != 0.0) builder.add_label(static_cast<StateId>(i), l.name);
      }
    out.mdp = std::move(builder).build();
    out.valuations = std::move(valuations_);
    out.discovered_from.resize(out.valuations.size());
    for (std::size_t i = 0; i < out.valuations.size(); ++i) out.discovered_from[i] = {parent_[i], discovered_action[i]};
    out.discovered_from[0] = {0, kNoAction};
    return out;
  }

 private:
  StateId intern(const std::vector<int>& v, StateId parent, int) {
    auto [it, fresh] = index_.try_emplace(v, static_cast<StateId>(valuations_.size()));
    if (fresh) {
      if (valuations_.size() >= options_.state_cap)
        throw ResourceError("state space exceeds the cap of " + std::to_string(options_.state_cap) + " states");
      valuations_.push_back(v);
      parent_.push_back(parent);
    }
    return it->second;
  }

  std::string describe(const std::vector<int>& v) const {
    std::string out = "(";
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + var_names_[i] + "=" + std::to_string(v[i]);
    return out + ")";
  }

  bool guard_holds(const Command& c, const std::vector<int>& v, const Module& m) const {
    Value g = evaluate(c.guard, v);
    if (g.type != ValueType::Bool)
      throw DomainError("guard of command at " + m.name + ":" + std::to_string(c.line) + " is not boolean");
    return g.number != 0.0;
  }

  // Distribution of a single command as (probability, assignments applied to `base`).
  std::vector<Branch> distribution(const Module& m, const Command& c, const std::vector<int>& v) const {
    std::vector<Branch> out;
    double sum = 0.0;
    for (const auto& u : c.updates) {
      Value p = evaluate(u.probability, v);
      if (p.type == ValueType::Bool || p.number < 0.0)
        throw DomainError("invalid probability in command at " + m.name + ":" + std::to_string(c.line) + " in state " +
                          describe(v));
      sum += p.number;
      Branch b{p.number, v, {SourceRef{m.name, c.line}}};
      for (const auto& a : u.assignments) {
        Value x = evaluate(a.value, v);
        auto idx = index_of(a.variable);
        if (x.type == ValueType::Bool || x.number != std::floor(x.number))
          throw DomainError("non-integer value for '" + a.variable + "' at " + m.name + ":" + std::to_string(c.line));
        auto xi = static_cast<long long>(x.number);
        if (xi < low_[idx] || xi > high_[idx])
          throw DomainError("variable '" + a.variable + "' leaves its range [" + std::to_string(low_[idx]) + ".." +
                            std::to_string(high_[idx]) + "] (value " + std::to_string(xi) + ") in state " + describe(v) +
                            " via command at " + m.name + ":" + std::to_string(c.line));
        b.target[idx] = static_cast<int>(xi);
      }
      out.push_back(std::move(b));
    }
    if (std::abs(sum - 1.0) > kDistributionTolerance)
      throw DomainError("probabilities sum to " + std::to_string(sum) + " in command at " + m.name + ":" +
                        std::to_string(c.line) + " in state " + describe(v));
    return out;
  }

  std::size_t index_of(const std::string& var) const {
    return static_cast<std::size_t>(std::find(var_names_.begin(), var_names_.end(), var) - var_names_.begin());
  }

  std::vector<PendingChoice> expand(const std::vector<int>& v) const {
    std::vector<PendingChoice> out;
    for (const auto& m : program_.modules)
      for (const auto& c : m.commands)
        if (c.action.empty() && guard_holds(c, v, m)) out.push_back({m.name + ":" + std::to_string(c.line), distribution(m, c, v)});

    for (std::size_t ai = 0; ai < action_order_.size(); ++ai) {
      const auto& action = action_order_[ai];
      // enabled commands per participating module, with their index among the module's `action` commands
      std::vector<std::vector<std::pair<std::size_t, const Command*>>> enabled;
      bool blocked = false;
      for (std::size_t mi : participants_[ai]) {
        const auto& m = program_.modules[mi];
        std::vector<std::pair<std::size_t, const Command*>> here;
        std::size_t k = 0;
        for (const auto& c : m.commands) {
          if (c.action != action) continue;
          ++k;
          if (guard_holds(c, v, m)) here.emplace_back(k, &c);
        }
        if (here.empty()) {
          blocked = true;
          break;
        }
        enabled.push_back(std::move(here));
      }
      if (blocked) continue;

      std::size_t combos = 1;
      for (const auto& e : enabled) combos *= e.size();
      std::vector<std::size_t> pick(enabled.size(), 0);
      for (std::size_t n = 0; n < combos; ++n) {
        std::vector<Branch> joint{{1.0, v, {}}};
        std::string name = action;
        if (combos > 1) name += "#";
        for (std::size_t j = 0; j < enabled.size(); ++j) {
          const auto& m = program_.modules[participants_[ai][j]];
          const auto& [k, cmd] = enabled[j][pick[j]];
          if (combos > 1) name += (j ? "." : "") + std::to_string(k);
          auto local = distribution(m, *cmd, v);
          std::vector<Branch> next;
          for (const auto& acc : joint)
            for (const auto& b : local) {
              Branch nb{acc.probability * b.probability, acc.target, acc.sources};
              for (const auto& var : m.variables) {
                auto idx = index_of(var.name);
                nb.target[idx] = b.target[idx];
              }
              nb.sources.insert(nb.sources.end(), b.sources.begin(), b.sources.end());
              next.push_back(std::move(nb));
            }
          joint = std::move(next);
        }
        out.push_back({std::move(name), std::move(joint)});
        for (std::size_t j = enabled.size(); j-- > 0;) {
          if (++pick[j] < enabled[j].size()) break;
          pick[j] = 0;
        }
      }
    }
    return out;
  }

  const Program& program_;
  BuildOptions options_;
  std::vector<std::string> var_names_;
  std::vector<int> low_, high_, init_;
  std::vector<std::string> action_order_;
  std::vector<std::vector<std::size_t>> participants_;
  std::unordered_map<std::vector<int>, StateId, ValuationHash> index_;
  std::vector<std::vector<int>> valuations_;
  std::vector<StateId> parent_;
};

}  // namespace

BuildResult build_mdp(const Program& p, const BuildOptions& options) { return Explorer(p, options).run(); }

}  // namespace cxdiag
