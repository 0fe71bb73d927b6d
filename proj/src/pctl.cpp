#include "cxdiag/pctl.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "cxdiag/error.hpp"

namespace cxdiag {

struct StateFormula::Node {
  FormulaKind kind;
  std::string atom;
  std::shared_ptr<const Node> lhs;
  std::shared_ptr<const Node> rhs;
};

StateFormula::StateFormula() {
  static const auto true_node = std::make_shared<const Node>(Node{FormulaKind::True, {}, nullptr, nullptr});
  node_ = true_node;
}

StateFormula StateFormula::truth() { return StateFormula(); }

StateFormula StateFormula::atom(std::string name) {
  return StateFormula(std::make_shared<const Node>(Node{FormulaKind::Atom, std::move(name), nullptr, nullptr}));
}

StateFormula StateFormula::negation(StateFormula operand) {
  return StateFormula(std::make_shared<const Node>(Node{FormulaKind::Not, {}, std::move(operand.node_), nullptr}));
}

StateFormula StateFormula::conjunction(StateFormula lhs, StateFormula rhs) {
  return StateFormula(
      std::make_shared<const Node>(Node{FormulaKind::And, {}, std::move(lhs.node_), std::move(rhs.node_)}));
}

StateFormula StateFormula::disjunction(StateFormula lhs, StateFormula rhs) {
  return StateFormula(
      std::make_shared<const Node>(Node{FormulaKind::Or, {}, std::move(lhs.node_), std::move(rhs.node_)}));
}

FormulaKind StateFormula::kind() const noexcept { return node_->kind; }
const std::string& StateFormula::atom_name() const { return node_->atom; }
StateFormula StateFormula::lhs() const { return StateFormula(node_->lhs); }
StateFormula StateFormula::rhs() const { return StateFormula(node_->rhs); }

std::size_t StateFormula::size() const {
  switch (kind()) {
    case FormulaKind::True:
    case FormulaKind::Atom: return 1;
    case FormulaKind::Not: return 1 + lhs().size();
    case FormulaKind::And:
    case FormulaKind::Or: return 1 + lhs().size() + rhs().size();
  }
  return 1;
}

bool operator==(const StateFormula& a, const StateFormula& b) {
  if (a.node_ == b.node_) return true;
  if (a.kind() != b.kind()) return false;
  switch (a.kind()) {
    case FormulaKind::True: return true;
    case FormulaKind::Atom: return a.atom_name() == b.atom_name();
    case FormulaKind::Not: return a.lhs() == b.lhs();
    case FormulaKind::And:
    case FormulaKind::Or: return a.lhs() == b.lhs() && a.rhs() == b.rhs();
  }
  return false;
}

namespace {

bool is_plain_identifier(const std::string& s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  if (s == "true" || s == "false" || s == "U" || s == "W" || s == "P") return false;
  return std::all_of(s.begin(), s.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; });
}

std::string render(const StateFormula& f) {
  switch (f.kind()) {
    case FormulaKind::True: return "true";
    case FormulaKind::Atom: return is_plain_identifier(f.atom_name()) ? f.atom_name() : "\"" + f.atom_name() + "\"";
    case FormulaKind::Not: return "!" + render(f.lhs());
    case FormulaKind::And: return "(" + render(f.lhs()) + " & " + render(f.rhs()) + ")";
    case FormulaKind::Or: return "(" + render(f.lhs()) + " | " + render(f.rhs()) + ")";
  }
  return "?";
}

std::string format_threshold(double p) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", p);
  // shortest representation that round-trips
  for (int prec = 1; prec <= 17; ++prec) {
    char tmp[64];
    std::snprintf(tmp, sizeof tmp, "%.*g", prec, p);
    if (std::stod(tmp) == p) return tmp;
  }
  return buf;
}

}  // namespace

std::string to_string(const StateFormula& f) { return render(f); }

std::string to_string(const PathFormula& f) {
  std::string op = f.kind == PathKind::Until ? "U" : "W";
  if (f.bound) op += "<=" + std::to_string(*f.bound);
  return render(f.left) + " " + op + " " + render(f.right);
}

std::string to_string(Comparison c) {
  switch (c) {
    case Comparison::Less: return "<";
    case Comparison::LessEqual: return "<=";
    case Comparison::Greater: return ">";
    case Comparison::GreaterEqual: return ">=";
  }
  return "?";
}

std::string to_string(const PropertySpec& p) {
  return "P" + to_string(p.comparison) + format_threshold(p.threshold) + " [ " + to_string(p.path) + " ]";
}

// ---------------------------------------------------------------------------
// parser

namespace {

enum class Tok { End, Ident, Quoted, Number, Cmp, LBracket, RBracket, LParen, RParen, Not, And, Or };

struct Token {
  Tok kind;
  std::string text;
  std::size_t line;
  std::size_t column;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    while (true) {
      skip_space();
      if (pos_ >= src_.size()) {
        out.push_back({Tok::End, "", line_, col_});
        return out;
      }
      std::size_t line = line_, col = col_;
      char c = src_[pos_];
      auto single = [&](Tok k) {
        out.push_back({k, std::string(1, c), line, col});
        advance();
      };
      if (c == '[') single(Tok::LBracket);
      else if (c == ']') single(Tok::RBracket);
      else if (c == '(') single(Tok::LParen);
      else if (c == ')') single(Tok::RParen);
      else if (c == '!') single(Tok::Not);
      else if (c == '&') single(Tok::And);
      else if (c == '|') single(Tok::Or);
      else if (c == '<' || c == '>') {
        std::string op(1, c);
        advance();
        if (pos_ < src_.size() && src_[pos_] == '=') {
          op += '=';
          advance();
        }
        out.push_back({Tok::Cmp, op, line, col});
      } else if (c == '=') {
        out.push_back({Tok::Cmp, "=", line, col});
        advance();
      } else if (c == '"') {
        advance();
        std::string text;
        while (pos_ < src_.size() && src_[pos_] != '"' && src_[pos_] != '\n') {
          text += src_[pos_];
          advance();
        }
        if (pos_ >= src_.size() || src_[pos_] != '"') throw ParseError("unterminated quoted label", line, col);
        advance();
        out.push_back({Tok::Quoted, text, line, col});
      } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        std::string text;
        while (pos_ < src_.size() &&
               (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.' || src_[pos_] == 'e' ||
                src_[pos_] == 'E' ||
                ((src_[pos_] == '-' || src_[pos_] == '+') && !text.empty() && (text.back() == 'e' || text.back() == 'E')))) {
          text += src_[pos_];
          advance();
        }
        out.push_back({Tok::Number, text, line, col});
      } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        std::string text;
        while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
          text += src_[pos_];
          advance();
        }
        out.push_back({Tok::Ident, text, line, col});
      } else {
        throw ParseError(std::string("unexpected character '") + c + "'", line, col);
      }
    }
  }

 private:
  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }
  void skip_space() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) advance();
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::size_t col_ = 1;
};

class PropertyParser {
 public:
  PropertyParser(std::vector<Token> tokens, const SymbolTable* labels) : toks_(std::move(tokens)), labels_(labels) {}

  PropertySpec property() {
    PropertySpec spec;
    const Token& p = expect_ident("P");
    (void)p;
    const Token& cmp = peek();
    if (cmp.kind != Tok::Cmp || cmp.text == "=") {
      if (peek().kind == Tok::Ident) fail("only P<op><p> properties are supported", peek());
      fail("expected comparison operator", cmp);
    }
    if (cmp.text == "<") spec.comparison = Comparison::Less;
    else if (cmp.text == "<=") spec.comparison = Comparison::LessEqual;
    else if (cmp.text == ">") spec.comparison = Comparison::Greater;
    else spec.comparison = Comparison::GreaterEqual;
    ++pos_;
    const Token& num = peek();
    if (num.kind != Tok::Number) fail("expected probability threshold", num);
    spec.threshold = to_double(num);
    if (!(spec.threshold >= 0.0 && spec.threshold <= 1.0)) fail("threshold " + num.text + " outside [0,1]", num);
    ++pos_;
    expect(Tok::LBracket, "'['");
    spec.path.left = or_expr();
    const Token& op = peek();
    if (op.kind != Tok::Ident || (op.text != "U" && op.text != "W")) fail("expected 'U' or 'W'", op);
    spec.path.kind = op.text == "U" ? PathKind::Until : PathKind::WeakUntil;
    ++pos_;
    if (peek().kind == Tok::Cmp) {
      const Token& le = peek();
      if (le.text != "<=") fail("step bound must use '<='", le);
      ++pos_;
      const Token& n = peek();
      if (n.kind != Tok::Number || n.text.find_first_not_of("0123456789") != std::string::npos)
        fail("expected non-negative integer step bound", n);
      spec.path.bound = static_cast<std::uint32_t>(std::stoul(n.text));
      ++pos_;
    }
    spec.path.right = or_expr();
    expect(Tok::RBracket, "']'");
    return spec;
  }

  bool at_end() const { return toks_[pos_].kind == Tok::End; }
  const Token& peek() const { return toks_[pos_]; }

  [[noreturn]] static void fail(const std::string& msg, const Token& t) { throw ParseError(msg, t.line, t.column); }

 private:
  StateFormula or_expr() {
    auto lhs = and_expr();
    while (peek().kind == Tok::Or) {
      ++pos_;
      lhs = StateFormula::disjunction(lhs, and_expr());
    }
    return lhs;
  }

  StateFormula and_expr() {
    auto lhs = unary();
    while (peek().kind == Tok::And) {
      ++pos_;
      lhs = StateFormula::conjunction(lhs, unary());
    }
    return lhs;
  }

  StateFormula unary() {
    const Token& t = peek();
    switch (t.kind) {
      case Tok::Not:
        ++pos_;
        return StateFormula::negation(unary());
      case Tok::LParen: {
        ++pos_;
        auto inner = or_expr();
        expect(Tok::RParen, "')'");
        return inner;
      }
      case Tok::Quoted: {
        if (labels_ != nullptr && !labels_->find(t.text)) fail("undefined label \"" + t.text + "\"", t);
        ++pos_;
        return StateFormula::atom(t.text);
      }
      case Tok::Ident: {
        if (t.text == "true") {
          ++pos_;
          return StateFormula::truth();
        }
        if (t.text == "false") {
          ++pos_;
          return StateFormula::negation(StateFormula::truth());
        }
        if (t.text == "P" && toks_[pos_ + 1].kind == Tok::Cmp) fail("nested probability operator is not supported", t);
        if (t.text == "U" || t.text == "W") fail("missing left operand before '" + t.text + "'", t);
        ++pos_;
        return StateFormula::atom(t.text);
      }
      default: fail("expected state formula", t);
    }
  }

  const Token& expect(Tok kind, const char* what) {
    const Token& t = peek();
    if (t.kind != kind) fail(std::string("expected ") + what, t);
    ++pos_;
    return t;
  }

  const Token& expect_ident(const char* text) {
    const Token& t = peek();
    if (t.kind != Tok::Ident || t.text != text) fail(std::string("expected '") + text + "'", t);
    ++pos_;
    return t;
  }

  static double to_double(const Token& t) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(t.text, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != t.text.size()) fail("malformed number '" + t.text + "'", t);
    return v;
  }

  std::vector<Token> toks_;
  const SymbolTable* labels_;
  std::size_t pos_ = 0;
};

}  // namespace

PropertySpec parse_property(std::string_view text, const SymbolTable* defined_labels) {
  PropertyParser parser(Lexer(text).run(), defined_labels);
  auto spec = parser.property();
  if (!parser.at_end()) PropertyParser::fail("unexpected trailing input", parser.peek());
  return spec;
}

std::vector<PropertySpec> parse_properties_file(std::string_view text, const SymbolTable* defined_labels) {
  std::vector<PropertySpec> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    ++line_no;
    for (auto marker : {std::string_view("#"), std::string_view("//")})
      if (auto c = line.find(marker); c != std::string_view::npos) line = line.substr(0, c);
    if (line.find_first_not_of(" \t\r") != std::string_view::npos) {
      try {
        out.push_back(parse_property(line, defined_labels));
      } catch (const ParseError& e) {
        throw ParseError(std::string(e.what()).substr(std::string(e.what()).find(' ') + 1), line_no, e.column());
      }
    }
    if (end == text.size()) break;
    pos = end + 1;
  }
  return out;
}

// ---------------------------------------------------------------------------
// evaluation

bool eval_state_formula(const Labeling& labels, StateId s, const StateFormula& f) {
  switch (f.kind()) {
    case FormulaKind::True: return true;
    case FormulaKind::Atom: {
      auto ap = labels.aps().find(f.atom_name());
      if (!ap) throw DomainError("unknown atomic proposition '" + f.atom_name() + "'");
      return labels.holds(s, *ap);
    }
    case FormulaKind::Not: return !eval_state_formula(labels, s, f.lhs());
    case FormulaKind::And: return eval_state_formula(labels, s, f.lhs()) && eval_state_formula(labels, s, f.rhs());
    case FormulaKind::Or: return eval_state_formula(labels, s, f.lhs()) || eval_state_formula(labels, s, f.rhs());
  }
  return false;
}

bool eval_path_formula(const FinitePath& path, const Labeling& labels, const PathFormula& f) {
  auto left = BoundFormula::bind(f.left, labels.aps());
  auto right = BoundFormula::bind(f.right, labels.aps());
  return eval_until(
      path.states, f.kind, f.bound, [&](StateId s, std::size_t) { return left.eval(labels, s); },
      [&](StateId s, std::size_t) { return right.eval(labels, s); });
}

namespace {

StateFormula nnf(const StateFormula& f, bool negated) {
  switch (f.kind()) {
    case FormulaKind::True:
    case FormulaKind::Atom: return negated ? StateFormula::negation(f) : f;
    case FormulaKind::Not: return nnf(f.lhs(), !negated);
    case FormulaKind::And:
      return negated ? StateFormula::disjunction(nnf(f.lhs(), true), nnf(f.rhs(), true))
                     : StateFormula::conjunction(nnf(f.lhs(), false), nnf(f.rhs(), false));
    case FormulaKind::Or:
      return negated ? StateFormula::conjunction(nnf(f.lhs(), true), nnf(f.rhs(), true))
                     : StateFormula::disjunction(nnf(f.lhs(), false), nnf(f.rhs(), false));
  }
  return f;
}

void collect_atoms(const StateFormula& f, std::set<std::string>& out) {
  switch (f.kind()) {
    case FormulaKind::True: return;
    case FormulaKind::Atom: out.insert(f.atom_name()); return;
    case FormulaKind::Not: collect_atoms(f.lhs(), out); return;
    case FormulaKind::And:
    case FormulaKind::Or:
      collect_atoms(f.lhs(), out);
      collect_atoms(f.rhs(), out);
      return;
  }
}

}  // namespace

StateFormula to_nnf(const StateFormula& f) { return nnf(f, false); }

bool is_nnf(const StateFormula& f) {
  switch (f.kind()) {
    case FormulaKind::True:
    case FormulaKind::Atom: return true;
    case FormulaKind::Not: return f.lhs().kind() == FormulaKind::Atom || f.lhs().kind() == FormulaKind::True;
    case FormulaKind::And:
    case FormulaKind::Or: return is_nnf(f.lhs()) && is_nnf(f.rhs());
  }
  return false;
}

std::vector<std::string> atoms_of(const StateFormula& f) {
  std::set<std::string> out;
  collect_atoms(f, out);
  return {out.begin(), out.end()};
}

BoundFormula BoundFormula::bind(const StateFormula& f, const SymbolTable& aps) {
  BoundFormula out;
  out.nodes_.reserve(f.size());
  out.flatten(f, aps);
  std::sort(out.aps_.begin(), out.aps_.end());
  out.aps_.erase(std::unique(out.aps_.begin(), out.aps_.end()), out.aps_.end());
  return out;
}

std::uint32_t BoundFormula::flatten(const StateFormula& f, const SymbolTable& aps) {
  Node node{f.kind(), 0, 0, 0};
  switch (f.kind()) {
    case FormulaKind::True: break;
    case FormulaKind::Atom: {
      auto ap = aps.find(f.atom_name());
      if (!ap) throw DomainError("unknown atomic proposition '" + f.atom_name() + "'");
      node.ap = *ap;
      aps_.push_back(*ap);
      break;
    }
    case FormulaKind::Not: node.lhs = flatten(f.lhs(), aps); break;
    case FormulaKind::And:
    case FormulaKind::Or:
      node.lhs = flatten(f.lhs(), aps);
      node.rhs = flatten(f.rhs(), aps);
      break;
  }
  nodes_.push_back(node);
  return static_cast<std::uint32_t>(nodes_.size() - 1);
}

std::vector<char> BoundFormula::satisfying(const Labeling& labels, std::size_t num_states) const {
  std::vector<char> out(num_states);
  std::vector<char> truth(nodes_.size());
  for (StateId s = 0; s < num_states; ++s) {
    evaluate([&](ApId ap) { return labels.holds(s, ap); }, truth);
    out[s] = truth.back();
  }
  return out;
}

}  // namespace cxdiag
