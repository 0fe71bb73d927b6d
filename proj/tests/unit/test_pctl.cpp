#include <doctest.h>

#include "cxdiag/pctl.hpp"
#include "oracles.hpp"

using namespace cxdiag;
using namespace cxdiag::testing;

namespace {

Labeling labels_of(std::vector<std::vector<std::string>> sets) {
  Labeling l(sets.size());
  for (const char* ap : {"a", "b", "c", "d"}) l.intern(ap);
  for (StateId s = 0; s < sets.size(); ++s)
    for (auto& ap : sets[s]) l.add(s, ap);
  return l;
}

StateFormula atom(const char* n) { return StateFormula::atom(n); }

}  // namespace

TEST_CASE("parse an until property") {
  auto p = parse_property("P<=0.5 [ (a|b) U (c&d) ]");
  CHECK(p.comparison == Comparison::LessEqual);
  CHECK(p.threshold == 0.5);
  CHECK(p.path.kind == PathKind::Until);
  CHECK(!p.path.bound);
  CHECK(p.path.left == StateFormula::disjunction(atom("a"), atom("b")));
  CHECK(p.path.right == StateFormula::conjunction(atom("c"), atom("d")));
}

TEST_CASE("quoted labels resolve against the defined table") {
  SymbolTable defined;
  defined.intern("collision_max_backoff");
  defined.intern("all_delivered");
  auto p = parse_property(R"(P<=0.7 [ !"collision_max_backoff" U "all_delivered" ])", &defined);
  CHECK(p.path.left == StateFormula::negation(atom("collision_max_backoff")));
  CHECK(p.path.right == atom("all_delivered"));
  CHECK_THROWS_AS(parse_property(R"(P<=0.7 [ true U "nope" ])", &defined), ParseError);
}

TEST_CASE("trivial threshold and bounded forms") {
  auto p = parse_property("P<=1.0 [ true U a ]");
  CHECK(p.path.left.kind() == FormulaKind::True);
  auto b = parse_property("P<0.3 [ a U<=4 b ]");
  CHECK(b.comparison == Comparison::Less);
  CHECK(b.path.bound == 4u);
  auto w = parse_property("P<=0.3 [ a W<=2 b ]");
  CHECK(w.path.kind == PathKind::WeakUntil);
}

TEST_CASE("parse errors point at the problem") {
  for (const char* bad : {"P<=0.5 [ a U ]", "P<=1.5 [ a U b ]", "P<=0.5 a U b", "P<=0.5 [ (a | b U c ]", "Q<=0.5 [ a U b ]",
                          "P<=0.5 [ a U<=-1 b ]", "P<=0.5 [ a U b ] junk"})
    CHECK_THROWS_AS(parse_property(bad), ParseError);
  try {
    parse_property("P<=0.5 [ a & U b ]");
  } catch (const ParseError& e) {
    CHECK(e.line() == 1);
    CHECK(e.column() == 14);
  }
}

TEST_CASE("properties file skips comments") {
  auto ps = parse_properties_file("# first\nP<=0.5 [ a U b ]\n\n// second\nP<0.1 [ true U c ]  # trailing\n");
  CHECK(ps.size() == 2);
}

TEST_CASE("state formula evaluation") {
  auto l = labels_of({{"c", "d"}, {}, {"a"}});
  CHECK(eval_state_formula(l, 0, StateFormula::conjunction(atom("c"), atom("d"))));
  CHECK(eval_state_formula(l, 1, StateFormula::negation(atom("a"))));
  CHECK(eval_state_formula(l, 2, StateFormula::disjunction(atom("a"), atom("b"))));
  CHECK_THROWS_AS(eval_state_formula(l, 0, atom("zzz")), DomainError);
}

TEST_CASE("path formula evaluation") {
  auto m = load_fixture("branching");
  auto f = parse_property("P<=0.5 [ (a|b) U (c&d) ]").path;
  const auto& l = m.labeling();
  CHECK(eval_path_formula({{0, 2, 3}, {0, 0}}, l, f));
  CHECK(eval_path_formula({{3}, {}}, l, f));
  CHECK(!eval_path_formula({{0, 2, 4}, {0, 0}}, l, f));
  CHECK(!eval_path_formula({{0, 6, 6}, {0, 0}}, l, f));
  auto bounded = parse_property("P<=0.5 [ (a|b) U<=1 (c&d) ]").path;
  CHECK(!eval_path_formula({{0, 2, 3}, {0, 0}}, l, bounded));
  auto weak = parse_property("P<=0.5 [ (a|b) W (c&d) ]").path;
  CHECK(eval_path_formula({{0, 2, 4}, {0, 0}}, l, weak));
}

TEST_CASE("negation normal form") {
  CHECK(to_nnf(StateFormula::negation(StateFormula::conjunction(atom("a"), atom("b")))) ==
        StateFormula::disjunction(StateFormula::negation(atom("a")), StateFormula::negation(atom("b"))));
  auto ab = StateFormula::disjunction(atom("a"), atom("b"));
  CHECK(to_nnf(ab) == ab);
  CHECK(to_nnf(StateFormula::negation(StateFormula::negation(atom("a")))) == atom("a"));
  CHECK(is_nnf(to_nnf(StateFormula::negation(StateFormula::disjunction(ab, StateFormula::negation(atom("c")))))));
  CHECK(atoms_of(StateFormula::conjunction(atom("b"), StateFormula::disjunction(atom("a"), atom("b")))) ==
        std::vector<std::string>{"a", "b"});
}

TEST_CASE("nnf preserves satisfaction on every state") {
  Rng rng(5);
  const std::vector<std::string> aps{"a", "b", "c"};
  for (const char* stem : {"branching", "blame_split"}) {
    auto m = load_fixture(stem);
    for (int i = 0; i < 200; ++i) {
      auto f = random_state_formula(rng, {"a", "b"}, 4);
      auto g = to_nnf(f);
      REQUIRE(is_nnf(g));
      for (StateId s = 0; s < m.num_states(); ++s) CHECK(eval_state_formula(m.labeling(), s, f) == eval_state_formula(m.labeling(), s, g));
    }
  }
  for (int i = 0; i < 50; ++i) {
    auto m = random_mdp(rng);
    auto f = random_state_formula(rng, aps, 4);
    auto g = to_nnf(f);
    for (StateId s = 0; s < m.num_states(); ++s) CHECK(eval_state_formula(m.labeling(), s, f) == eval_state_formula(m.labeling(), s, g));
  }
}

TEST_CASE("printing then parsing gives the same property") {
  Rng rng(9);
  const std::vector<std::string> aps{"a", "b", "c"};
  for (int i = 0; i < 200; ++i) {
    PropertySpec p;
    p.comparison = i % 2 ? Comparison::Less : Comparison::LessEqual;
    p.threshold = static_cast<double>(i % 10) / 10.0;
    p.path.kind = i % 3 ? PathKind::Until : PathKind::WeakUntil;
    if (i % 4 == 0) p.path.bound = static_cast<std::uint32_t>(i % 7);
    p.path.left = random_state_formula(rng, aps, 3);
    p.path.right = random_state_formula(rng, aps, 3);
    CHECK(parse_property(to_string(p)) == p);
  }
}

TEST_CASE("until implies weak until and is monotone under extension") {
  Rng rng(13);
  const std::vector<std::string> aps{"a", "b", "c"};
  for (int i = 0; i < 300; ++i) {
    auto m = random_mdp(rng);
    PathFormula u{PathKind::Until, random_state_formula(rng, aps, 2), random_state_formula(rng, aps, 2), std::nullopt};
    if (i % 3 == 0) u.bound = static_cast<std::uint32_t>(i % 5);
    PathFormula w = u;
    w.kind = PathKind::WeakUntil;
    FinitePath p{{static_cast<StateId>(rng() % m.num_states())}, {}};
    for (int k = 0; k < 6; ++k) {
      const bool holds = eval_path_formula(p, m.labeling(), u);
      if (holds) CHECK(eval_path_formula(p, m.labeling(), w));
      p.states.push_back(static_cast<StateId>(rng() % m.num_states()));
      p.actions.push_back(0);
      if (holds) CHECK(eval_path_formula(p, m.labeling(), u));
    }
  }
}
