#include <doctest.h>

#include <map>

#include "cxdiag/explicit_io.hpp"
#include "cxdiag/program.hpp"
#include "oracles.hpp"

using namespace cxdiag;
using namespace cxdiag::testing;

namespace {

BuildResult build(std::string_view text, const ConstantOverrides& o = {}, std::size_t cap = 1'000'000) {
  return build_mdp(parse_program(text, o), BuildOptions{cap});
}

const char* kBusStation = R"(mdp
module bus
  b : [0..2] init 0;
  [send1] (b=0) -> (b'=1);
  [send2] (b=1|b=2) & (y2<sigma) -> (b'=2);
  [] (b>0) -> (b'=0);
endmodule
module station
  y2 : [0..3] init 0;
  [send1] (y2<3) -> 0.5:(y2'=y2+1) + 0.5:(y2'=0);
endmodule
const int sigma = 2;
)";

}  // namespace

TEST_CASE("a bus command with an implicit probability") {
  auto p = parse_program(kBusStation);
  REQUIRE(p.modules.size() == 2);
  const auto& c = p.modules[0].commands[0];
  CHECK(c.action == "send1");
  CHECK(c.updates.size() == 1);
  CHECK(c.line == 4);
  const auto& g = p.modules[0].commands[1].guard;
  CHECK(g.op == ExprOp::And);
  CHECK(g.args[0].op == ExprOp::Or);
  CHECK(g.args[1].op == ExprOp::Lt);
  CHECK(p.modules[1].commands[0].updates.size() == 2);
}

TEST_CASE("synchronised transitions cite every participating command") {
  auto r = build(kBusStation);
  CHECK(validate_mdp(r.mdp).empty());
  const ActionId send1 = *r.mdp.actions().find("send1");
  auto targets = successors(r.mdp, 0, send1);
  REQUIRE(targets.size() == 2);
  for (StateId t : targets) {
    auto refs = r.source_map.lookup(0, send1, t);
    REQUIRE(refs.size() == 2);
    CHECK(refs[0].module == "bus");
    CHECK(refs[0].line == 4);
    CHECK(refs[1].module == "station");
    CHECK(refs[1].line == 10);
  }
}

TEST_CASE("single self-loop program") {
  auto r = build("module m\n x : [0..1] init 0;\n [tick] true -> (x'=x);\nendmodule\n");
  CHECK(r.mdp.num_states() == 1);
  CHECK(validate_mdp(r.mdp).empty());
  CHECK(r.describe(0) == "(x=0)");
}

TEST_CASE("case-study programs elaborate cleanly") {
  for (const char* name : {"csma.pm", "zeroconf.pm"}) {
    auto r = build(read_file(fixture_path(name)));
    CHECK(validate_mdp(r.mdp).empty());
    CHECK(r.mdp.num_states() <= 500);
    std::size_t sourced = 0;
    for (StateId s = 0; s < r.mdp.num_states(); ++s)
      for (const auto& c : r.mdp.choices(s))
        for (const auto& e : c.successors) {
          CHECK(!r.source_map.lookup(s, c.action, e.target).empty());
          ++sourced;
        }
    CHECK(sourced == r.mdp.num_transitions());
  }
}

TEST_CASE("elaboration is deterministic") {
  const auto text = read_file(fixture_path("csma.pm"));
  auto a = build(text), b = build(text);
  CHECK(a.valuations == b.valuations);
  CHECK(write_transitions(a.mdp) == write_transitions(b.mdp));
}

TEST_CASE("synchronised probabilities multiply") {
  auto r = build(R"(module a
  x : [0..1] init 0;
  [go] x=0 -> 0.3:(x'=1) + 0.7:(x'=0);
  [] x=1 -> true;
endmodule
module b
  y : [0..1] init 0;
  [go] y=0 -> 0.4:(y'=1) + 0.6:(y'=0);
  [] y=1 -> true;
endmodule)");
  const ActionId go = *r.mdp.actions().find("go");
  std::map<std::pair<int, int>, double> mass;
  for (const auto& e : r.mdp.find_choice(0, go)->successors) mass[{r.valuations[e.target][0], r.valuations[e.target][1]}] += e.probability;
  CHECK(mass[{1, 1}] == doctest::Approx(0.12).epsilon(1e-12));
  CHECK(mass[{1, 0}] == doctest::Approx(0.18).epsilon(1e-12));
  CHECK(mass[{0, 1}] == doctest::Approx(0.28).epsilon(1e-12));
  CHECK(mass[{0, 0}] == doctest::Approx(0.42).epsilon(1e-12));
}

TEST_CASE("every state is reachable along its discovery witness") {
  auto r = build(read_file(fixture_path("zeroconf.pm")));
  Rng rng(21);
  for (int i = 0; i < 10; ++i) {
    StateId s = static_cast<StateId>(rng() % r.mdp.num_states());
    FinitePath p{{s}, {}};
    while (p.states.front() != r.mdp.initial_state()) {
      auto [pred, a] = r.discovered_from[p.states.front()];
      REQUIRE(a != kNoAction);
      p.states.insert(p.states.begin(), pred);
      p.actions.insert(p.actions.begin(), a);
    }
    CHECK(path_probability(r.mdp, p) > 0.0);
  }
}

TEST_CASE("two enabled commands under one label become separate choices") {
  auto r = build(R"(module m
  x : [0..2] init 0;
  [go] x=0 -> (x'=1);
  [go] x=0 -> (x'=2);
  [] x>0 -> true;
endmodule)");
  auto acts = enabled_actions(r.mdp, 0);
  CHECK(acts.size() == 2);
  for (ActionId a : acts) CHECK(r.mdp.actions().name(a).rfind("go", 0) == 0);
}

TEST_CASE("deadlocked states get a self-loop") {
  auto r = build("module m\n x : [0..1] init 0;\n [] x=0 -> (x'=1);\nendmodule\n");
  CHECK(validate_mdp(r.mdp).empty());
  CHECK(successors(r.mdp, 1, enabled_actions(r.mdp, 1).front()) == std::vector<StateId>{1});
}

TEST_CASE("constants and overrides") {
  const char* text = "const int K = 1;\nconst double p = 0.25;\nmodule m\n x : [0..K] init 0;\n [] x<K -> p:(x'=x+1) + 1-p:(x'=x);\n [] x=K -> true;\nendmodule\nlabel \"top\" = x=K;\n";
  CHECK(build(text).mdp.num_states() == 2);
  auto r = build(text, {{"K", "3"}});
  CHECK(r.mdp.num_states() == 4);
  CHECK(r.mdp.labeling().aps().find("top"));
  CHECK_THROWS_AS(parse_program(text, {{"K", "1.5"}}), ParseError);
  CHECK_THROWS_AS(parse_program(text, {{"nope", "1"}}), ParseError);
}

TEST_CASE("semantic errors") {
  CHECK_THROWS_AS(parse_program("module m\n x : [0..1] init 0;\n x : [0..1] init 0;\nendmodule\n"), ParseError);
  CHECK_THROWS_AS(parse_program("module m\n x : [0..1] init 0;\n [] x=0 -> 0.5:(x'=1) + 0.4:(x'=0);\nendmodule\n"), ParseError);
  CHECK_THROWS_AS(parse_program("module m\n x : [0..1] init 0;\n [] z=0 -> (x'=1);\nendmodule\n"), ParseError);
  CHECK_THROWS_AS(parse_program("module m\n x : [0..1] init 5;\nendmodule\n"), ParseError);
  CHECK_THROWS_AS(parse_program("module m\n x : [0..1] init 0;\n [] x=0 -> (x'=1)\nendmodule\n"), ParseError);
  CHECK_THROWS_AS(parse_program("module m\n x : [0..1] init 0;\nendmodule\nmodule n\n y : [0..1] init 0;\n [] y=0 -> (x'=1);\nendmodule\n"),
                  ParseError);
  try {
    parse_program("module m\n x : [0..1] init 0;\n [] x=0 -> (x'=1) & ;\nendmodule\n");
    FAIL("expected parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
}

TEST_CASE("exploration errors") {
  CHECK_THROWS_AS(build("module m\n x : [0..1] init 0;\n [] true -> (x'=x+1);\nendmodule\n"), DomainError);
  CHECK_THROWS_AS(build("const int N = 50;\nmodule m\n x : [0..N] init 0;\n [] x<N -> (x'=x+1);\n [] x=N -> true;\nendmodule\n", {}, 10),
                  ResourceError);
}

TEST_CASE("expression evaluation") {
  auto p = parse_program("module m\n x : [0..9] init 3;\n y : [0..9] init 4;\n [] min(x,y)+max(x,y)*2 = 11 & !(x>y) -> true;\nendmodule\n");
  const auto& guard = p.modules[0].commands[0].guard;
  std::vector<int> val{3, 4};
  CHECK(evaluate(guard, val).number == 1.0);
  val = {5, 4};
  CHECK(evaluate(guard, val).number == 0.0);
}
