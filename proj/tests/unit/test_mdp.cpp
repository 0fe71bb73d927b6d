#include <doctest.h>

#include <set>

#include "cxdiag/explicit_io.hpp"
#include "cxdiag/mdp.hpp"
#include "oracles.hpp"

using namespace cxdiag;
using namespace cxdiag::testing;

namespace {

Mdp branching() { return load_fixture("branching"); }

ActionId act(const Mdp& m, const char* name) { return *m.actions().find(name); }

FinitePath path(const Mdp& m, std::vector<StateId> states, std::vector<const char*> actions) {
  FinitePath p{std::move(states), {}};
  for (auto* a : actions) p.actions.push_back(act(m, a));
  return p;
}

}  // namespace

TEST_CASE("branching fixture is a valid MDP") { CHECK(validate_mdp(branching()).empty()); }

TEST_CASE("validation reports a short distribution") {
  MdpBuilder b(2, 0);
  b.add_transition(0, "go", 1, 0.5);
  b.add_transition(0, "go", 0, 0.4);
  b.add_transition(1, "stay", 1, 1.0);
  auto v = validate_mdp(std::move(b).build());
  REQUIRE(v.size() == 1);
  CHECK(v[0].kind == ViolationKind::DistributionSum);
  CHECK(v[0].state == 0);
}

TEST_CASE("validation reports a state with no enabled action") {
  MdpBuilder b(2, 0);
  b.add_transition(0, "go", 1, 1.0);
  auto v = validate_mdp(std::move(b).build());
  REQUIRE(v.size() == 1);
  CHECK(v[0].kind == ViolationKind::NoEnabledAction);
  CHECK(v[0].state == 1);
}

TEST_CASE("validation catches duplicates, bad targets and non-positive mass") {
  MdpBuilder b(2, 0);
  b.add_transition(0, "go", 1, 0.5);
  b.add_transition(0, "go", 1, 0.5);
  b.add_transition(1, "x", 5, 1.0);
  b.add_transition(1, "y", 1, 0.0);
  b.add_transition(1, "y", 0, 1.0);
  auto v = validate_mdp(std::move(b).build());
  std::set<ViolationKind> kinds;
  for (auto& e : v) kinds.insert(e.kind);
  CHECK(kinds.count(ViolationKind::DuplicateTransition));
  CHECK(kinds.count(ViolationKind::TargetOutOfRange));
  CHECK(kinds.count(ViolationKind::NonPositiveProbability));
}

TEST_CASE("enabled actions") {
  auto m = branching();
  CHECK(enabled_actions(m, 0) == std::vector<ActionId>{act(m, "alpha0")});
  auto at2 = enabled_actions(m, 2);
  CHECK(at2.size() == 2);
  CHECK(enabled_actions(m, 6) == std::vector<ActionId>{act(m, "loop")});
  CHECK_THROWS_AS(enabled_actions(m, 99), DomainError);
}

TEST_CASE("successors") {
  auto m = branching();
  CHECK(successors(m, 0, act(m, "alpha0")) == std::vector<StateId>{1, 2, 4, 6});
  CHECK(successors(m, 2, act(m, "alpha2")) == std::vector<StateId>{3, 4});
  CHECK(successors(m, 1, act(m, "alpha1")) == std::vector<StateId>{7});
  CHECK_THROWS_AS(successors(m, 1, act(m, "alpha0")), DomainError);
}

TEST_CASE("path probability") {
  auto m = branching();
  CHECK(path_probability(m, path(m, {0, 2, 3}, {"alpha0", "alpha2"})) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(path_probability(m, path(m, {0, 2, 4, 5}, {"alpha0", "alpha2", "alpha4"})) == doctest::Approx(0.15).epsilon(1e-12));
  CHECK(path_probability(m, path(m, {3}, {})) == 1.0);
  try {
    path_probability(m, path(m, {0, 2, 5}, {"alpha0", "alpha2"}));
    FAIL("expected a disconnected step");
  } catch (const DomainError& e) {
    CHECK(std::string(e.what()).find("step 1") != std::string::npos);
  }
}

TEST_CASE("path probability is multiplicative under concatenation") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    auto m = random_mdp(rng);
    FinitePath p{{m.initial_state()}, {}};
    for (int i = 0; i < 6; ++i) {
      auto acts = enabled_actions(m, p.last());
      auto a = acts[rng() % acts.size()];
      auto next = successors(m, p.last(), a);
      p.actions.push_back(a);
      p.states.push_back(next[rng() % next.size()]);
    }
    FinitePath head{{p.states.begin(), p.states.begin() + 4}, {p.actions.begin(), p.actions.begin() + 3}};
    FinitePath tail{{p.states.begin() + 3, p.states.end()}, {p.actions.begin() + 3, p.actions.end()}};
    CHECK(path_probability(m, p) == doctest::Approx(path_probability(m, head) * path_probability(m, tail)).epsilon(1e-12));
  }
}

TEST_CASE("induced chain keeps path probabilities") {
  auto m = branching();
  Scheduler d(m.num_states());
  for (StateId s = 0; s < m.num_states(); ++s) d.set(s, enabled_actions(m, s).front());
  auto chain = induce_dtmc(m, d);
  CHECK(chain.initial_state() == 0);
  CHECK(chain.reachable(7));
  for (StateId s : chain.reachable_states()) {
    double sum = 0;
    for (auto& e : chain.edges(s)) {
      sum += e.probability;
      CHECK(e.action == d[s]);
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
  // s0 a0 s4 a4 s5 is consistent with d
  CHECK(path_probability(m, path(m, {0, 4, 5}, {"alpha0", "alpha4"})) == doctest::Approx(0.12));
}

TEST_CASE("induced chain of a single-action MDP mirrors the MDP") {
  Rng rng(3);
  MdpShape shape;
  shape.max_actions = 1;
  auto m = random_mdp(rng, shape);
  Scheduler d(m.num_states());
  for (StateId s = 0; s < m.num_states(); ++s) d.set(s, enabled_actions(m, s).front());
  auto chain = induce_dtmc(m, d);
  for (StateId s : chain.reachable_states()) {
    auto c = m.choices(s);
    REQUIRE(c.size() == 1);
    REQUIRE(chain.edges(s).size() == c[0].successors.size());
    for (std::size_t i = 0; i < c[0].successors.size(); ++i) {
      CHECK(chain.edges(s)[i].target == c[0].successors[i].target);
      CHECK(chain.edges(s)[i].probability == c[0].successors[i].probability);
    }
  }
}

TEST_CASE("induced chain rejects a scheduler missing a reachable state") {
  auto m = branching();
  Scheduler d(m.num_states());
  d.set(0, act(m, "alpha0"));
  CHECK_THROWS_AS(induce_dtmc(m, d), DomainError);
}

TEST_CASE("three-state reachability under both schedulers") {
  // s0 -x-> s1 (0.5) / s2 (0.5); s0 -y-> s1 (0.8) / s0 (0.2); s1 goal
  MdpBuilder b(3, 0);
  b.add_transition(0, "x", 1, 0.5);
  b.add_transition(0, "x", 2, 0.5);
  b.add_transition(0, "y", 1, 0.8);
  b.add_transition(0, "y", 0, 0.2);
  b.add_transition(1, "loop", 1, 1.0);
  b.add_transition(2, "loop", 2, 1.0);
  b.add_label(1, "goal");
  b.intern_ap("safe");
  auto m = std::move(b).build();
  PathFormula f{PathKind::Until, StateFormula::truth(), StateFormula::atom("goal"), std::nullopt};
  Scheduler dx(3), dy(3);
  dx.set(0, act(m, "x"));
  dy.set(0, act(m, "y"));
  for (StateId s : {1u, 2u}) dx.set(s, act(m, "loop")), dy.set(s, act(m, "loop"));
  CHECK(exact_until_values(m, dx, f)[0] == doctest::Approx(0.5));
  CHECK(exact_until_values(m, dy, f)[0] == doctest::Approx(1.0));
  auto chain = induce_dtmc(m, dy);
  CHECK(chain.edges(0).size() == 2);
}

TEST_CASE("explicit format round trip") {
  auto m = branching();
  auto again = read_explicit_model(write_transitions(m), write_labels(m));
  CHECK(equivalent(m, again));
  Rng rng(11);
  for (int i = 0; i < 20; ++i) {
    auto r = random_mdp(rng);
    CHECK(equivalent(r, read_explicit_model(write_transitions(r), write_labels(r))));
  }
}

TEST_CASE("explicit format errors carry the line") {
  try {
    read_explicit_model("STATES 2\nINIT 0\n0 a 1 1\n1 a 7 1\n");
    FAIL("expected parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 4);
  }
  CHECK_THROWS_AS(read_explicit_model("STATES 2\nINIT 3\n"), ParseError);
  CHECK_THROWS_AS(read_explicit_model("STATES 2\nINIT 0\n0 a 1 x\n"), ParseError);
  CHECK_THROWS_AS(read_explicit_model("INIT 0\n"), ParseError);
  CHECK_THROWS_AS(read_explicit_model("STATES 1\nINIT 0\n0 a 0 1\n", "zero a\n"), ParseError);
}

TEST_CASE("explicit format tolerates comments and blank lines") {
  auto m = read_explicit_model("# header\nSTATES 1\n\nINIT 0   # start\n  0   a  0  1.0\n", "0: p q\n");
  CHECK(m.num_states() == 1);
  CHECK(m.labeling().holds(0, *m.labeling().aps().find("q")));
}
