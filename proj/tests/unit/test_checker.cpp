#include <doctest.h>

#include <cmath>

#include "cxdiag/checker.hpp"
#include "cxdiag/value_iteration.hpp"
#include "oracles.hpp"

using namespace cxdiag;
using namespace cxdiag::testing;

namespace {

const std::vector<std::string> kAps{"a", "b", "c"};

PathFormula random_until(Rng& rng) {
  return {PathKind::Until, random_state_formula(rng, kAps, 1), random_state_formula(rng, kAps, 1), std::nullopt};
}

// Expected reachability by summing path mass to a fixed horizon.
double horizon_sum(const Mdp& m, const Scheduler& d, const PathFormula& f, int horizon) {
  std::vector<double> mass(m.num_states(), 0.0);
  mass[m.initial_state()] = 1.0;
  double reached = 0.0;
  for (int step = 0; step <= horizon; ++step) {
    std::vector<double> next(m.num_states(), 0.0);
    for (StateId s = 0; s < m.num_states(); ++s) {
      if (mass[s] == 0.0) continue;
      if (eval_state_formula(m.labeling(), s, f.right)) {
        reached += mass[s];
        continue;
      }
      if (!eval_state_formula(m.labeling(), s, f.left)) continue;
      for (const auto& e : m.find_choice(s, d[s])->successors) next[e.target] += mass[s] * e.probability;
    }
    mass = std::move(next);
  }
  return reached;
}

}  // namespace

TEST_CASE("branching fixture violates its bound under the alpha scheduler") {
  auto m = load_fixture("branching");
  auto spec = parse_property("P<=0.5 [ (a|b) U (c&d) ]");
  auto v = compute_pmax(m, spec.path);
  CHECK(v.at(0) > 0.5);
  CHECK(v.at(0) == doctest::Approx(0.882).epsilon(1e-6));
  CHECK(v.classes[6] == StateClass::Zero);
  CHECK(v.classes[3] == StateClass::Target);
  auto d = extract_max_scheduler(m, v);
  CHECK(m.actions().name(d[2]) == "alpha2");
  for (StateId s : {0u, 1u, 4u}) CHECK(m.actions().name(d[s]).rfind("alpha", 0) == 0);
  auto verdict = check_property(m, spec);
  CHECK(!verdict.holds);
  CHECK(verdict.witness.has_value());
}

TEST_CASE("target at the initial state") {
  auto m = load_fixture("branching");
  CHECK(compute_pmax(m, parse_property("P<=0.5 [ true U a ]").path).at(0) == 1.0);
  CHECK(check_property(m, parse_property("P<=1.0 [ true U a ]")).holds);
  CHECK(check_property(m, parse_property("P<=1.0 [ (a|b) U (c&d) ]")).holds);
}

TEST_CASE("four-state model with two schedulers") {
  // s0: x -> s1 0.5 / s3 0.5, y -> s2 1; s1 -> s2 0.6 / s3 0.4; s2 goal; s3 sink
  MdpBuilder b(4, 0);
  b.add_transition(0, "x", 1, 0.5);
  b.add_transition(0, "x", 3, 0.5);
  b.add_transition(0, "y", 1, 0.9);
  b.add_transition(0, "y", 0, 0.1);
  b.add_transition(1, "z", 2, 0.6);
  b.add_transition(1, "z", 3, 0.4);
  b.add_transition(2, "z", 2, 1.0);
  b.add_transition(3, "z", 3, 1.0);
  b.add_label(2, "goal");
  auto m = std::move(b).build();
  PathFormula f{PathKind::Until, StateFormula::truth(), StateFormula::atom("goal"), std::nullopt};
  double best = 0.0;
  for (const char* first : {"x", "y"}) {
    Scheduler d(4);
    d.set(0, *m.actions().find(first));
    for (StateId s = 1; s < 4; ++s) d.set(s, *m.actions().find("z"));
    best = std::max(best, horizon_sum(m, d, f, 50));
  }
  CHECK(compute_pmax(m, f).at(0) == doctest::Approx(best).epsilon(1e-6));
  CHECK(m.actions().name(extract_max_scheduler(m, compute_pmax(m, f))[0]) == "y");
}

TEST_CASE("single-action models have the unique scheduler") {
  Rng rng(31);
  MdpShape shape;
  shape.max_actions = 1;
  for (int i = 0; i < 10; ++i) {
    auto m = random_mdp(rng, shape);
    auto d = extract_max_scheduler(m, compute_pmax(m, random_until(rng)));
    for (StateId s = 0; s < m.num_states(); ++s) CHECK(d[s] == enabled_actions(m, s).front());
  }
}

TEST_CASE("ties go to the lowest action id") {
  MdpBuilder b(2, 0);
  b.add_transition(0, "first", 1, 1.0);
  b.add_transition(0, "second", 1, 1.0);
  b.add_transition(1, "stay", 1, 1.0);
  b.add_label(1, "goal");
  auto m = std::move(b).build();
  PathFormula f{PathKind::Until, StateFormula::truth(), StateFormula::atom("goal"), std::nullopt};
  for (int run = 0; run < 5; ++run) CHECK(m.actions().name(extract_max_scheduler(m, compute_pmax(m, f))[0]) == "first");
}

TEST_CASE("optimal self-loops do not trap the scheduler") {
  // "wait" keeps s0 at the same optimal value as "go"; only "go" reaches the goal.
  MdpBuilder b(2, 0);
  b.add_transition(0, "wait", 0, 1.0);
  b.add_transition(0, "go", 1, 1.0);
  b.add_transition(1, "stay", 1, 1.0);
  b.add_label(1, "goal");
  auto m = std::move(b).build();
  PathFormula f{PathKind::Until, StateFormula::truth(), StateFormula::atom("goal"), std::nullopt};
  auto d = extract_max_scheduler(m, compute_pmax(m, f));
  CHECK(m.actions().name(d[0]) == "go");
}

TEST_CASE("agrees with exhaustive scheduler enumeration") {
  Rng rng(41);
  MdpShape shape;
  shape.max_states = 6;
  shape.max_actions = 2;
  for (int i = 0; i < 200; ++i) {
    auto m = random_mdp(rng, shape);
    auto f = random_until(rng);
    auto expected = exhaustive_pmax(m, f);
    CheckOptions tight;
    tight.epsilon = 1e-9;
    auto v = compute_pmax(m, f, tight);
    for (StateId s = 0; s < m.num_states(); ++s) CHECK(std::abs(v.at(s) - expected[s]) <= 1e-6);
    CHECK(v.residual <= 1e-9);
    auto d = extract_max_scheduler(m, v);
    CHECK(exact_until_values(m, d, f)[m.initial_state()] >= v.at(m.initial_state()) - 1e-6);
    CHECK(scheduler_values(m, d, f)[m.initial_state()] == doctest::Approx(exact_until_values(m, d, f)[m.initial_state()]).epsilon(1e-9));
  }
}

TEST_CASE("bounded until matches direct recursion") {
  Rng rng(43);
  for (int i = 0; i < 100; ++i) {
    auto m = random_mdp(rng);
    auto f = random_until(rng);
    f.bound = static_cast<std::uint32_t>(i % 6);
    auto expected = recursive_bounded_pmax(m, f);
    auto v = compute_pmax(m, f);
    CHECK(v.iterations == *f.bound);
    for (StateId s = 0; s < m.num_states(); ++s) CHECK(v.at(s) == doctest::Approx(expected[s]).epsilon(1e-12));
    if (*f.bound == 0)
      for (StateId s = 0; s < m.num_states(); ++s) CHECK(v.at(s) == (eval_state_formula(m.labeling(), s, f.right) ? 1.0 : 0.0));
  }
}

TEST_CASE("value iteration iterates never decrease") {
  Rng rng(47);
  for (int i = 0; i < 50; ++i) {
    auto m = random_mdp(rng);
    auto f = random_until(rng);
    auto sp = SparseMdp::from(m);
    std::vector<char> active(m.num_states());
    std::vector<double> x(m.num_states()), y(m.num_states());
    for (StateId s = 0; s < m.num_states(); ++s) {
      const bool goal = eval_state_formula(m.labeling(), s, f.right);
      active[s] = !goal && eval_state_formula(m.labeling(), s, f.left);
      x[s] = goal ? 1.0 : 0.0;
    }
    for (int it = 0; it < 30; ++it) {
      bellman_sweep_serial(sp, active, x, y);
      for (StateId s = 0; s < m.num_states(); ++s) CHECK(y[s] >= x[s]);
      std::swap(x, y);
    }
  }
}

TEST_CASE("serial and parallel kernels agree bit for bit") {
  Rng rng(53);
  MdpShape shape;
  shape.max_states = 60;
  shape.max_actions = 3;
  shape.max_successors = 5;
  for (int i = 0; i < 20; ++i) {
    auto m = random_mdp(rng, shape);
    auto f = random_until(rng);
    CheckOptions serial, parallel;
    serial.kernel = Kernel::Serial;
    parallel.kernel = Kernel::Parallel;
    auto a = compute_pmax(m, f, serial), b = compute_pmax(m, f, parallel);
    CHECK(a.values == b.values);
    CHECK(a.iterations == b.iterations);
  }
}

TEST_CASE("scaled CSMA verdict is backed by a concrete scheduler") {
  auto m = load_fixture_program("csma.pm");
  auto spec = parse_property(R"(P<=0.7 [ !"collision_max_backoff" U "all_delivered" ])", &m.labeling().aps());
  auto verdict = check_property(m, spec);
  CHECK(!verdict.holds);
  CHECK(exact_until_values(m, *verdict.witness, spec.path)[m.initial_state()] > 0.7);
}

TEST_CASE("argument errors") {
  auto m = load_fixture("branching");
  auto weak = parse_property("P<=0.5 [ a W b ]");
  CHECK_THROWS_AS(compute_pmax(m, weak.path), DomainError);
  CheckOptions bad;
  bad.epsilon = 0.0;
  CHECK_THROWS_AS(compute_pmax(m, parse_property("P<=0.5 [ a U b ]").path, bad), DomainError);
  auto lower = parse_property("P<=0.5 [ a U b ]");
  lower.comparison = Comparison::GreaterEqual;
  CHECK_THROWS_AS(check_property(m, lower), DomainError);
  CHECK(exceeds(0.6, Comparison::LessEqual, 0.5));
  CHECK(!exceeds(0.5, Comparison::LessEqual, 0.5));
  CHECK(exceeds(0.5, Comparison::Less, 0.5));
}

TEST_CASE("bounded scheduler prefers the action that reaches the target in time") {
  MdpBuilder b(4, 0);
  b.add_transition(0, "wait", 0, 0.875);
  b.add_transition(0, "wait", 3, 0.125);
  b.add_transition(0, "hop", 1, 1.0);
  b.add_transition(1, "hop", 3, 1.0);
  b.add_transition(2, "stay", 2, 1.0);
  b.add_transition(3, "stay", 3, 1.0);
  b.add_label(3, "goal");
  auto m = std::move(b).build();
  PathFormula f{PathKind::Until, StateFormula::truth(), StateFormula::atom("goal"), 5u};
  auto v = compute_pmax(m, f);
  CHECK(v.at(0) == doctest::Approx(1.0));
  auto d = extract_max_scheduler(m, v);
  CHECK(m.actions().name(d[0]) == "hop");
  CHECK(scheduler_values(m, d, f)[0] == doctest::Approx(1.0));
}
