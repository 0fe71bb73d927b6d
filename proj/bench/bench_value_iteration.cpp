#include <benchmark/benchmark.h>

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "cxdiag/checker.hpp"
#include "cxdiag/value_iteration.hpp"

using namespace cxdiag;

namespace {

// Random MDP with a goal set of about one percent of the states.
Mdp synthetic(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<StateId> pick(0, static_cast<StateId>(n - 1));
  std::uniform_real_distribution<double> weight(0.1, 1.0);
  MdpBuilder b(n, 0);
  for (StateId s = 0; s < n; ++s) {
    for (const char* action : {"left", "right"}) {
      StateId targets[3] = {pick(rng), pick(rng), pick(rng)};
      std::sort(std::begin(targets), std::end(targets));
      double w[3] = {weight(rng), weight(rng), weight(rng)};
      for (int i = 1; i < 3; ++i)
        if (targets[i] == targets[i - 1]) w[i - 1] += w[i], w[i] = 0.0;
      const double total = w[0] + w[1] + w[2];
      for (int i = 0; i < 3; ++i)
        if (w[i] > 0.0) b.add_transition(s, action, targets[i], w[i] / total);
    }
    if (s % 97 == 1) b.add_label(s, "goal");
  }
  return std::move(b).build();
}

struct Fixture {
  SparseMdp sp;
  std::vector<char> active;
  std::vector<double> in, out;

  explicit Fixture(std::size_t n) {
    auto m = synthetic(n, 7);
    sp = SparseMdp::from(m);
    active.assign(n, 1);
    in.assign(n, 0.0);
    for (StateId s = 1; s < n; s += 97) {
      active[s] = 0;
      in[s] = 1.0;
    }
    out.assign(n, 0.0);
  }
};

template <double (*Sweep)(const SparseMdp&, std::span<const char>, std::span<const double>, std::span<double>)>
void BM_Sweep(benchmark::State& state) {
  Fixture f(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(Sweep(f.sp, f.active, f.in, f.out));
    f.in.swap(f.out);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.sp.target.size()));
}

void BM_Pmax(benchmark::State& state, Kernel kernel) {
  auto m = synthetic(static_cast<std::size_t>(state.range(0)), 11);
  PathFormula f{PathKind::Until, StateFormula::truth(), StateFormula::atom("goal"), std::nullopt};
  CheckOptions options;
  options.kernel = kernel;
  for (auto _ : state) benchmark::DoNotOptimize(compute_pmax(m, f, options).values.data());
}

}  // namespace

BENCHMARK(BM_Sweep<bellman_sweep_serial>)->Name("sweep/serial")->RangeMultiplier(8)->Range(1 << 12, 1 << 18);
BENCHMARK(BM_Sweep<bellman_sweep_parallel>)->Name("sweep/parallel")->RangeMultiplier(8)->Range(1 << 12, 1 << 18);
BENCHMARK_CAPTURE(BM_Pmax, serial, Kernel::Serial)->Arg(1 << 17)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Pmax, parallel, Kernel::Parallel)->Arg(1 << 17)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
