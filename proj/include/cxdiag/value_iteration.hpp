#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cxdiag/mdp.hpp"

namespace cxdiag {

/// Compressed row storage of the enabled choices of an MDP.
struct SparseMdp {
  std::vector<std::uint32_t> state_begin;   // size n+1, into choice arrays
  std::vector<std::uint32_t> choice_begin;  // size choices+1, into successor arrays
  std::vector<ActionId> choice_action;
  std::vector<StateId> target;
  std::vector<double> probability;

  static SparseMdp from(const Mdp& m);
  std::size_t num_states() const noexcept { return state_begin.empty() ? 0 : state_begin.size() - 1; }

  double backup(std::uint32_t choice, std::span<const double> x) const {
    double sum = 0.0;
    for (auto k = choice_begin[choice]; k < choice_begin[choice + 1]; ++k) sum += probability[k] * x[target[k]];
    return sum;
  }
};

/// One Jacobi Bellman-max sweep. States with `active[s] == 0` are copied unchanged.
/// Returns the sup-norm difference between `in` and `out`.
double bellman_sweep_serial(const SparseMdp& m, std::span<const char> active, std::span<const double> in,
                            std::span<double> out);

/// Same sweep split across OpenMP threads; bitwise identical to the serial kernel.
double bellman_sweep_parallel(const SparseMdp& m, std::span<const char> active, std::span<const double> in,
                              std::span<double> out);

bool parallel_kernel_available() noexcept;

}  // namespace cxdiag
