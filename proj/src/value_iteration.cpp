#include "cxdiag/value_iteration.hpp"

#include <algorithm>
#include <cmath>

#ifdef CXDIAG_HAVE_OPENMP
#include <omp.h>
#endif

namespace cxdiag {

SparseMdp SparseMdp::from(const Mdp& m) {
  SparseMdp out;
  const auto n = m.num_states();
  out.state_begin.reserve(n + 1);
  out.choice_begin.push_back(0);
  for (StateId s = 0; s < n; ++s) {
    out.state_begin.push_back(static_cast<std::uint32_t>(out.choice_action.size()));
    for (const auto& c : m.choices(s)) {
      double sum = 0.0;
      for (const auto& succ : c.successors) sum += succ.probability;
      if (std::abs(sum - 1.0) > kDistributionTolerance) continue;
      for (const auto& succ : c.successors) {
        out.target.push_back(succ.target);
        out.probability.push_back(succ.probability);
      }
      out.choice_action.push_back(c.action);
      out.choice_begin.push_back(static_cast<std::uint32_t>(out.target.size()));
    }
  }
  out.state_begin.push_back(static_cast<std::uint32_t>(out.choice_action.size()));
  return out;
}

namespace {

inline double update_state(const SparseMdp& m, std::size_t s, std::span<const char> active, std::span<const double> in,
                           std::span<double> out) {
  if (!active[s]) {
    out[s] = in[s];
    return 0.0;
  }
  double best = 0.0;
  for (auto c = m.state_begin[s]; c < m.state_begin[s + 1]; ++c) best = std::max(best, m.backup(c, in));
  out[s] = best;
  return std::abs(best - in[s]);
}

}  // namespace

double bellman_sweep_serial(const SparseMdp& m, std::span<const char> active, std::span<const double> in,
                            std::span<double> out) {
  double residual = 0.0;
  const auto n = static_cast<std::ptrdiff_t>(m.num_states());
  for (std::ptrdiff_t s = 0; s < n; ++s) residual = std::max(residual, update_state(m, s, active, in, out));
  return residual;
}

double bellman_sweep_parallel(const SparseMdp& m, std::span<const char> active, std::span<const double> in,
                              std::span<double> out) {
  double residual = 0.0;
  const auto n = static_cast<std::ptrdiff_t>(m.num_states());
#ifdef CXDIAG_HAVE_OPENMP
#pragma omp parallel for schedule(static) reduction(max : residual)
#endif
  for (std::ptrdiff_t s = 0; s < n; ++s) residual = std::max(residual, update_state(m, s, active, in, out));
  return residual;
}

bool parallel_kernel_available() noexcept {
#ifdef CXDIAG_HAVE_OPENMP
  return true;
#else
  return false;
#endif
}

}  // namespace cxdiag
