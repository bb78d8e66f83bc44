#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "lecho/classical/backend.hpp"
#include "lecho/core/error.hpp"
#include "lecho/core/parallel.hpp"
#include "lecho/core/stats.hpp"

namespace lecho::classical {

/// Log stretching factors of a tangent vector, one per renormalization block.
struct TangentRecord {
  std::vector<double> log_factors;
  std::size_t renorm_interval = 5;
  PhaseState final_state;
  Tangent final_tangent;  ///< unit norm after the last renormalization
};

inline constexpr double tangent_overflow_norm = 1e150;

inline TangentRecord evolve_tangent(const Backend& backend, PhaseState state, Tangent tangent, std::size_t n_steps,
                                    std::size_t renorm_interval) {
  if (renorm_interval == 0) throw Error(Errc::invalid_argument, "evolve_tangent: renorm_interval must be >= 1");
  const double n0 = tangent.norm();
  if (!(n0 > 0.0)) throw Error(Errc::invalid_argument, "evolve_tangent: tangent vector must be nonzero");
  tangent.scale(1.0 / n0);
  TangentRecord rec;
  rec.renorm_interval = renorm_interval;
  rec.log_factors.reserve(n_steps / renorm_interval + 1);
  std::size_t in_block = 0;
  for (std::size_t n = 0; n < n_steps; ++n) {
    step(backend, state, tangent);
    if (++in_block == renorm_interval || n + 1 == n_steps) {
      const double g = tangent.norm();
      if (!std::isfinite(g) || g > tangent_overflow_norm) {
        throw Error(Errc::tangent_overflow, "evolve_tangent: stretching overflowed; shrink renorm_interval");
      }
      rec.log_factors.push_back(std::log(g));
      tangent.scale(1.0 / g);
      in_block = 0;
    }
  }
  rec.final_state = state;
  rec.final_tangent = tangent;
  return rec;
}

struct LyapunovEstimate {
  double lambda = 0.0;
  double stderr_lambda = 0.0;
  std::size_t n_steps = 0;
  std::size_t renorm_interval = 5;
  std::size_t n_orbits = 0;
  std::size_t transient = 0;
  bool non_chaotic = false;  ///< estimate consistent with zero
  std::vector<double> per_orbit;
};

/// Benettin estimate: each orbit starts at a random point (orbit substream of
/// `seed`) with a unit position displacement, discards `transient` steps, and
/// reports its mean log stretching per unit time over the remaining steps. The
/// result is the across-orbit mean with its standard error.
inline LyapunovEstimate lyapunov_benettin(const Backend& backend, std::size_t n_orbits, std::size_t n_steps,
                                          std::size_t renorm_interval, std::uint64_t seed,
                                          std::size_t transient = static_cast<std::size_t>(-1),
                                          std::size_t jobs = 1) {
  if (n_orbits < 8) throw Error(Errc::insufficient_ensemble, "lyapunov_benettin: need at least 8 orbits");
  if (renorm_interval == 0) throw Error(Errc::invalid_argument, "lyapunov_benettin: renorm_interval must be >= 1");
  if (transient == static_cast<std::size_t>(-1)) transient = std::min<std::size_t>(n_steps / 10, 1000);
  transient = transient / renorm_interval * renorm_interval;
  if (n_steps <= transient) throw Error(Errc::invalid_argument, "lyapunov_benettin: n_steps must exceed the transient");
  const double dt = step_of(backend);

  LyapunovEstimate est;
  est.n_steps = n_steps;
  est.renorm_interval = renorm_interval;
  est.n_orbits = n_orbits;
  est.transient = transient;
  est.per_orbit = parallel_map(n_orbits, jobs, [&](std::size_t i) {
    const PhaseState s0 = random_state(backend, seed, i);
    Tangent t;
    t.dq = {1.0, 0.0};
    const TangentRecord rec = evolve_tangent(backend, s0, t, n_steps, renorm_interval);
    KahanSum acc;
    for (std::size_t b = transient / renorm_interval; b < rec.log_factors.size(); ++b) acc += rec.log_factors[b];
    return acc.value() / (static_cast<double>(n_steps - transient) * dt);
  });
  const MeanErr m = mean_stderr(est.per_orbit);
  est.lambda = m.mean;
  est.stderr_lambda = m.err;
  est.non_chaotic = est.lambda <= 3.0 * est.stderr_lambda || std::abs(est.lambda) < 1e-12;
  return est;
}

}  // namespace lecho::classical
