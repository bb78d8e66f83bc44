#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <vector>

#include "lecho/classical/backend.hpp"
#include "lecho/core/error.hpp"
#include "lecho/core/stats.hpp"

namespace lecho::classical {

struct Trajectory {
  Backend backend;
  std::vector<double> times;
  std::vector<Point> q;
  std::vector<Point> p;
  /// lorentz2d only. Verlet conserves a shadow Hamiltonian, so E(t) shows a
  /// bounded O(dt^2) oscillation (max_relative_energy_error) on top of a
  /// secular drift: the change between the mean energies of the first and
  /// last tenth of the run, relative to E(0).
  double max_relative_energy_error = 0.0;
  double relative_energy_drift = 0.0;

  std::size_t size() const { return times.size(); }
  int dimension() const { return dimension_of(backend); }
  double duration() const { return times.empty() ? 0.0 : times.back() - times.front(); }
};

inline Trajectory evolve(const Backend& backend, PhaseState state, std::size_t n_steps) {
  if (const auto* L = std::get_if<Lorentz2d>(&backend)) L->validate();
  Trajectory tr;
  tr.backend = backend;
  tr.times.reserve(n_steps + 1);
  tr.q.reserve(n_steps + 1);
  tr.p.reserve(n_steps + 1);
  const double dt = step_of(backend);
  const auto* L = std::get_if<Lorentz2d>(&backend);
  const double e0 = L ? energy(*L, state) : 0.0;
  tr.times.push_back(0.0);
  tr.q.push_back(state.q);
  tr.p.push_back(state.p);
  for (std::size_t n = 1; n <= n_steps; ++n) {
    step(backend, state);
    tr.times.push_back(static_cast<double>(n) * dt);
    tr.q.push_back(state.q);
    tr.p.push_back(state.p);
    if (L) {
      const double err = std::abs(energy(*L, state) - e0) / std::abs(e0);
      tr.max_relative_energy_error = std::max(tr.max_relative_energy_error, err);
    }
  }
  if (L && tr.size() >= 10) {
    const std::size_t w = tr.size() / 10;
    KahanSum head, tail;
    for (std::size_t i = 0; i < w; ++i) {
      head += energy(*L, {tr.q[i], tr.p[i]});
      tail += energy(*L, {tr.q[tr.size() - 1 - i], tr.p[tr.size() - 1 - i]});
    }
    tr.relative_energy_drift = std::abs(tail.value() - head.value()) / static_cast<double>(w) / std::abs(e0);
  }
  return tr;
}

/// Time average of |p|/m along the stored samples.
inline double mean_speed(const Trajectory& tr) {
  if (tr.size() == 0) throw Error(Errc::invalid_argument, "mean_speed: empty trajectory");
  const double m = mass_of(tr.backend);
  KahanSum s;
  for (const Point& p : tr.p) s += norm(p) / m;
  return s.value() / static_cast<double>(tr.size());
}

inline void write_trajectory_csv(std::ostream& os, const Trajectory& tr) {
  os.precision(17);
  if (tr.dimension() == 1) {
    os << "t,q,p\n";
    for (std::size_t i = 0; i < tr.size(); ++i) os << tr.times[i] << ',' << tr.q[i][0] << ',' << tr.p[i][0] << '\n';
    return;
  }
  os << "t,q_x,q_y,p_x,p_y\n";
  for (std::size_t i = 0; i < tr.size(); ++i) {
    os << tr.times[i] << ',' << tr.q[i][0] << ',' << tr.q[i][1] << ',' << tr.p[i][0] << ',' << tr.p[i][1] << '\n';
  }
}

}  // namespace lecho::classical
