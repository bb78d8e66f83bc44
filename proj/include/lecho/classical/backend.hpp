#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <variant>
#include <vector>

#include "lecho/core/error.hpp"
#include "lecho/core/point.hpp"
#include "lecho/core/rng.hpp"

namespace lecho::classical {

/// Kicked rotor p' = p + K sin q, q' = q + p' on the 2pi x 2pi torus.
/// Momentum is kept in [-pi, pi) to match the quantized map with hbar = 2pi/N.
struct StandardMap {
  double K = 10.0;
};

/// Point particle in a periodic box decorated with Gaussian bumps
/// U(q) = sum_i u0 exp(-|q - c_i|^2 / width^2).
struct Lorentz2d {
  std::vector<Point> centers;
  double u0 = 0.05;
  double width = 0.5;
  double box = 8.0;
  double mass = 1.0;
  double energy = 0.5;  ///< total energy of launched orbits
  double dt = 0.025;

  static constexpr double cutoff_widths = 6.0;

  double speed() const { return std::sqrt(2.0 * energy / mass); }

  void validate() const {
    if (!(width > 0.0) || !(box > 0.0) || !(mass > 0.0) || !(dt > 0.0) || !(energy > 0.0) || !(u0 >= 0.0)) {
      throw Error(Errc::invalid_argument, "lorentz2d: width, box, mass, dt, energy must be > 0 and u0 >= 0");
    }
    if (box < 2.0 * cutoff_widths * width) {
      throw Error(Errc::invalid_argument, "lorentz2d: box must be at least 12 bump widths");
    }
  }

  /// Bin the centers into square cells no smaller than the cutoff so that
  /// potential/force/hessian visit only the 3x3 neighbouring cells. Must be
  /// called again after editing `centers`; unindexed backends scan every bump.
  void index_cells() {
    const double reach = cutoff_widths * width;
    cells_per_side_ = static_cast<int>(std::floor(box / reach));
    cells_.clear();
    if (cells_per_side_ < 4) {
      cells_per_side_ = 0;
      return;
    }
    cells_.assign(static_cast<std::size_t>(cells_per_side_ * cells_per_side_), {});
    for (std::size_t i = 0; i < centers.size(); ++i) {
      cells_[cell_of(centers[i])].push_back(i);
    }
    indexed_count_ = centers.size();
  }

  double potential(Point q) const {
    double u = 0.0;
    for_each_near(q, [&](Point d) {
      const double r2 = dot(d, d) / (width * width);
      if (r2 < cutoff_widths * cutoff_widths) u += u0 * std::exp(-r2);
    });
    return u;
  }

  Point force(Point q) const {
    Point f{0.0, 0.0};
    const double w2 = width * width;
    for_each_near(q, [&](Point d) {
      const double r2 = dot(d, d) / w2;
      if (r2 >= cutoff_widths * cutoff_widths) return;
      const double g = 2.0 * u0 * std::exp(-r2) / w2;
      f[0] += g * d[0];
      f[1] += g * d[1];
    });
    return f;
  }

  /// Hessian of U, row-major {xx, xy, yx, yy}.
  std::array<double, 4> hessian(Point q) const {
    std::array<double, 4> h{0, 0, 0, 0};
    const double w2 = width * width;
    for_each_near(q, [&](Point d) {
      const double r2 = dot(d, d) / w2;
      if (r2 >= cutoff_widths * cutoff_widths) return;
      const double e = u0 * std::exp(-r2);
      const double a = -2.0 * e / w2;
      const double b = 4.0 * e / (w2 * w2);
      h[0] += a + b * d[0] * d[0];
      h[1] += b * d[0] * d[1];
      h[2] += b * d[0] * d[1];
      h[3] += a + b * d[1] * d[1];
    });
    return h;
  }

 private:
  std::size_t cell_of(Point q) const {
    const double c = box / cells_per_side_;
    const int ix = std::min(cells_per_side_ - 1, static_cast<int>(wrap_periodic(q[0], box) / c));
    const int iy = std::min(cells_per_side_ - 1, static_cast<int>(wrap_periodic(q[1], box) / c));
    return static_cast<std::size_t>(iy * cells_per_side_ + ix);
  }

  /// Calls fn(minimum-image displacement q - c) for every candidate bump.
  template <class Fn>
  void for_each_near(Point q, Fn&& fn) const {
    auto disp = [&](const Point& c) { return Point{wrap_centered(q[0] - c[0], box), wrap_centered(q[1] - c[1], box)}; };
    if (cells_per_side_ == 0 || indexed_count_ != centers.size()) {
      for (const Point& c : centers) fn(disp(c));
      return;
    }
    const double cs = box / cells_per_side_;
    const int ix = std::min(cells_per_side_ - 1, static_cast<int>(wrap_periodic(q[0], box) / cs));
    const int iy = std::min(cells_per_side_ - 1, static_cast<int>(wrap_periodic(q[1], box) / cs));
    for (int dy = -1; dy <= 1; ++dy) {
      const int cy = (iy + dy + cells_per_side_) % cells_per_side_;
      for (int dx = -1; dx <= 1; ++dx) {
        const int cx = (ix + dx + cells_per_side_) % cells_per_side_;
        for (std::size_t i : cells_[static_cast<std::size_t>(cy * cells_per_side_ + cx)]) fn(disp(centers[i]));
      }
    }
  }

  int cells_per_side_ = 0;
  std::size_t indexed_count_ = 0;
  std::vector<std::vector<std::size_t>> cells_;
};

/// Bump centers drawn uniformly in the box from the scatterer substream.
inline std::vector<Point> random_centers(std::size_t n, double box, std::uint64_t seed) {
  RandomStream rng(seed_for(seed, 0, StreamTag::scatterers));
  std::vector<Point> c(n);
  for (auto& p : c) p = {rng.uniform(0.0, box), rng.uniform(0.0, box)};
  return c;
}

/// Backend with the documented defaults: energy from the speed, u0 = 0.1 E,
/// dt = width / (20 v).
inline Lorentz2d make_lorentz2d(std::vector<Point> centers, double width, double box, double speed = 1.0,
                                double mass = 1.0) {
  Lorentz2d b;
  b.centers = std::move(centers);
  b.width = width;
  b.box = box;
  b.mass = mass;
  b.energy = 0.5 * mass * speed * speed;
  b.u0 = 0.1 * b.energy;
  b.dt = width / (20.0 * speed);
  b.validate();
  b.index_cells();
  return b;
}

using Backend = std::variant<StandardMap, Lorentz2d>;

inline int dimension_of(const Backend& b) { return std::holds_alternative<StandardMap>(b) ? 1 : 2; }
inline double step_of(const Backend& b) {
  return std::holds_alternative<StandardMap>(b) ? 1.0 : std::get<Lorentz2d>(b).dt;
}
inline double mass_of(const Backend& b) {
  return std::holds_alternative<StandardMap>(b) ? 1.0 : std::get<Lorentz2d>(b).mass;
}
inline double extent_of(const Backend& b) {
  return std::holds_alternative<StandardMap>(b) ? two_pi : std::get<Lorentz2d>(b).box;
}

/// Phase-space point; 1-D backends use component 0 only.
struct PhaseState {
  Point q{0.0, 0.0};
  Point p{0.0, 0.0};
};

/// Tangent vector (dq, dp).
struct Tangent {
  Point dq{0.0, 0.0};
  Point dp{0.0, 0.0};

  double norm() const { return std::sqrt(dot(dq, dq) + dot(dp, dp)); }
  void scale(double s) {
    dq = s * dq;
    dp = s * dp;
  }
};

inline double wrap_momentum(double p) { return wrap_centered(p, two_pi); }

inline void step(const StandardMap& m, PhaseState& s) {
  s.p[0] = wrap_momentum(s.p[0] + m.K * std::sin(s.q[0]));
  s.q[0] = wrap_periodic(s.q[0] + s.p[0], two_pi);
}

/// One kick with its tangent: Jacobian [[1 + K cos q, 1], [K cos q, 1]] at the pre-kick q.
inline void step(const StandardMap& m, PhaseState& s, Tangent& t) {
  const double kc = m.K * std::cos(s.q[0]);
  t.dp[0] += kc * t.dq[0];
  t.dq[0] += t.dp[0];
  step(m, s);
}

/// Velocity Verlet; positions are left unwrapped so displacements stay continuous.
inline void step(const Lorentz2d& b, PhaseState& s) {
  const double h = 0.5 * b.dt;
  s.p = s.p + h * b.force(s.q);
  s.q = s.q + (b.dt / b.mass) * s.p;
  s.p = s.p + h * b.force(s.q);
}

/// Verlet step with the exactly linearized (hence symplectic) tangent map.
inline void step(const Lorentz2d& b, PhaseState& s, Tangent& t) {
  const double h = 0.5 * b.dt;
  auto hv = [](const std::array<double, 4>& H, Point v) -> Point {
    return {H[0] * v[0] + H[1] * v[1], H[2] * v[0] + H[3] * v[1]};
  };
  s.p = s.p + h * b.force(s.q);
  t.dp = t.dp - h * hv(b.hessian(s.q), t.dq);
  s.q = s.q + (b.dt / b.mass) * s.p;
  t.dq = t.dq + (b.dt / b.mass) * t.dp;
  s.p = s.p + h * b.force(s.q);
  t.dp = t.dp - h * hv(b.hessian(s.q), t.dq);
}

inline void step(const Backend& b, PhaseState& s) {
  std::visit([&](const auto& m) { step(m, s); }, b);
}
inline void step(const Backend& b, PhaseState& s, Tangent& t) {
  std::visit([&](const auto& m) { step(m, s, t); }, b);
}

inline double energy(const Lorentz2d& b, const PhaseState& s) {
  return 0.5 * dot(s.p, s.p) / b.mass + b.potential(s.q);
}

/// Random phase-space point for orbit `index`: uniform on the torus for the
/// standard map; for lorentz2d uniform position (resampled where U > E/2) and
/// isotropic momentum on the energy shell.
inline PhaseState random_state(const Backend& b, std::uint64_t seed, std::uint64_t index,
                               StreamTag tag = StreamTag::orbit) {
  RandomStream rng(seed_for(seed, index, tag));
  PhaseState s;
  if (const auto* m = std::get_if<StandardMap>(&b)) {
    (void)m;
    s.q[0] = rng.uniform(0.0, two_pi);
    s.p[0] = rng.uniform(-std::numbers::pi, std::numbers::pi);
    return s;
  }
  const auto& L = std::get<Lorentz2d>(b);
  for (int attempt = 0;; ++attempt) {
    s.q = {rng.uniform(0.0, L.box), rng.uniform(0.0, L.box)};
    if (L.potential(s.q) <= 0.5 * L.energy) break;
    if (attempt > 1000) throw Error(Errc::precondition, "lorentz2d: no accessible launch point");
  }
  const double speed = std::sqrt(2.0 * (L.energy - L.potential(s.q)) / L.mass);
  const double th = rng.uniform(0.0, two_pi);
  s.p = {L.mass * speed * std::cos(th), L.mass * speed * std::sin(th)};
  return s;
}

}  // namespace lecho::classical
