#pragma once

// Expected action variance along a fixed trajectory for a field with
// covariance variance * C_S(|q - q'|) * C_T(|t - t'|) on a periodic box:
//   <dS^2>(t) = int_0^t int_0^t variance C_S(|q(t1) - q(t2)|) C_T(|t1 - t2|) dt1 dt2,
// by a double trapezoid on every `stride`-th trajectory sample.

#include <cmath>
#include <cstddef>
#include <vector>

#include "lecho/core/point.hpp"
#include "lecho/noise/spec.hpp"

namespace oracle {

struct VarianceCurve {
  std::vector<double> times;
  std::vector<double> values;
};

inline double periodic_spatial(const lecho::noise::PerturbationSpec& spec, lecho::Point d, double extent, int dim) {
  if (spec.spatially_static()) return 1.0;
  const int images = extent < 12.0 * spec.xi0 ? 2 : 0;
  double c = 0.0;
  const double dx0 = lecho::wrap_centered(d[0], extent);
  const double dy0 = dim == 2 ? lecho::wrap_centered(d[1], extent) : 0.0;
  for (int mx = -images; mx <= images; ++mx) {
    for (int my = (dim == 2 ? -images : 0); my <= (dim == 2 ? images : 0); ++my) {
      const double dx = dx0 + mx * extent, dy = dy0 + my * extent;
      const double r2 = dx * dx + dy * dy;
      if (spec.spatial_kind == lecho::noise::CorrelatorKind::gaussian && r2 > 49.0 * spec.xi0 * spec.xi0) continue;
      c += spec.spatial_correlation(std::sqrt(r2));
    }
  }
  return c;
}

inline VarianceCurve action_variance_along(const std::vector<double>& times, const std::vector<lecho::Point>& q,
                                           const lecho::noise::PerturbationSpec& spec, double extent,
                                           std::size_t stride) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < times.size(); i += stride) idx.push_back(i);
  const std::size_t n = idx.size();
  const double h = times[idx[1]] - times[idx[0]];
  VarianceCurve out;
  out.times.reserve(n);
  out.values.reserve(n);
  auto u = [&](std::size_t i) { return i == 0 ? 0.5 * h : h; };
  double U = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    double row = 0.0;  // sum_{i<k} u_i K_ik
    for (std::size_t i = 0; i < k; ++i) {
      const double ct = spec.temporal_correlation(times[idx[k]] - times[idx[i]]);
      if (ct < 1e-18) continue;
      row += u(i) * ct * periodic_spatial(spec, lecho::operator-(q[idx[k]], q[idx[i]]), extent, spec.dimension);
    }
    const double kk = periodic_spatial(spec, {0.0, 0.0}, extent, spec.dimension);
    U += 2.0 * u(k) * row + u(k) * u(k) * kk;
    const double F = U - h * (row + u(k) * kk) + 0.25 * h * h * kk;
    out.times.push_back(times[idx[k]]);
    out.values.push_back(k == 0 ? 0.0 : spec.variance * F);
  }
  return out;
}

}  // namespace oracle
