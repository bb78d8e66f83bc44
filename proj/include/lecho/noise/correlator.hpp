#pragma once

#include <cmath>
#include <cstddef>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "lecho/core/error.hpp"
#include "lecho/core/stats.hpp"
#include "lecho/noise/field.hpp"

namespace lecho::noise {

enum class Axis { space, time };

/// Normalized correlator estimate, value(0) = 1 by construction.
struct CorrelatorCurve {
  std::vector<double> lags;
  std::vector<double> values;
  std::vector<double> stderr_values;
};

namespace detail {

inline void check_ensemble(std::span<const NoiseField> fields) {
  if (fields.size() < 10) {
    throw Error(Errc::insufficient_ensemble, "empirical_correlator: need at least 10 realizations");
  }
  const FieldLayout& a = fields.front().layout();
  for (const auto& f : fields) {
    const FieldLayout& b = f.layout();
    if (b.spatial_points != a.spatial_points || b.time_points != a.time_points || b.dimension != a.dimension) {
      throw Error(Errc::invalid_argument, "empirical_correlator: realizations on different grids");
    }
  }
}

/// Mean of V(x, t) V(x + sx, t + st) over every x (periodic, first spatial
/// axis) and every t with t + st inside the window. A field with a single
/// time slice is constant in time, so any st reads that same slice.
inline double lag_product(const NoiseField& f, std::size_t sx, std::size_t st) {
  const FieldLayout& L = f.layout();
  const std::size_t n = L.spatial_points;
  const std::size_t ny = L.dimension == 2 ? n : 1;
  const bool frozen = L.time_points == 1;
  const std::size_t nt = frozen ? 1 : L.time_points - st;
  KahanSum s;
  for (std::size_t it = 0; it < nt; ++it) {
    const std::size_t jt = frozen ? 0 : it + st;
    for (std::size_t iy = 0; iy < ny; ++iy) {
      for (std::size_t ix = 0; ix < n; ++ix) {
        s += f.node(it, ix, iy) * f.node(jt, (ix + sx) % n, iy);
      }
    }
  }
  return s.value() / static_cast<double>(nt * ny * n);
}

/// Ratio-of-means estimate of C(sx, st)/C(0, 0) with a delete-one-realization jackknife.
inline MeanErr normalized_lag(std::span<const double> num, std::span<const double> den) {
  const std::size_t n = num.size();
  KahanSum sn, sd;
  for (std::size_t i = 0; i < n; ++i) {
    sn += num[i];
    sd += den[i];
  }
  const double tn = sn.value();
  const double td = sd.value();
  return jackknife(n, [&](long g) {
    if (g < 0) return td != 0.0 ? tn / td : 1.0;
    const double d = td - den[static_cast<std::size_t>(g)];
    return d != 0.0 ? (tn - num[static_cast<std::size_t>(g)]) / d : 1.0;
  });
}

}  // namespace detail

/// Correlator along one axis for lags 0..max_lag grid steps. Each realization
/// contributes its lag-product average (divided by the number of products, so
/// unbiased for a zero-mean field); the ensemble ratio to the zero-lag value is
/// the estimate and the across-realization jackknife gives the error.
inline CorrelatorCurve empirical_correlator(std::span<const NoiseField> fields, Axis axis, std::size_t max_lag) {
  detail::check_ensemble(fields);
  const FieldLayout& L = fields.front().layout();
  if (axis == Axis::space && max_lag >= L.spatial_points && L.spatial_points > 1) {
    throw Error(Errc::out_of_range, "empirical_correlator: space lag exceeds the grid");
  }
  if (axis == Axis::time && L.time_points > 1 && max_lag >= L.time_points) {
    throw Error(Errc::out_of_range, "empirical_correlator: time lag exceeds the window");
  }
  std::vector<double> zero(fields.size());
  for (std::size_t i = 0; i < fields.size(); ++i) zero[i] = detail::lag_product(fields[i], 0, 0);

  CorrelatorCurve c;
  const double step = axis == Axis::space ? L.spacing() : L.dt;
  std::vector<double> num(fields.size());
  for (std::size_t k = 0; k <= max_lag; ++k) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      num[i] = axis == Axis::space ? detail::lag_product(fields[i], k, 0) : detail::lag_product(fields[i], 0, k);
    }
    const MeanErr r = detail::normalized_lag(num, zero);
    c.lags.push_back(static_cast<double>(k) * step);
    c.values.push_back(r.mean);
    c.stderr_values.push_back(r.err);
  }
  return c;
}

/// Joint space-time correlator at (space_lag, time_lag) grid steps, normalized
/// by the zero lag.
inline MeanErr empirical_space_time_correlator(std::span<const NoiseField> fields, std::size_t space_lag,
                                               std::size_t time_lag) {
  detail::check_ensemble(fields);
  std::vector<double> num(fields.size()), den(fields.size());
  for (std::size_t i = 0; i < fields.size(); ++i) {
    num[i] = detail::lag_product(fields[i], space_lag, time_lag);
    den[i] = detail::lag_product(fields[i], 0, 0);
  }
  return detail::normalized_lag(num, den);
}

/// <grad V(q,t) . grad V(q',t')> at |q-q'| = r, |t-t'| = tau for the Gaussian
/// spatial correlator: variance * C_T(tau) * [2d/xi0^2 - 4 r^2/xi0^4] exp(-r^2/xi0^2).
inline double force_correlator_analytic(const PerturbationSpec& spec, double r, double tau) {
  if (spec.spatial_kind != CorrelatorKind::gaussian) {
    throw Error(Errc::unsupported_kind, "force_correlator_analytic: closed form needs a gaussian spatial correlator");
  }
  const double x2 = spec.xi0 * spec.xi0;
  const double bracket = 2.0 * spec.dimension / x2 - 4.0 * r * r / (x2 * x2);
  return spec.variance * spec.temporal_correlation(tau) * bracket * std::exp(-r * r / x2);
}

inline void write_correlator_csv(std::ostream& os, const CorrelatorCurve& c) {
  os.precision(17);
  os << "lag,value,stderr\n";
  for (std::size_t i = 0; i < c.lags.size(); ++i) {
    os << c.lags[i] << ',' << c.values[i] << ',' << c.stderr_values[i] << '\n';
  }
}

}  // namespace lecho::noise
