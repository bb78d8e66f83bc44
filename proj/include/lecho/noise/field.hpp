#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "lecho/core/error.hpp"
#include "lecho/core/fft.hpp"
#include "lecho/core/point.hpp"
#include "lecho/core/rng.hpp"
#include "lecho/noise/spec.hpp"

namespace lecho::noise {

/// Periodic space-time grid on which a realization is synthesized.
struct FieldGrid {
  double extent = two_pi;     ///< periodic length of each spatial dimension
  std::size_t points = 128;   ///< grid points per spatial dimension
  double dt = 0.125;          ///< time step of the stored grid
};

/// Storage geometry of a realization. Values are time-major:
/// index = (it * ny + iy) * nx + ix, with ny = 1 in one dimension.
struct FieldLayout {
  int dimension = 1;
  double extent = two_pi;
  std::size_t spatial_points = 1;  ///< per dimension; 1 for a spatially static field
  std::size_t time_points = 1;     ///< 1 for a temporally static field
  double dt = 1.0;
  double duration = 0.0;

  std::size_t points_per_slice() const {
    return dimension == 2 ? spatial_points * spatial_points : spatial_points;
  }
  std::size_t size() const { return points_per_slice() * time_points; }
  double spacing() const { return extent / static_cast<double>(spatial_points); }
};

/// Precomputed linear-interpolation weights for a fixed set of 1-D positions.
struct SpatialStencil {
  std::vector<std::size_t> lo;
  std::vector<std::size_t> hi;
  std::vector<double> frac;
};

/// One sampled realization of V(q, t) on a periodic space grid and a uniform
/// time grid, read through multilinear interpolation.
class NoiseField {
 public:
  NoiseField() = default;

  NoiseField(PerturbationSpec spec, FieldLayout layout, std::vector<double> values, std::uint64_t seed,
             std::uint64_t realization_index)
      : spec_(spec), layout_(layout), values_(std::move(values)), seed_(seed), index_(realization_index) {
    if (layout_.dimension != 1 && layout_.dimension != 2) {
      throw Error(Errc::invalid_argument, "NoiseField: dimension must be 1 or 2");
    }
    if (layout_.spatial_points == 0 || layout_.time_points == 0 || !(layout_.extent > 0.0)) {
      throw Error(Errc::invalid_argument, "NoiseField: empty grid");
    }
    if (layout_.time_points > 1 && !(layout_.dt > 0.0)) {
      throw Error(Errc::invalid_argument, "NoiseField: dt must be > 0");
    }
    if (values_.size() != layout_.size()) {
      throw Error(Errc::invalid_argument, "NoiseField: value count does not match layout");
    }
  }

  const PerturbationSpec& spec() const { return spec_; }
  const FieldLayout& layout() const { return layout_; }
  int dimension() const { return layout_.dimension; }
  double extent() const { return layout_.extent; }
  double duration() const { return layout_.duration; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t realization_index() const { return index_; }
  std::span<const double> values() const { return values_; }

  double node(std::size_t it, std::size_t ix, std::size_t iy = 0) const {
    const std::size_t n = layout_.spatial_points;
    return values_[(it * (layout_.dimension == 2 ? n : 1) + iy) * n + ix];
  }

  double sample(Point q, double t) const {
    return interpolate(q, t, [this](std::size_t it, std::size_t ix, std::size_t iy) { return node(it, ix, iy); });
  }

  /// Spatial gradient: centered differences on the grid, then the same
  /// multilinear interpolation as sample().
  Point sample_gradient(Point q, double t) const {
    if (layout_.spatial_points < 3) {
      check_time(t);
      return {0.0, 0.0};
    }
    const std::size_t n = layout_.spatial_points;
    const double inv2h = 0.5 / layout_.spacing();
    Point g{0.0, 0.0};
    g[0] = interpolate(q, t, [&](std::size_t it, std::size_t ix, std::size_t iy) {
      return (node(it, (ix + 1) % n, iy) - node(it, (ix + n - 1) % n, iy)) * inv2h;
    });
    if (layout_.dimension == 2) {
      g[1] = interpolate(q, t, [&](std::size_t it, std::size_t ix, std::size_t iy) {
        return (node(it, ix, (iy + 1) % n) - node(it, ix, (iy + n - 1) % n)) * inv2h;
      });
    }
    return g;
  }

  SpatialStencil stencil(std::span<const double> xs) const {
    if (layout_.dimension != 1) throw Error(Errc::invalid_argument, "stencil: only for 1-D fields");
    SpatialStencil s;
    s.lo.resize(xs.size());
    s.hi.resize(xs.size());
    s.frac.resize(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
      locate_space(xs[i], s.lo[i], s.hi[i], s.frac[i]);
    }
    return s;
  }

  /// V at every stencil position at time t; equivalent to sample() per point.
  void sample_row(const SpatialStencil& s, double t, std::span<double> out) const {
    std::size_t t0 = 0;
    double a = 0.0;
    locate_time(t, t0, a);
    const std::size_t n = layout_.spatial_points;
    const double* r0 = values_.data() + t0 * n;
    const double* r1 = layout_.time_points > 1 ? r0 + n : r0;
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double b = s.frac[i];
      const double v0 = (1.0 - b) * r0[s.lo[i]] + b * r0[s.hi[i]];
      const double v1 = (1.0 - b) * r1[s.lo[i]] + b * r1[s.hi[i]];
      out[i] = (1.0 - a) * v0 + a * v1;
    }
  }

 private:
  void check_time(double t) const {
    const double tol = 1e-9 * std::max(1.0, layout_.duration);
    if (!(t >= -tol && t <= layout_.duration + tol)) {
      throw Error(Errc::out_of_range, "NoiseField: time outside [0, duration]");
    }
  }

  void locate_time(double t, std::size_t& i0, double& a) const {
    check_time(t);
    if (layout_.time_points == 1) {
      i0 = 0;
      a = 0.0;
      return;
    }
    const double s = std::max(0.0, t) / layout_.dt;
    const auto last = static_cast<double>(layout_.time_points - 2);
    const double f = std::min(std::floor(s), last);
    i0 = static_cast<std::size_t>(f);
    a = std::min(1.0, s - f);
  }

  void locate_space(double x, std::size_t& lo, std::size_t& hi, double& frac) const {
    const std::size_t n = layout_.spatial_points;
    if (n == 1) {
      lo = hi = 0;
      frac = 0.0;
      return;
    }
    const double u = wrap_periodic(x, layout_.extent) / layout_.spacing();
    const double f = std::floor(u);
    lo = static_cast<std::size_t>(f) % n;
    hi = (lo + 1) % n;
    frac = u - f;
  }

  template <class NodeFn>
  double interpolate(Point q, double t, NodeFn&& value_at) const {
    std::size_t t0 = 0;
    double a = 0.0;
    locate_time(t, t0, a);
    const std::size_t t1 = layout_.time_points > 1 ? t0 + 1 : t0;
    std::size_t x0, x1, y0 = 0, y1 = 0;
    double bx, by = 0.0;
    locate_space(q[0], x0, x1, bx);
    if (layout_.dimension == 2) locate_space(q[1], y0, y1, by);
    auto slice = [&](std::size_t it) {
      const double lo = (1.0 - bx) * value_at(it, x0, y0) + bx * value_at(it, x1, y0);
      if (layout_.dimension == 1) return lo;
      const double hi = (1.0 - bx) * value_at(it, x0, y1) + bx * value_at(it, x1, y1);
      return (1.0 - by) * lo + by * hi;
    };
    const double v0 = slice(t0);
    if (a == 0.0) return v0;
    return (1.0 - a) * v0 + a * slice(t1);
  }

  PerturbationSpec spec_;
  FieldLayout layout_;
  std::vector<double> values_;
  std::uint64_t seed_ = 0;
  std::uint64_t index_ = 0;
};

namespace detail {

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

/// Range beyond which a unit correlator is below ~1e-16.
inline double negligible_range(CorrelatorKind kind, double scale) {
  return kind == CorrelatorKind::gaussian ? 6.1 * scale : 37.0 * scale;
}

/// Periodized spatial correlator on the synthesis grid (image sum), time-free.
inline std::vector<double> periodic_spatial_covariance(const PerturbationSpec& spec, std::size_t n,
                                                       double extent) {
  const int dim = spec.dimension;
  const std::size_t size = dim == 2 ? n * n : n;
  std::vector<double> c(size, 0.0);
  const double h = extent / static_cast<double>(n);
  const int images = 1 + static_cast<int>(std::ceil(negligible_range(spec.spatial_kind, spec.xi0) / extent));
  for (std::size_t iy = 0; iy < (dim == 2 ? n : 1); ++iy) {
    for (std::size_t ix = 0; ix < n; ++ix) {
      double acc = 0.0;
      for (int mx = -images; mx <= images; ++mx) {
        const double dx = static_cast<double>(ix) * h + mx * extent;
        if (dim == 1) {
          acc += spec.spatial_correlation(std::abs(dx));
          continue;
        }
        for (int my = -images; my <= images; ++my) {
          const double dy = static_cast<double>(iy) * h + my * extent;
          acc += spec.spatial_correlation(std::hypot(dx, dy));
        }
      }
      c[iy * n + ix] = acc;
    }
  }
  return c;
}

inline std::vector<double> spectrum_of(std::vector<double> cov, std::vector<int> shape) {
  FftPlan plan(std::move(shape));
  std::vector<std::complex<double>> buf(cov.begin(), cov.end());
  plan.forward(buf);
  for (std::size_t i = 0; i < cov.size(); ++i) cov[i] = std::max(0.0, buf[i].real());
  return cov;
}

}  // namespace detail

/// Synthesize realization `index` of the stationary Gaussian field with
/// covariance variance * C_S * C_T by circulant embedding.
///
/// The covariance is laid out on the periodic (space x padded time) lattice,
/// its FFT gives the eigenvalues (negative round-off clipped, then rescaled so
/// the expected variance is exactly `spec.variance`), independent complex
/// normal amplitudes are weighted by their square roots, transformed back, and
/// the real part is kept; this is the same as symmetrizing the amplitudes so
/// the field is real. Time is padded by the correlation range so the cropped
/// window [0, duration] carries the exact stationary covariance.
inline NoiseField make_field(const PerturbationSpec& spec, const FieldGrid& grid, double duration,
                             std::uint64_t master_seed, std::uint64_t index) {
  spec.validate();
  if (!(duration > 0.0)) throw Error(Errc::invalid_argument, "make_field: duration must be > 0");
  if (!(grid.extent > 0.0) || grid.points == 0) throw Error(Errc::invalid_argument, "make_field: empty grid");

  FieldLayout layout;
  layout.dimension = spec.dimension;
  layout.extent = grid.extent;
  layout.duration = duration;
  layout.dt = grid.dt;
  layout.spatial_points = spec.spatially_static() ? 1 : grid.points;
  if (!spec.spatially_static() && layout.spacing() > spec.xi0 / 4.0 * (1.0 + 1e-12)) {
    throw Error(Errc::grid_too_coarse, "make_field: grid spacing exceeds xi0/4");
  }
  if (spec.temporally_static()) {
    layout.time_points = 1;
  } else {
    if (!(grid.dt > 0.0) || grid.dt > spec.tau0 / 4.0 * (1.0 + 1e-12)) {
      throw Error(Errc::grid_too_coarse, "make_field: dt exceeds tau0/4");
    }
    layout.time_points = static_cast<std::size_t>(std::ceil(duration / grid.dt - 1e-9)) + 1;
  }

  const std::size_t slice = layout.points_per_slice();
  std::vector<double> values(layout.size(), 0.0);
  if (spec.variance == 0.0) return NoiseField(spec, layout, std::move(values), master_seed, index);

  std::size_t nt = 1;
  if (!spec.temporally_static()) {
    const double range = detail::negligible_range(spec.temporal_kind, spec.tau0);
    nt = detail::next_pow2(layout.time_points + static_cast<std::size_t>(std::ceil(range / grid.dt)));
  }
  std::vector<double> ct(nt, 1.0);
  for (std::size_t i = 0; i < nt; ++i) {
    ct[i] = spec.temporal_correlation(static_cast<double>(std::min(i, nt - i)) * grid.dt);
  }
  const int ns = static_cast<int>(layout.spatial_points);
  std::vector<int> space_shape = spec.dimension == 2 ? std::vector<int>{ns, ns} : std::vector<int>{ns};
  std::vector<double> cs = spec.spatially_static() ? std::vector<double>(slice, 1.0)
                                                   : detail::periodic_spatial_covariance(spec, layout.spatial_points, grid.extent);
  const std::vector<double> et = detail::spectrum_of(std::move(ct), {static_cast<int>(nt)});
  const std::vector<double> es = detail::spectrum_of(std::move(cs), space_shape);

  double total = 0.0;
  for (double a : et) {
    for (double b : es) total += a * b;
  }
  const double n_total = static_cast<double>(nt * slice);
  const double scale = n_total / total;  // mean eigenvalue -> 1

  RandomStream rng(seed_for(master_seed, index, StreamTag::noise));
  std::vector<std::complex<double>> buf(nt * slice);
  for (std::size_t it = 0; it < nt; ++it) {
    for (std::size_t is = 0; is < slice; ++is) {
      const double amp = std::sqrt(et[it] * es[is] * scale / n_total);
      const double re = rng.normal();
      const double im = rng.normal();
      buf[it * slice + is] = {amp * re, amp * im};
    }
  }
  std::vector<int> shape{static_cast<int>(nt)};
  shape.insert(shape.end(), space_shape.begin(), space_shape.end());
  FftPlan(shape).backward(buf);

  // Each complex amplitude has E|W|^2 = 2, so the real part alone has unit variance.
  const double sd = std::sqrt(spec.variance);
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = sd * buf[i].real();
  return NoiseField(spec, layout, std::move(values), master_seed, index);
}

}  // namespace lecho::noise
