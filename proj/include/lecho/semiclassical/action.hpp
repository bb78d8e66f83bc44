#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <map>
#include <ostream>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "lecho/classical/trajectory.hpp"
#include "lecho/core/error.hpp"
#include "lecho/core/stats.hpp"
#include "lecho/noise/field.hpp"

namespace lecho::semiclassical {

/// Action difference Delta S(t) = int_0^t V(q_s(t'), t') dt' along one
/// unperturbed trajectory in one noise realization.
struct ActionRecord {
  std::vector<double> times;
  std::vector<double> delta_S;
  std::uint64_t trajectory_id = 0;
  std::uint64_t realization_index = 0;
};

/// Trapezoidal accumulation with the trajectory's own step.
inline ActionRecord accumulate_action(const classical::Trajectory& tr, const noise::NoiseField& field,
                                      std::uint64_t trajectory_id = 0) {
  if (tr.size() == 0) throw Error(Errc::invalid_argument, "accumulate_action: empty trajectory");
  if (tr.dimension() != field.dimension()) {
    throw Error(Errc::invalid_argument, "accumulate_action: trajectory and field dimensions differ");
  }
  const double extent = classical::extent_of(tr.backend);
  if (std::abs(extent - field.extent()) > 1e-12 * extent) {
    throw Error(Errc::invalid_argument, "accumulate_action: field extent does not match the backend domain");
  }
  const double tol = 1e-9 * std::max(1.0, tr.times.back());
  if (field.duration() + tol < tr.times.back()) {
    throw Error(Errc::duration_mismatch, "accumulate_action: field is shorter than the trajectory");
  }
  ActionRecord rec;
  rec.trajectory_id = trajectory_id;
  rec.realization_index = field.realization_index();
  rec.times = tr.times;
  rec.delta_S.resize(tr.size());
  const double t_max = field.duration();
  double prev = field.sample(tr.q[0], std::min(tr.times[0], t_max));
  double s = 0.0;
  rec.delta_S[0] = 0.0;
  for (std::size_t i = 1; i < tr.size(); ++i) {
    const double cur = field.sample(tr.q[i], std::min(tr.times[i], t_max));
    s += 0.5 * (tr.times[i] - tr.times[i - 1]) * (prev + cur);
    rec.delta_S[i] = s;
    prev = cur;
  }
  return rec;
}

namespace detail {

/// Records grouped by realization for the jackknife; with a single
/// realization each record is its own group.
inline std::vector<std::vector<std::size_t>> groups_of(std::span<const ActionRecord> records) {
  std::map<std::uint64_t, std::vector<std::size_t>> by;
  for (std::size_t i = 0; i < records.size(); ++i) by[records[i].realization_index].push_back(i);
  std::vector<std::vector<std::size_t>> g;
  if (by.size() >= 2) {
    for (auto& [k, v] : by) g.push_back(std::move(v));
  } else {
    for (std::size_t i = 0; i < records.size(); ++i) g.push_back({i});
  }
  return g;
}

inline void check_records(std::span<const ActionRecord> records, std::size_t min_records) {
  if (records.size() < min_records) {
    throw Error(Errc::insufficient_ensemble, "action ensemble needs at least " + std::to_string(min_records) + " records");
  }
  const std::size_t n = records.front().times.size();
  for (const auto& r : records) {
    if (r.times.size() != n) throw Error(Errc::invalid_argument, "action records have different time grids");
  }
}

}  // namespace detail

struct ActionVariance {
  std::vector<double> times;
  std::vector<double> mean;           ///< <Delta S>
  std::vector<double> second_moment;  ///< <Delta S^2>
  std::vector<double> second_moment_err;
  std::size_t n_records = 0;
  double window_start = 0.0;
  double window_end = 0.0;
  double slope = 0.0;  ///< d<Delta S^2>/dt over the window
  double slope_err = 0.0;
  double intercept = 0.0;
  double correlation = 0.0;
};

/// Start of the asymptotic window, 5 max(tau0, tau_xi) over the non-static scales.
inline double asymptotic_window_start(const noise::PerturbationSpec& spec, double v) {
  double m = 0.0;
  if (!spec.temporally_static()) m = std::max(m, spec.tau0);
  if (!spec.spatially_static()) m = std::max(m, spec.xi0 / v);
  return 5.0 * m;
}

/// Ensemble <Delta S^2>(t) with a delete-one-realization jackknife, plus the
/// least-squares slope over [window_start, window_end] (jackknifed as well).
inline ActionVariance action_variance(std::span<const ActionRecord> records, double window_start,
                                      double window_end = std::numeric_limits<double>::infinity()) {
  detail::check_records(records, 30);
  const auto groups = detail::groups_of(records);
  const std::size_t nt = records.front().times.size();
  const std::size_t ng = groups.size();
  std::vector<std::vector<double>> g1(ng, std::vector<double>(nt)), g2(ng, std::vector<double>(nt));
  std::vector<double> gn(ng);
  for (std::size_t g = 0; g < ng; ++g) {
    gn[g] = static_cast<double>(groups[g].size());
    for (std::size_t k = 0; k < nt; ++k) {
      KahanSum a, b;
      for (std::size_t i : groups[g]) {
        const double s = records[i].delta_S[k];
        a += s;
        b += s * s;
      }
      g1[g][k] = a.value();
      g2[g][k] = b.value();
    }
  }
  std::vector<double> t1(nt), t2(nt);
  double ntot = 0;
  for (double x : gn) ntot += x;
  for (std::size_t k = 0; k < nt; ++k) {
    KahanSum a, b;
    for (std::size_t g = 0; g < ng; ++g) {
      a += g1[g][k];
      b += g2[g][k];
    }
    t1[k] = a.value();
    t2[k] = b.value();
  }

  ActionVariance out;
  out.times = records.front().times;
  out.n_records = records.size();
  out.mean.resize(nt);
  out.second_moment.resize(nt);
  out.second_moment_err.resize(nt);
  for (std::size_t k = 0; k < nt; ++k) {
    out.mean[k] = t1[k] / ntot;
    const MeanErr m = jackknife(ng, [&](long g) {
      if (g < 0) return t2[k] / ntot;
      const auto u = static_cast<std::size_t>(g);
      return (t2[k] - g2[u][k]) / (ntot - gn[u]);
    });
    out.second_moment[k] = m.mean;
    out.second_moment_err[k] = m.err;
  }

  const double tol = 1e-9 * std::max(1.0, out.times.back());
  std::vector<std::size_t> idx;
  for (std::size_t k = 0; k < nt; ++k) {
    if (out.times[k] >= window_start - tol && out.times[k] <= window_end + tol) idx.push_back(k);
  }
  if (idx.size() < 3) throw Error(Errc::no_fit_window, "action_variance: fewer than 3 points in the asymptotic window");
  out.window_start = out.times[idx.front()];
  out.window_end = out.times[idx.back()];
  std::vector<double> x(idx.size()), y(idx.size());
  for (std::size_t j = 0; j < idx.size(); ++j) x[j] = out.times[idx[j]];
  auto slope_of = [&](long g) {
    for (std::size_t j = 0; j < idx.size(); ++j) {
      const std::size_t k = idx[j];
      if (g < 0) {
        y[j] = t2[k] / ntot;
      } else {
        const auto u = static_cast<std::size_t>(g);
        y[j] = (t2[k] - g2[u][k]) / (ntot - gn[u]);
      }
    }
    return fit_line(x, y);
  };
  const LineFit full = slope_of(-1);
  out.intercept = full.intercept;
  out.correlation = full.correlation;
  const MeanErr s = jackknife(ng, [&](long g) { return slope_of(g).slope; });
  out.slope = s.mean;
  out.slope_err = s.err;
  return out;
}

struct DephasingCurve {
  std::vector<double> times;
  std::vector<double> direct;  ///< |<exp(i Delta S / hbar)>|
  std::vector<double> direct_err;
  std::vector<double> gaussian;  ///< exp(-<Delta S^2> / 2 hbar^2)
  std::vector<double> gaussian_err;
  std::vector<double> difference_err;  ///< jackknife error of direct - gaussian
};

inline DephasingCurve dephasing_factor(std::span<const ActionRecord> records, double hbar_eff) {
  detail::check_records(records, 30);
  if (!(hbar_eff > 0.0)) throw Error(Errc::invalid_argument, "dephasing_factor: hbar_eff must be > 0");
  const auto groups = detail::groups_of(records);
  const std::size_t nt = records.front().times.size();
  const std::size_t ng = groups.size();
  DephasingCurve out;
  out.times = records.front().times;
  out.direct.resize(nt);
  out.direct_err.resize(nt);
  out.gaussian.resize(nt);
  out.gaussian_err.resize(nt);
  out.difference_err.resize(nt);
  std::vector<double> gc(ng), gs(ng), g2(ng), gn(ng);
  for (std::size_t k = 0; k < nt; ++k) {
    KahanSum tc, ts, t2;
    double ntot = 0;
    for (std::size_t g = 0; g < ng; ++g) {
      KahanSum c, s, q;
      for (std::size_t i : groups[g]) {
        const double phi = records[i].delta_S[k] / hbar_eff;
        c += std::cos(phi);
        s += std::sin(phi);
        q += phi * phi;
      }
      gc[g] = c.value();
      gs[g] = s.value();
      g2[g] = q.value();
      gn[g] = static_cast<double>(groups[g].size());
      tc += gc[g];
      ts += gs[g];
      t2 += g2[g];
      ntot += gn[g];
    }
    auto direct = [&](long g) {
      if (g < 0) return std::hypot(tc.value(), ts.value()) / ntot;
      const auto u = static_cast<std::size_t>(g);
      return std::hypot(tc.value() - gc[u], ts.value() - gs[u]) / (ntot - gn[u]);
    };
    auto gauss = [&](long g) {
      if (g < 0) return std::exp(-0.5 * t2.value() / ntot);
      const auto u = static_cast<std::size_t>(g);
      return std::exp(-0.5 * (t2.value() - g2[u]) / (ntot - gn[u]));
    };
    const MeanErr d = jackknife(ng, direct);
    const MeanErr e = jackknife(ng, gauss);
    const MeanErr diff = jackknife(ng, [&](long g) { return direct(g) - gauss(g); });
    out.direct[k] = d.mean;
    out.direct_err[k] = d.err;
    out.gaussian[k] = e.mean;
    out.gaussian_err[k] = e.err;
    out.difference_err[k] = diff.err;
  }
  return out;
}

inline void write_action_csv(std::ostream& os, const ActionVariance& v) {
  os.precision(17);
  os << "t,mean_dS,mean_dS2,stderr\n";
  for (std::size_t k = 0; k < v.times.size(); ++k) {
    os << v.times[k] << ',' << v.mean[k] << ',' << v.second_moment[k] << ',' << v.second_moment_err[k] << '\n';
  }
}

}  // namespace lecho::semiclassical
