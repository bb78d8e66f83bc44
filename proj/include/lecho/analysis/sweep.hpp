#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "lecho/analysis/classify.hpp"
#include "lecho/analysis/fit.hpp"
#include "lecho/core/error.hpp"
#include "lecho/quantum/echo.hpp"
#include "lecho/semiclassical/predict.hpp"

namespace lecho::analysis {

/// Rate-vs-axis table. All per-point arrays have values.size() entries; a
/// failed point keeps NaN rates and its error message.
struct SweepResult {
  std::string axis;
  std::vector<double> values;
  std::vector<double> rates;
  std::vector<double> rate_errs;
  std::vector<double> predicted_fgr;
  double lambda = std::numeric_limits<double>::quiet_NaN();
  std::vector<Regime> regimes;
  std::vector<std::string> errors;  ///< empty string on success
  std::vector<DecayFit> fits;

  std::size_t size() const { return values.size(); }
  bool ok(std::size_t i) const { return errors[i].empty(); }
};

struct SweepOptions {
  double lambda = 0.0;  ///< Lyapunov exponent of the unperturbed map, per kick
  double v = 0.0;       ///< typical speed entering tau_xi = xi0 / v
  FitOptions fit;
};

/// Axis names accepted by sweep().
inline const std::vector<std::string>& sweep_axes() {
  static const std::vector<std::string> axes = {"perturbation.variance", "perturbation.tau0", "perturbation.xi0",
                                                "model.K"};
  return axes;
}

inline void apply_axis(quantum::EchoConfig& cfg, const std::string& axis, double value) {
  if (axis == "perturbation.variance") {
    cfg.spec.variance = value;
  } else if (axis == "perturbation.tau0") {
    cfg.spec.tau0 = value;
  } else if (axis == "perturbation.xi0") {
    cfg.spec.xi0 = value;
  } else if (axis == "model.K") {
    cfg.K = value;
  } else {
    throw Error(Errc::invalid_argument, "sweep: unknown axis '" + axis + "'");
  }
}

/// Runs ensemble_echo at each axis value with the base master seed, fits and
/// classifies. Point failures are recorded and the sweep continues.
inline SweepResult sweep(const quantum::EchoConfig& base, const std::string& axis, const std::vector<double>& values,
                         const SweepOptions& opt) {
  if (values.empty()) throw Error(Errc::invalid_argument, "sweep: no axis values");
  if (!(opt.lambda > 0.0) || !(opt.v > 0.0)) {
    throw Error(Errc::invalid_argument, "sweep: lambda and v must be > 0");
  }
  {
    quantum::EchoConfig probe = base;
    apply_axis(probe, axis, values.front());  // rejects unknown axes before any work
  }
  SweepResult s;
  s.axis = axis;
  s.lambda = opt.lambda;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (double x : values) {
    quantum::EchoConfig cfg = base;
    apply_axis(cfg, axis, x);
    s.values.push_back(x);
    double pred = nan;
    try {
      pred = semiclassical::predict_fgr_rate(cfg.spec, opt.v, quantum::torus_hbar(cfg.N), opt.lambda).fgr_rate;
      const quantum::EchoCurve c = quantum::ensemble_echo(cfg);
      FitOptions fo = opt.fit;
      if (!fo.rate_seeds && pred > 0.0) fo.rate_seeds = std::array<double, 2>{std::max(opt.lambda, pred), std::min(opt.lambda, pred)};
      const DecayFit f = fit_decay(c, c.saturation, fo);
      s.rates.push_back(f.rate);
      s.rate_errs.push_back(f.rate_err);
      s.regimes.push_back(pred > 0.0 ? classify_regime(f.rate, f.rate_err, opt.lambda, pred) : Regime::ambiguous);
      s.errors.emplace_back();
      s.fits.push_back(f);
    } catch (const Error& e) {
      s.rates.push_back(nan);
      s.rate_errs.push_back(nan);
      s.regimes.push_back(e.code() == Errc::no_fit_window ? Regime::perturbative : Regime::ambiguous);
      s.errors.emplace_back(e.what());
      s.fits.emplace_back();
    }
    s.predicted_fgr.push_back(pred);
  }
  return s;
}

struct CrossoverOptions {
  double convention_factor = 1.0;  ///< multiplies 1/tau~ in the min-rule oracle
  double pointwise_tolerance = 0.30;
  double knee_factor = 2.0;
};

struct CrossoverReport {
  std::string axis;
  bool no_crossover = true;  ///< predicted 1/tau~ never crosses lambda over the sweep
  double predicted_crossover = std::numeric_limits<double>::quiet_NaN();
  bool knee_found = false;
  double empirical_knee = std::numeric_limits<double>::quiet_NaN();
  double fitted_scale = std::numeric_limits<double>::quiet_NaN();    ///< c in rate = min(c/tau~, P)
  double fitted_plateau = std::numeric_limits<double>::quiet_NaN();  ///< P
  double knee_ratio = std::numeric_limits<double>::quiet_NaN();      ///< empirical / predicted
  std::vector<double> min_rule;       ///< min(convention_factor/tau~, lambda) per point
  std::vector<double> rel_deviation;  ///< |rate / min_rule - 1| per point (NaN for failed points)
  double max_rel_deviation = std::numeric_limits<double>::quiet_NaN();
  double lambda = 0.0;
  CrossoverOptions options;

  bool tracks_min_rule() const { return max_rel_deviation < options.pointwise_tolerance; }
  bool knee_within_factor() const {
    return knee_found && !no_crossover && knee_ratio <= options.knee_factor && knee_ratio >= 1.0 / options.knee_factor;
  }
};

namespace detail {

/// Axis value where the piecewise log-log interpolant of (x, y) reaches target.
inline double loglog_crossing(const std::vector<double>& x, const std::vector<double>& y, double target) {
  for (std::size_t i = 0; i + 1 < x.size(); ++i) {
    const double a = y[i] - target, b = y[i + 1] - target;
    if (a == 0.0) return x[i];
    if ((a < 0.0) != (b < 0.0) || b == 0.0) {
      const double la = std::log(y[i]), lb = std::log(y[i + 1]), lt = std::log(target);
      const double f = (lt - la) / (lb - la);
      return std::exp(std::log(x[i]) + f * (std::log(x[i + 1]) - std::log(x[i])));
    }
  }
  return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace detail

/// Locates the predicted crossover (1/tau~ = lambda) and the empirical knee of
/// the broken line rate = min(c/tau~, P) fitted in log space.
inline CrossoverReport crossover_report(const SweepResult& s, const CrossoverOptions& opt = {}) {
  CrossoverReport r;
  r.axis = s.axis;
  r.lambda = s.lambda;
  r.options = opt;

  // points sorted by axis value with positive predictions
  std::vector<std::size_t> order(s.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s.values[a] < s.values[b]; });
  std::vector<double> xs, ps;
  for (std::size_t i : order) {
    if (s.predicted_fgr[i] > 0.0 && s.values[i] > 0.0) {
      xs.push_back(s.values[i]);
      ps.push_back(s.predicted_fgr[i]);
    }
  }
  r.predicted_crossover = detail::loglog_crossing(xs, ps, s.lambda);
  r.no_crossover = !std::isfinite(r.predicted_crossover);

  r.min_rule.resize(s.size());
  r.rel_deviation.assign(s.size(), std::numeric_limits<double>::quiet_NaN());
  double worst = 0.0;
  bool any = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    r.min_rule[i] = std::min(opt.convention_factor * s.predicted_fgr[i], s.lambda);
    if (s.ok(i) && r.min_rule[i] > 0.0) {
      r.rel_deviation[i] = std::abs(s.rates[i] / r.min_rule[i] - 1.0);
      worst = std::max(worst, r.rel_deviation[i]);
      any = true;
    }
  }
  if (any) r.max_rel_deviation = worst;

  // Broken-line fit: points with the k smallest predictions follow c/tau~,
  // the rest sit on the plateau P; least squares in log rate.
  std::vector<std::size_t> good;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s.ok(i) && s.rates[i] > 0.0 && s.predicted_fgr[i] > 0.0) good.push_back(i);
  }
  std::sort(good.begin(), good.end(), [&](std::size_t a, std::size_t b) { return s.predicted_fgr[a] < s.predicted_fgr[b]; });
  const std::size_t n = good.size();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < n; ++k) {  // both branches non-empty
    double lc = 0.0, lp = 0.0;
    for (std::size_t j = 0; j < k; ++j) lc += std::log(s.rates[good[j]] / s.predicted_fgr[good[j]]);
    for (std::size_t j = k; j < n; ++j) lp += std::log(s.rates[good[j]]);
    lc /= static_cast<double>(k);
    lp /= static_cast<double>(n - k);
    // the break must fall between the two branches for the partition to be consistent
    const double pk = std::exp(lp - lc);
    if (pk < s.predicted_fgr[good[k - 1]] * (1.0 - 1e-12) || pk > s.predicted_fgr[good[k]] * (1.0 + 1e-12)) continue;
    double sse = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double m = std::min(lc + std::log(s.predicted_fgr[good[j]]), lp);
      const double d = std::log(s.rates[good[j]]) - m;
      sse += d * d;
    }
    if (sse < best) {
      best = sse;
      r.fitted_scale = std::exp(lc);
      r.fitted_plateau = std::exp(lp);
    }
  }
  if (std::isfinite(best)) {
    r.empirical_knee = detail::loglog_crossing(xs, ps, r.fitted_plateau / r.fitted_scale);
    r.knee_found = std::isfinite(r.empirical_knee);
  }
  if (r.knee_found && !r.no_crossover) r.knee_ratio = r.empirical_knee / r.predicted_crossover;
  return r;
}

inline void write_rates_csv(std::ostream& os, const SweepResult& s) {
  os.precision(17);
  os << "axis_value,rate,rate_err,predicted_fgr,lambda,regime\n";
  for (std::size_t i = 0; i < s.size(); ++i) {
    os << s.values[i] << ',' << s.rates[i] << ',' << s.rate_errs[i] << ',' << s.predicted_fgr[i] << ',' << s.lambda
       << ',' << semiclassical::to_string(s.regimes[i]) << '\n';
  }
}

inline nlohmann::json to_json(const DecayFit& f) {
  nlohmann::json j = {{"rate", f.rate},           {"rate_err", f.rate_err}, {"window", {f.t_a, f.t_b}},
                      {"r_squared", f.r_squared}, {"model", to_string(f.model)}, {"n_points", f.n_points},
                      {"single_rate", f.single_rate}, {"single_rate_err", f.single_rate_err}};
  if (f.composite) {
    const auto& c = *f.composite;
    j["composite"] = {{"A_bar", c.A_bar}, {"lambda", c.lambda}, {"lambda_err", c.lambda_err}, {"B", c.B},
                      {"gamma", c.gamma}, {"gamma_err", c.gamma_err}, {"chi2_reduced", c.chi2_reduced}};
  }
  return j;
}

inline nlohmann::json to_json(const CrossoverReport& r) {
  auto num = [](double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); };
  nlohmann::json dev = nlohmann::json::array();
  for (double d : r.rel_deviation) dev.push_back(num(d));
  return {{"format_version", 1},
          {"axis", r.axis},
          {"lambda", r.lambda},
          {"no_crossover", r.no_crossover},
          {"predicted_crossover", num(r.predicted_crossover)},
          {"knee_found", r.knee_found},
          {"empirical_knee", num(r.empirical_knee)},
          {"knee_ratio", num(r.knee_ratio)},
          {"fitted_scale", num(r.fitted_scale)},
          {"fitted_plateau", num(r.fitted_plateau)},
          {"convention_factor", r.options.convention_factor},
          {"min_rule", r.min_rule},
          {"rel_deviation", dev},
          {"max_rel_deviation", num(r.max_rel_deviation)},
          {"tolerances", {{"pointwise", r.options.pointwise_tolerance}, {"knee_factor", r.options.knee_factor}}},
          {"tracks_min_rule", r.tracks_min_rule()},
          {"knee_within_factor", r.knee_within_factor()}};
}

}  // namespace lecho::analysis
