#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string_view>
#include <vector>

#include "lecho/core/error.hpp"
#include "lecho/core/stats.hpp"
#include "lecho/quantum/echo.hpp"
#include "lecho/semiclassical/predict.hpp"

namespace lecho::analysis {

enum class FitModel { single_exponential, composite };

inline std::string_view to_string(FitModel m) {
  return m == FitModel::composite ? "composite" : "single_exponential";
}

/// Parameters of M = A_bar e^{-lambda t} + B e^{-gamma t}.
struct CompositeParams {
  double A_bar = 0.0;
  double lambda = 0.0;
  double B = 0.0;
  double gamma = 0.0;
  double lambda_err = 0.0;
  double gamma_err = 0.0;
  double chi2_reduced = 0.0;
};

struct DecayFit {
  double rate = 0.0;
  double rate_err = 0.0;
  double t_a = 0.0;
  double t_b = 0.0;
  double r_squared = 0.0;
  FitModel model = FitModel::single_exponential;
  std::size_t n_points = 0;
  double single_rate = 0.0;  ///< single-exponential rate, kept when the composite model is chosen
  double single_rate_err = 0.0;
  std::optional<CompositeParams> composite;
};

enum class ModelChoice { automatic, single_exponential, composite };

struct FitOptions {
  double upper = 0.9;          ///< window top
  double floor_factor = 10.0;  ///< window bottom = max(floor_factor * saturation, floor_min)
  double floor_min = 0.01;
  double r2_threshold = 0.98;  ///< composite attempted below this single-exponential r^2
  ModelChoice model = ModelChoice::automatic;
  /// Seeds for the composite fit, typically the predicted (lambda, 1/tau~).
  std::optional<std::array<double, 2>> rate_seeds;
};

namespace detail {

struct Window {
  std::vector<double> t, logm, sigma;  ///< sigma: stderr of log M (1 when unknown)
  bool weighted = true;
};

/// Points from the first M <= upper up to (excluding) the first M < bottom.
inline Window select_window(const quantum::EchoCurve& c, double bottom, double upper) {
  Window w;
  for (std::size_t k = 0; k < c.size(); ++k) {
    if (c.mean_M[k] > upper) continue;
    if (c.mean_M[k] < bottom || !(c.mean_M[k] > 0.0)) break;
    w.t.push_back(c.times[k]);
    w.logm.push_back(std::log(c.mean_M[k]));
    const double s = k < c.stderr_M.size() ? c.stderr_M[k] / c.mean_M[k] : 0.0;
    if (!(s > 0.0)) w.weighted = false;
    w.sigma.push_back(s);
  }
  if (!w.weighted) std::fill(w.sigma.begin(), w.sigma.end(), 1.0);
  return w;
}

/// Levenberg-Marquardt on log M with parameters (ln A_bar, ln lambda, ln B, ln gamma).
inline std::optional<CompositeParams> fit_composite(const Window& w, double lambda0, double gamma0) {
  const std::size_t n = w.t.size();
  if (n < 5 || !(lambda0 > 0.0) || !(gamma0 > 0.0)) return std::nullopt;
  // amplitudes from a linear least-squares solve at the seeded rates
  Eigen::MatrixXd X(n, 2);
  Eigen::VectorXd y(n);
  for (std::size_t i = 0; i < n; ++i) {
    X(i, 0) = std::exp(-lambda0 * w.t[i]);
    X(i, 1) = std::exp(-gamma0 * w.t[i]);
    y(i) = std::exp(w.logm[i]);
  }
  Eigen::Vector2d amp = X.colPivHouseholderQr().solve(y);
  const double total = std::exp(w.logm.front());
  Eigen::Vector4d p(std::log(std::max(amp(0), 1e-3 * total)), std::log(lambda0), std::log(std::max(amp(1), 1e-3 * total)),
                    std::log(gamma0));

  auto residuals = [&](const Eigen::Vector4d& q, Eigen::VectorXd& r, Eigen::MatrixXd* J) {
    const double a = std::exp(q(0)), l = std::exp(q(1)), b = std::exp(q(2)), g = std::exp(q(3));
    r.resize(static_cast<Eigen::Index>(n));
    if (J) J->resize(static_cast<Eigen::Index>(n), 4);
    for (std::size_t i = 0; i < n; ++i) {
      const double ea = a * std::exp(-l * w.t[i]), eb = b * std::exp(-g * w.t[i]);
      const double m = ea + eb;
      const auto k = static_cast<Eigen::Index>(i);
      r(k) = (std::log(m) - w.logm[i]) / w.sigma[i];
      if (J) {
        (*J)(k, 0) = ea / m / w.sigma[i];
        (*J)(k, 1) = -w.t[i] * l * ea / m / w.sigma[i];
        (*J)(k, 2) = eb / m / w.sigma[i];
        (*J)(k, 3) = -w.t[i] * g * eb / m / w.sigma[i];
      }
    }
    return r.squaredNorm();
  };

  Eigen::VectorXd r;
  Eigen::MatrixXd J;
  double cost = residuals(p, r, &J);
  double mu = 1e-3;
  for (int it = 0; it < 200; ++it) {
    const Eigen::Matrix4d H = J.transpose() * J;
    const Eigen::Vector4d gvec = J.transpose() * r;
    Eigen::Matrix4d A = H;
    for (int d = 0; d < 4; ++d) A(d, d) += mu * std::max(H(d, d), 1e-12);
    const Eigen::Vector4d step = A.ldlt().solve(-gvec);
    if (!step.allFinite()) break;
    Eigen::VectorXd r2;
    const Eigen::Vector4d trial = p + step;
    const double c2 = trial.allFinite() ? residuals(trial, r2, nullptr) : std::numeric_limits<double>::infinity();
    if (std::isfinite(c2) && c2 < cost) {
      const double gain = cost - c2;
      p = trial;
      cost = residuals(p, r, &J);
      mu = std::max(mu / 3.0, 1e-12);
      if (gain < 1e-14 * (1.0 + cost) && step.norm() < 1e-10) break;
    } else {
      mu *= 4.0;
      if (mu > 1e12) break;
    }
  }
  const double dof = n > 4 ? static_cast<double>(n - 4) : 1.0;
  CompositeParams out;
  out.A_bar = std::exp(p(0));
  out.lambda = std::exp(p(1));
  out.B = std::exp(p(2));
  out.gamma = std::exp(p(3));
  out.chi2_reduced = cost / dof;
  const Eigen::Matrix4d H = J.transpose() * J;
  Eigen::FullPivLU<Eigen::Matrix4d> lu(H);
  if (lu.isInvertible()) {
    const Eigen::Matrix4d cov = lu.inverse() * std::max(1.0, out.chi2_reduced);
    out.lambda_err = out.lambda * std::sqrt(std::max(0.0, cov(1, 1)));
    out.gamma_err = out.gamma * std::sqrt(std::max(0.0, cov(3, 3)));
  } else {
    out.lambda_err = out.gamma_err = std::numeric_limits<double>::infinity();
  }
  // canonical order: lambda is the faster component
  if (out.gamma > out.lambda) {
    std::swap(out.A_bar, out.B);
    std::swap(out.lambda, out.gamma);
    std::swap(out.lambda_err, out.gamma_err);
  }
  return out;
}

}  // namespace detail

/// Exponential decay rate of <M(t)> over the window where
/// M in [max(floor_factor * saturation, floor_min), upper]: weighted least
/// squares on log M, with a two-exponential fit attempted when the line's
/// r^2 falls below r2_threshold (or when forced). A curve that never drops
/// below 0.5 is flagged perturbative with Errc::no_fit_window.
inline DecayFit fit_decay(const quantum::EchoCurve& c, double saturation, const FitOptions& opt = {}) {
  const double bottom = std::max(opt.floor_factor * saturation, opt.floor_min);
  double m_min = 1.0;
  for (double m : c.mean_M) m_min = std::min(m_min, m);
  if (!(m_min < 0.5)) {
    throw Error(Errc::no_fit_window, "fit_decay: curve never decays below 0.5 (perturbative regime)");
  }
  const detail::Window w = detail::select_window(c, bottom, opt.upper);
  if (w.t.size() < 2) {
    throw Error(Errc::no_fit_window, "fit_decay: fewer than 2 points between the saturation floor and " +
                                         std::to_string(opt.upper));
  }
  std::vector<double> wt;
  if (w.weighted) {
    for (double s : w.sigma) wt.push_back(1.0 / (s * s));
  }
  const LineFit line = fit_line(w.t, w.logm, wt);

  DecayFit f;
  f.t_a = w.t.front();
  f.t_b = w.t.back();
  f.n_points = w.t.size();
  f.rate = -line.slope;
  f.rate_err = std::max(line.slope_err, std::numeric_limits<double>::epsilon() * std::abs(f.rate));
  f.r_squared = line.r_squared;
  f.single_rate = f.rate;
  f.single_rate_err = f.rate_err;

  const bool want = opt.model == ModelChoice::composite ||
                    (opt.model == ModelChoice::automatic && line.r_squared < opt.r2_threshold);
  if (!want) return f;
  std::vector<std::array<double, 2>> seeds;
  if (opt.rate_seeds) seeds.push_back(*opt.rate_seeds);
  seeds.push_back({2.0 * f.rate, 0.5 * f.rate});
  seeds.push_back({4.0 * f.rate, 0.8 * f.rate});
  std::optional<CompositeParams> best;
  for (const auto& s : seeds) {
    const auto cp = detail::fit_composite(w, s[0], s[1]);
    if (cp && (!best || cp->chi2_reduced < best->chi2_reduced)) best = cp;
  }
  if (!best) {
    if (opt.model == ModelChoice::composite) {
      throw Error(Errc::no_fit_window, "fit_decay: composite fit needs at least 5 points in the window");
    }
    return f;
  }
  // The slower component dominates the late window and is reported as the rate.
  f.model = FitModel::composite;
  f.composite = best;
  f.rate = best->gamma;
  f.rate_err = std::max(best->gamma_err, std::numeric_limits<double>::epsilon() * f.rate);
  KahanSum rss, tss, mean;
  for (double v : w.logm) mean += v;
  const double lm = mean.value() / static_cast<double>(w.logm.size());
  for (std::size_t i = 0; i < w.t.size(); ++i) {
    const double m = semiclassical::composite_echo_model(w.t[i], best->A_bar, best->lambda, best->B, 1.0 / best->gamma);
    rss += (std::log(m) - w.logm[i]) * (std::log(m) - w.logm[i]);
    tss += (w.logm[i] - lm) * (w.logm[i] - lm);
  }
  f.r_squared = tss.value() > 0.0 ? std::clamp(1.0 - rss.value() / tss.value(), 0.0, 1.0) : 1.0;
  return f;
}

}  // namespace lecho::analysis
