#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <string_view>

#include "lecho/core/error.hpp"
#include "lecho/noise/spec.hpp"

namespace lecho::semiclassical {

using noise::CorrelatorKind;
using noise::PerturbationSpec;

enum class Regime { perturbative, fgr, lyapunov, ambiguous };

inline std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::perturbative: return "perturbative";
    case Regime::fgr: return "fgr";
    case Regime::lyapunov: return "lyapunov";
    case Regime::ambiguous: return "ambiguous";
  }
  return "?";
}

inline constexpr double inf = std::numeric_limits<double>::infinity();

struct RatePrediction {
  double fgr_rate = 0.0;     ///< 1/tau~
  double tau_tilde_1 = inf;  ///< tau_V^2 / tau_xi (spatially dominated limit)
  double tau_tilde_2 = inf;  ///< tau_V^2 / tau0 (temporally dominated limit)
  double tau_v = inf;
  double tau_xi = inf;
  double lambda = std::numeric_limits<double>::quiet_NaN();
  double A = std::numeric_limits<double>::quiet_NaN();
  double A_bar = std::numeric_limits<double>::quiet_NaN();
  Regime regime = Regime::perturbative;
  bool approximate = false;  ///< exponential kinds: same harmonic structure, not the gaussian closed form

  double tau_tilde() const { return fgr_rate > 0.0 ? 1.0 / fgr_rate : inf; }
};

/// Regime of a prediction: lyapunov iff 1/tau~ > lambda, perturbative when
/// there is no perturbation at all.
inline Regime predicted_regime(double fgr_rate, double lambda) {
  if (!(fgr_rate > 0.0)) return Regime::perturbative;
  if (std::isnan(lambda)) return Regime::fgr;
  return fgr_rate > lambda ? Regime::lyapunov : Regime::fgr;
}

/// FGR decay rate 1/tau~ = tau_V^-2 / sqrt(tau0^-2 + tau_xi^-2) with
/// tau_xi = xi0 / v. A static kind contributes an infinite scale, so its
/// inverse drops out and the limit formulas tau_xi/tau_V^2 or tau0/tau_V^2
/// follow. Exponential/exponential uses tau_V^-2 / (tau0^-1 + tau_xi^-1),
/// which has the same min[tau0, tau_xi] limits.
inline RatePrediction predict_fgr_rate(const PerturbationSpec& spec, double v, double hbar_eff,
                                       double lambda = std::numeric_limits<double>::quiet_NaN()) {
  spec.validate();
  if (!(v > 0.0) || !std::isfinite(v)) throw Error(Errc::invalid_argument, "predict_fgr_rate: v must be > 0");
  if (!(hbar_eff > 0.0)) throw Error(Errc::invalid_argument, "predict_fgr_rate: hbar_eff must be > 0");
  if (spec.spatially_static() && spec.temporally_static()) {
    throw Error(Errc::unsupported_kind, "predict_fgr_rate: static/static perturbation has no finite correlation time");
  }
  const auto family = [](CorrelatorKind k) { return k == CorrelatorKind::static_limit ? 0 : k == CorrelatorKind::gaussian ? 1 : 2; };
  const int fs = family(spec.spatial_kind);
  const int ft = family(spec.temporal_kind);
  if (fs != 0 && ft != 0 && fs != ft) {
    throw Error(Errc::unsupported_kind, "predict_fgr_rate: mixed gaussian/exponential kinds have no closed form");
  }

  RatePrediction r;
  r.tau_v = spec.tau_v(hbar_eff);
  r.tau_xi = spec.xi0 / v;
  r.lambda = lambda;
  if (spec.variance == 0.0) {
    r.fgr_rate = 0.0;
    r.regime = Regime::perturbative;
    return r;
  }
  const double tv2 = r.tau_v * r.tau_v;
  r.tau_tilde_1 = tv2 / r.tau_xi;
  r.tau_tilde_2 = tv2 / spec.tau0;
  const double inv0 = 1.0 / spec.tau0;  // zero for a static kind
  const double invx = 1.0 / r.tau_xi;
  if (fs == 2 || ft == 2) {
    r.fgr_rate = 1.0 / (tv2 * (inv0 + invx));
    r.approximate = true;
  } else {
    r.fgr_rate = 1.0 / (tv2 * std::sqrt(inv0 * inv0 + invx * invx));
  }
  r.regime = predicted_regime(r.fgr_rate, lambda);
  return r;
}

enum class PrefactorForm { closed, temporal, spatial };

struct LyapunovPrefactor {
  double A = 0.0;
  double A_bar = inf;
};

/// Width parameter A of the diagonal-pair phase factor exp[-A (r - r')^2 / hbar^2]
/// and the Lyapunov-term prefactor A_bar = [m sigma / (sqrt(A) t)]^d.
///
///  closed:   (hbar^2 / (v^2 lambda tau~^3)) ((1 - e^{-2 lambda t}) / sqrt(pi))
///            tau_V^4 ((d - 1)/tau_xi^4 + d/(tau0^2 tau_xi^2)), gaussian kinds
///  temporal: variance tau0 (1 - e^{-2 lambda t}) / (2 lambda)
///  spatial:  variance (1 - e^{-2 lambda t}) / (2 lambda v) * I, with
///            I = int dq [(1 - d)/q C_S' - C_S''] = 2 sqrt(pi) (d - 1) / xi0 for gaussian C_S
/// t may be +infinity (asymptotic A; A_bar is then 0).
inline LyapunovPrefactor predict_lyapunov_prefactor(const PerturbationSpec& spec, double lambda, double v,
                                                    double hbar_eff, double t, double mass, double sigma,
                                                    PrefactorForm form = PrefactorForm::closed) {
  spec.validate();
  if (!(lambda > 0.0)) throw Error(Errc::invalid_argument, "predict_lyapunov_prefactor: lambda must be > 0");
  if (!(t > 0.0)) throw Error(Errc::invalid_argument, "predict_lyapunov_prefactor: t must be > 0");
  if (!(v > 0.0)) throw Error(Errc::invalid_argument, "predict_lyapunov_prefactor: v must be > 0");
  const double d = spec.dimension;
  const double growth = -std::expm1(-2.0 * lambda * t);  // 1 - e^{-2 lambda t}
  LyapunovPrefactor out;
  switch (form) {
    case PrefactorForm::closed: {
      const bool gauss_s = spec.spatial_kind == CorrelatorKind::gaussian;
      const bool gauss_t = spec.temporal_kind != CorrelatorKind::exponential;
      if (!gauss_s || !gauss_t) {
        throw Error(Errc::unsupported_kind, "predict_lyapunov_prefactor: closed form needs gaussian correlators");
      }
      const RatePrediction r = predict_fgr_rate(spec, v, hbar_eff);
      if (spec.variance == 0.0) break;
      const double tt = r.tau_tilde();
      const double tv4 = std::pow(r.tau_v, 4);
      const double tx2 = r.tau_xi * r.tau_xi;
      const double bracket = (d - 1.0) / (tx2 * tx2) + d / (spec.tau0 * spec.tau0 * tx2);
      out.A = hbar_eff * hbar_eff / (v * v * lambda * tt * tt * tt) * (growth / std::sqrt(std::numbers::pi)) * tv4 *
              bracket;
      break;
    }
    case PrefactorForm::temporal:
      if (spec.temporally_static()) {
        throw Error(Errc::unsupported_kind, "predict_lyapunov_prefactor: temporal form needs a finite tau0");
      }
      out.A = spec.variance * spec.tau0 * growth / (2.0 * lambda);
      break;
    case PrefactorForm::spatial: {
      if (spec.spatial_kind != CorrelatorKind::gaussian) {
        throw Error(Errc::unsupported_kind, "predict_lyapunov_prefactor: spatial form needs a gaussian C_S");
      }
      const double integral = 2.0 * std::sqrt(std::numbers::pi) * (d - 1.0) / spec.xi0;
      out.A = spec.variance * growth / (2.0 * lambda * v) * integral;
      break;
    }
  }
  out.A_bar = std::isinf(t) ? 0.0 : std::pow(mass * sigma / (std::sqrt(out.A) * t), d);
  return out;
}

/// M(t) = A_bar e^{-lambda t} + B e^{-t/tau~}.
inline double composite_echo_model(double t, double A_bar, double lambda, double B, double tau_tilde) {
  return A_bar * std::exp(-lambda * t) + B * std::exp(-t / tau_tilde);
}

}  // namespace lecho::semiclassical
