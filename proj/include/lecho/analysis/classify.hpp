#pragma once

#include <cmath>

#include "lecho/analysis/fit.hpp"
#include "lecho/semiclassical/predict.hpp"

namespace lecho::analysis {

using semiclassical::Regime;

/// Nearest-rate rule: lyapunov when the fitted rate is closer to lambda than
/// to 1/tau~ and 1/tau~ > lambda; fgr in the mirrored case; ambiguous when the
/// two distances differ by less than 2 rate_err or the nearest rate is not
/// the smaller prediction.
inline Regime classify_regime(double rate, double rate_err, double lambda, double fgr_rate) {
  const double dl = std::abs(rate - lambda);
  const double df = std::abs(rate - fgr_rate);
  if (std::abs(dl - df) < 2.0 * rate_err) return Regime::ambiguous;
  if (dl < df && fgr_rate > lambda) return Regime::lyapunov;
  if (df < dl && fgr_rate < lambda) return Regime::fgr;
  return Regime::ambiguous;
}

inline Regime classify_regime(const DecayFit& fit, const semiclassical::RatePrediction& p) {
  return classify_regime(fit.rate, fit.rate_err, p.lambda, p.fgr_rate);
}

}  // namespace lecho::analysis
