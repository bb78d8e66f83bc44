#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <string_view>

#include "lecho/core/error.hpp"

namespace lecho::noise {

/// Shape of a unit-normalized correlator C(x), C(0) = 1.
/// `static_limit` is the infinite-correlation limit (C == 1) and is always
/// paired with an infinite scale parameter.
enum class CorrelatorKind { gaussian, exponential, static_limit };

inline std::string_view to_string(CorrelatorKind k) {
  switch (k) {
    case CorrelatorKind::gaussian: return "gaussian";
    case CorrelatorKind::exponential: return "exponential";
    case CorrelatorKind::static_limit: return "static";
  }
  return "?";
}

inline CorrelatorKind correlator_kind_from_string(std::string_view s) {
  if (s == "gaussian") return CorrelatorKind::gaussian;
  if (s == "exponential") return CorrelatorKind::exponential;
  if (s == "static") return CorrelatorKind::static_limit;
  throw Error(Errc::unsupported_kind, "unknown correlator kind '" + std::string(s) + "'");
}

inline double correlator(CorrelatorKind kind, double x, double scale) {
  switch (kind) {
    case CorrelatorKind::gaussian: return std::exp(-(x * x) / (scale * scale));
    case CorrelatorKind::exponential: return std::exp(-std::abs(x) / scale);
    case CorrelatorKind::static_limit: return 1.0;
  }
  return 0.0;
}

/// Strength and separable correlator shape of a perturbation V(q, t):
///   <V(q,t) V(q',t')> = variance * C_S(|q-q'|) * C_T(|t-t'|).
struct PerturbationSpec {
  double variance = 0.0;
  double xi0 = 1.0;
  double tau0 = 1.0;
  CorrelatorKind spatial_kind = CorrelatorKind::gaussian;
  CorrelatorKind temporal_kind = CorrelatorKind::gaussian;
  int dimension = 1;

  static constexpr double infinite = std::numeric_limits<double>::infinity();

  bool spatially_static() const { return spatial_kind == CorrelatorKind::static_limit; }
  bool temporally_static() const { return temporal_kind == CorrelatorKind::static_limit; }

  double spatial_correlation(double r) const { return correlator(spatial_kind, r, xi0); }
  double temporal_correlation(double tau) const { return correlator(temporal_kind, tau, tau0); }

  /// hbar / sqrt(variance); infinite for a vanishing perturbation.
  double tau_v(double hbar) const { return variance > 0.0 ? hbar / std::sqrt(variance) : infinite; }

  void validate() const {
    if (!(variance >= 0.0) || !std::isfinite(variance)) {
      throw Error(Errc::invalid_argument, "perturbation variance must be finite and >= 0");
    }
    if (dimension != 1 && dimension != 2) {
      throw Error(Errc::invalid_argument, "perturbation dimension must be 1 or 2");
    }
    check_scale("xi0", spatial_kind, xi0);
    check_scale("tau0", temporal_kind, tau0);
  }

 private:
  static void check_scale(const char* name, CorrelatorKind kind, double value) {
    const bool is_static = kind == CorrelatorKind::static_limit;
    if (is_static && std::isfinite(value)) {
      throw Error(Errc::static_kind_mismatch,
                  std::string("static correlator kind requires ") + name + " = infinity, got a finite value");
    }
    if (!is_static && !(value > 0.0 && std::isfinite(value))) {
      throw Error(Errc::static_kind_mismatch,
                  std::string(name) + " must be finite and > 0 for a non-static correlator kind");
    }
  }
};

}  // namespace lecho::noise
