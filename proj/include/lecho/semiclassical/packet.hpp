#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "lecho/core/error.hpp"
#include "lecho/core/point.hpp"

namespace lecho::semiclassical {

/// Gaussian wave packet: dispersion sigma, center r0, mean momentum p0.
struct WavePacketSpec {
  double sigma = 0.1;
  Point r0{0.0, 0.0};
  Point p0{0.0, 0.0};
  double hbar_eff = 1.0;

  double de_broglie() const {
    const double p = norm(p0);
    return p > 0.0 ? hbar_eff / p : std::numeric_limits<double>::infinity();
  }

  /// Violations of xi0 >> sigma >> lambda_dB, as human-readable warnings
  /// ("much larger" taken as a factor 2).
  std::vector<std::string> localization_warnings(double xi0) const {
    std::vector<std::string> w;
    if (!(sigma < 0.5 * xi0)) w.push_back("packet width is not small compared to the correlation length xi0");
    if (!(de_broglie() < 0.5 * sigma)) w.push_back("de Broglie wavelength is not small compared to the packet width");
    return w;
  }
};

}  // namespace lecho::semiclassical
