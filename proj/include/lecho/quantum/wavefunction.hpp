#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "lecho/core/error.hpp"
#include "lecho/core/fft.hpp"
#include "lecho/core/point.hpp"
#include "lecho/semiclassical/packet.hpp"

namespace lecho::quantum {

using cplx = std::complex<double>;

/// Torus quantization: N grid points on [0, 2pi) and hbar_eff = 2pi / N.
inline double torus_hbar(std::size_t n) { return two_pi / static_cast<double>(n); }

inline bool is_power_of_two(std::size_t n) { return n >= 2 && (n & (n - 1)) == 0; }

/// Momentum of FFT bin k: hbar * k with k folded into [-N/2, N/2).
inline double momentum_of_bin(std::size_t k, std::size_t n) {
  const auto kk = static_cast<long long>(k);
  const auto nn = static_cast<long long>(n);
  return torus_hbar(n) * static_cast<double>(kk < nn / 2 ? kk : kk - nn);
}

/// Position-space amplitudes on q_j = 2pi j / N, normalized as sum |psi_j|^2 = 1.
struct WaveFunction {
  std::vector<cplx> amplitudes;
  double hbar_eff = 0.0;

  std::size_t size() const { return amplitudes.size(); }
  double position(std::size_t j) const { return two_pi * static_cast<double>(j) / static_cast<double>(size()); }

  double norm2() const {
    double s = 0.0;
    for (const cplx& a : amplitudes) s += a.real() * a.real() + a.imag() * a.imag();
    return s;
  }

  /// Circular mean position in [0, 2pi).
  double mean_position() const {
    cplx z{0.0, 0.0};
    for (std::size_t j = 0; j < size(); ++j) z += std::norm(amplitudes[j]) * std::polar(1.0, position(j));
    return wrap_periodic(std::arg(z), two_pi);
  }

  double mean_momentum() const {
    std::vector<cplx> phi = amplitudes;
    FftPlan({static_cast<int>(size())}).forward(phi);
    double s = 0.0, n = 0.0;
    for (std::size_t k = 0; k < size(); ++k) {
      const double w = std::norm(phi[k]);
      s += w * momentum_of_bin(k, size());
      n += w;
    }
    return s / n;
  }
};

/// <a|b> and the fidelity |<a|b>|^2 / (|a|^2 |b|^2). Both norms use the same
/// arithmetic as the overlap, so identical states give exactly 1.
inline cplx overlap(std::span<const cplx> a, std::span<const cplx> b) {
  double re = 0.0, im = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    re += a[j].real() * b[j].real() + a[j].imag() * b[j].imag();
    im += a[j].real() * b[j].imag() - a[j].imag() * b[j].real();
  }
  return {re, im};
}

inline double fidelity(std::span<const cplx> a, std::span<const cplx> b) {
  if (a.size() != b.size()) throw Error(Errc::invalid_argument, "fidelity: size mismatch");
  const cplx o = overlap(a, b);
  const double na = overlap(a, a).real(), nb = overlap(b, b).real();
  const double f = (o.real() * o.real() + o.imag() * o.imag()) / (na * nb);
  return std::min(1.0, f);
}

/// Periodized Gaussian exp(-(q - r0)^2 / 4 sigma^2 + i p0 q / hbar) on the
/// torus (images m = -3..3). p0 is rounded to the momentum grid hbar * k so the
/// state is periodic; spec.hbar_eff is ignored in favour of 2pi / N.
inline WaveFunction init_gaussian_packet(const semiclassical::WavePacketSpec& spec, std::size_t n) {
  if (!is_power_of_two(n)) throw Error(Errc::invalid_argument, "init_gaussian_packet: N must be a power of two");
  const double h = two_pi / static_cast<double>(n);
  if (!(spec.sigma >= 2.0 * h) || !(spec.sigma <= two_pi / 8.0)) {
    throw Error(Errc::unresolvable_packet,
                "init_gaussian_packet: sigma must lie in [2 grid spacings, L/8] = [" + std::to_string(2.0 * h) + ", " +
                    std::to_string(two_pi / 8.0) + "]");
  }
  WaveFunction psi;
  psi.hbar_eff = h;
  psi.amplitudes.resize(n);
  const double k0 = std::round(spec.p0[0] / h);
  const double r0 = wrap_periodic(spec.r0[0], two_pi);
  const double s4 = 4.0 * spec.sigma * spec.sigma;
  for (std::size_t j = 0; j < n; ++j) {
    const double q = psi.position(j);
    double env = 0.0;
    for (int m = -3; m <= 3; ++m) {
      const double d = q - r0 + two_pi * m;
      env += std::exp(-d * d / s4);
    }
    psi.amplitudes[j] = env * std::polar(1.0, k0 * q);
  }
  const double scale = 1.0 / std::sqrt(psi.norm2());
  for (cplx& a : psi.amplitudes) a *= scale;
  return psi;
}

}  // namespace lecho::quantum
