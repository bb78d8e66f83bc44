#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <vector>

#include "lecho/core/error.hpp"
#include "lecho/core/fft.hpp"
#include "lecho/noise/field.hpp"
#include "lecho/quantum/wavefunction.hpp"

namespace lecho::quantum {

/// Smallest even sub-step count M with 1/M <= tau0/4; 1 for a field frozen in
/// time (the perturbation then commutes with itself across the period).
inline int default_substeps(const noise::PerturbationSpec& spec) {
  if (spec.temporally_static() || spec.variance == 0.0) return 1;
  const int m = static_cast<int>(std::ceil(4.0 / spec.tau0 - 1e-9));
  return std::max(2, m + (m % 2));
}

/// Split-operator Floquet map of the quantized kicked rotor, optionally with
/// the noise phase exp(-i V(q, t) h / hbar).
///
/// Period n covers [n, n + 1] and is cut into M sub-steps of length h = 1/M,
/// each free(h/2) V(t_m) free(h/2) with t_m at the sub-step midpoint; the kick
/// exp(-i K cos q / hbar) sits at mid-period. M = 1 is the plain Strang kick
/// free(1/2) [kick V(n + 1/2)] free(1/2).
class KickedPropagator {
 public:
  KickedPropagator(std::size_t n, double K, const noise::NoiseField* field = nullptr, int substeps = 1)
      : n_(n), K_(K), field_(field), m_(substeps), plan_({static_cast<int>(n)}) {
    if (!is_power_of_two(n)) throw Error(Errc::invalid_argument, "KickedPropagator: N must be a power of two");
    if (substeps < 1 || (substeps > 1 && substeps % 2 != 0)) {
      throw Error(Errc::invalid_argument, "KickedPropagator: substeps must be 1 or even");
    }
    hbar_ = torus_hbar(n);
    if (field_) {
      if (field_->dimension() != 1) throw Error(Errc::invalid_argument, "KickedPropagator: field must be 1-D");
      if (std::abs(field_->extent() - two_pi) > 1e-12) {
        throw Error(Errc::invalid_argument, "KickedPropagator: field extent must be 2pi");
      }
      std::vector<double> q(n);
      for (std::size_t j = 0; j < n; ++j) q[j] = two_pi * static_cast<double>(j) / static_cast<double>(n);
      stencil_ = field_->stencil(q);
      row_.resize(n);
    }
    const double h = 1.0 / m_;
    free_half_ = free_phase(0.5 * h);
    free_full_ = free_phase(h);
    free_kick_ = free_phase(0.5);
    kick_.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      const double q = two_pi * static_cast<double>(j) / static_cast<double>(n);
      kick_[j] = std::polar(1.0, -K_ * std::cos(q) / hbar_);
    }
  }

  std::size_t size() const { return n_; }
  double hbar() const { return hbar_; }
  int substeps() const { return m_; }
  bool perturbed() const { return field_ != nullptr; }

  /// Time covered by the field (infinite when unperturbed).
  double max_time() const { return field_ ? field_->duration() : std::numeric_limits<double>::infinity(); }

  /// Advance psi over period `period` (time period -> period + 1).
  void forward(WaveFunction& psi, std::size_t period) const {
    check(psi, period);
    auto& a = psi.amplitudes;
    if (!field_) {
      apply_free(a, free_kick_);
      multiply(a, kick_);
      apply_free(a, free_kick_);
      return;
    }
    apply_free(a, free_half_);
    for (int m = 0; m < m_; ++m) {
      apply_noise(a, period, m, false);
      if (m_ == 1) multiply(a, kick_);
      if (m == m_ - 1) {
        apply_free(a, free_half_);
      } else if (m == m_ / 2 - 1) {
        apply_free(a, free_half_);
        multiply(a, kick_);
        apply_free(a, free_half_);
      } else {
        apply_free(a, free_full_);
      }
    }
  }

  /// Exact inverse of forward(psi, period): time period + 1 -> period.
  void backward(WaveFunction& psi, std::size_t period) const {
    check(psi, period);
    auto& a = psi.amplitudes;
    if (!field_) {
      apply_free(a, free_kick_, true);
      multiply(a, kick_, true);
      apply_free(a, free_kick_, true);
      return;
    }
    apply_free(a, free_half_, true);
    for (int m = m_ - 1; m >= 0; --m) {
      if (m_ == 1) multiply(a, kick_, true);
      apply_noise(a, period, m, true);
      if (m == 0) {
        apply_free(a, free_half_, true);
      } else if (m == m_ / 2) {
        apply_free(a, free_half_, true);
        multiply(a, kick_, true);
        apply_free(a, free_half_, true);
      } else {
        apply_free(a, free_full_, true);
      }
    }
  }

 private:
  std::vector<cplx> free_phase(double tau) const {
    std::vector<cplx> ph(n_);
    const double inv_n = 1.0 / static_cast<double>(n_);
    for (std::size_t k = 0; k < n_; ++k) {
      const double p = momentum_of_bin(k, n_);
      ph[k] = inv_n * std::polar(1.0, -p * p * tau / (2.0 * hbar_));
    }
    return ph;
  }

  void check(const WaveFunction& psi, std::size_t period) const {
    if (psi.size() != n_) throw Error(Errc::invalid_argument, "KickedPropagator: wave function size mismatch");
    if (field_ && static_cast<double>(period + 1) > field_->duration() + 1e-9) {
      throw Error(Errc::duration_mismatch, "KickedPropagator: field is shorter than the requested kicks");
    }
  }

  static void multiply(std::vector<cplx>& a, const std::vector<cplx>& ph, bool conj = false) {
    if (conj) {
      for (std::size_t j = 0; j < a.size(); ++j) a[j] *= std::conj(ph[j]);
    } else {
      for (std::size_t j = 0; j < a.size(); ++j) a[j] *= ph[j];
    }
  }

  /// Momentum-space phases carry the 1/N of the inverse transform, so the
  /// inverse step is the same product with the conjugate phase.
  void apply_free(std::vector<cplx>& a, const std::vector<cplx>& ph, bool conj = false) const {
    plan_.forward(a);
    multiply(a, ph, conj);
    plan_.backward(a);
  }

  void apply_noise(std::vector<cplx>& a, std::size_t period, int m, bool conj) const {
    const double h = 1.0 / m_;
    const double t = static_cast<double>(period) + (m + 0.5) * h;
    field_->sample_row(stencil_, t, row_);
    const double s = (conj ? 1.0 : -1.0) * h / hbar_;
    for (std::size_t j = 0; j < a.size(); ++j) a[j] *= std::polar(1.0, s * row_[j]);
  }

  std::size_t n_;
  double K_;
  const noise::NoiseField* field_;
  int m_;
  double hbar_ = 0.0;
  FftPlan plan_;
  noise::SpatialStencil stencil_;
  mutable std::vector<double> row_;
  std::vector<cplx> free_half_, free_full_, free_kick_, kick_;
};

/// psi after n_kicks periods, keeping every intermediate state when `history`
/// is non-null.
inline WaveFunction propagate(const KickedPropagator& u, WaveFunction psi, std::size_t n_kicks,
                              std::vector<WaveFunction>* history = nullptr) {
  if (history) history->push_back(psi);
  for (std::size_t n = 0; n < n_kicks; ++n) {
    u.forward(psi, n);
    if (history) history->push_back(psi);
  }
  return psi;
}

}  // namespace lecho::quantum
