#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lecho/classical/backend.hpp"
#include "lecho/core/error.hpp"
#include "lecho/core/rng.hpp"
#include "lecho/core/stats.hpp"
#include "lecho/noise/field.hpp"
#include "lecho/semiclassical/predict.hpp"

namespace lecho::semiclassical {

/// Raised when a pair separates beyond xi0/4 before the requested time.
class LinearizationError : public Error {
 public:
  LinearizationError(double max_valid_time, const std::string& what)
      : Error(Errc::linearization_invalid, what), max_valid_time_(max_valid_time) {}
  double max_valid_time() const noexcept { return max_valid_time_; }

 private:
  double max_valid_time_;
};

struct PairVarianceResult {
  double empirical = 0.0;  ///< <(Delta S_s - Delta S_s')^2>
  double empirical_err = 0.0;
  double mean_final_separation2 = 0.0;
  double A = 0.0;
  double predicted = 0.0;  ///< 2 A <|r - r'|^2> with the final separation
  double ratio = 0.0;
  std::size_t n_pairs = 0;
  double max_separation = 0.0;
};

/// Nearby trajectory pairs launched delta_r apart (random direction, same
/// momentum), both accumulating actions in the same realization. The second
/// moment of the action difference is compared with 2 A |r - r'|^2 at the
/// final separation, A from predict_lyapunov_prefactor at time t.
inline PairVarianceResult diagonal_pair_variance(const classical::Backend& backend,
                                                 std::span<const noise::NoiseField> fields, double delta_r, double t,
                                                 std::size_t pairs_per_field, std::uint64_t seed, double lambda,
                                                 double v, PrefactorForm form = PrefactorForm::closed) {
  if (fields.empty() || pairs_per_field == 0) {
    throw Error(Errc::insufficient_ensemble, "diagonal_pair_variance: no fields or pairs");
  }
  if (!(t > 0.0) || !(delta_r >= 0.0)) throw Error(Errc::invalid_argument, "diagonal_pair_variance: bad t or delta_r");
  const auto& spec = fields.front().spec();
  const double dt = classical::step_of(backend);
  const auto n_steps = static_cast<std::size_t>(std::llround(t / dt));
  const bool torus = std::holds_alternative<classical::StandardMap>(backend);
  const double limit = spec.xi0 / 4.0;
  auto separation = [&](const classical::PhaseState& a, const classical::PhaseState& b) {
    Point d = a.q - b.q;
    if (torus) d = {wrap_centered(d[0], two_pi), 0.0};
    return norm(d);
  };

  PairVarianceResult out;
  std::vector<double> sum_sq(fields.size(), 0.0), sum_sep2(fields.size(), 0.0);
  double first_violation = std::numeric_limits<double>::infinity();
  for (std::size_t f = 0; f < fields.size(); ++f) {
    const auto& field = fields[f];
    if (field.duration() + 1e-9 * std::max(1.0, t) < static_cast<double>(n_steps) * dt) {
      throw Error(Errc::duration_mismatch, "diagonal_pair_variance: field is shorter than t");
    }
    KahanSum sq, s2;
    for (std::size_t k = 0; k < pairs_per_field; ++k) {
      const std::uint64_t id = f * pairs_per_field + k;
      classical::PhaseState a = classical::random_state(backend, seed, id, StreamTag::pair);
      RandomStream rng(seed_for(seed, id, StreamTag::orbit));
      const double th = rng.uniform(0.0, two_pi);
      classical::PhaseState b = a;
      b.q = b.q + (torus ? Point{delta_r, 0.0} : Point{delta_r * std::cos(th), delta_r * std::sin(th)});
      double va = field.sample(a.q, 0.0), vb = field.sample(b.q, 0.0);
      double diff = 0.0;
      for (std::size_t n = 1; n <= n_steps; ++n) {
        classical::step(backend, a);
        classical::step(backend, b);
        const double tn = std::min(static_cast<double>(n) * dt, field.duration());
        const double na = field.sample(a.q, tn), nb = field.sample(b.q, tn);
        diff += 0.5 * dt * ((va + na) - (vb + nb));
        va = na;
        vb = nb;
        const double sep = separation(a, b);
        out.max_separation = std::max(out.max_separation, sep);
        if (sep > limit) first_violation = std::min(first_violation, static_cast<double>(n - 1) * dt);
      }
      const double sep = separation(a, b);
      sq += diff * diff;
      s2 += sep * sep;
    }
    sum_sq[f] = sq.value();
    sum_sep2[f] = s2.value();
  }
  if (std::isfinite(first_violation)) {
    throw LinearizationError(first_violation, "diagonal_pair_variance: separation exceeds xi0/4 after t = " +
                                                  std::to_string(first_violation));
  }
  const double per = static_cast<double>(pairs_per_field);
  const std::size_t ng = fields.size();
  double tot_sq = 0, tot_sep = 0;
  for (std::size_t f = 0; f < ng; ++f) {
    tot_sq += sum_sq[f];
    tot_sep += sum_sep2[f];
  }
  const double n = per * static_cast<double>(ng);
  out.n_pairs = static_cast<std::size_t>(n);
  const MeanErr e = jackknife(ng, [&](long g) {
    if (g < 0) return tot_sq / n;
    return (tot_sq - sum_sq[static_cast<std::size_t>(g)]) / (n - per);
  });
  out.empirical = e.mean;
  out.empirical_err = e.err;
  out.mean_final_separation2 = tot_sep / n;
  if (spec.variance > 0.0 && delta_r > 0.0) {
    out.A = predict_lyapunov_prefactor(spec, lambda, v, 1.0, t, 1.0, 1.0, form).A;
  }
  out.predicted = 2.0 * out.A * out.mean_final_separation2;
  out.ratio = out.predicted > 0.0 ? out.empirical / out.predicted : std::numeric_limits<double>::quiet_NaN();
  return out;
}

}  // namespace lecho::semiclassical
