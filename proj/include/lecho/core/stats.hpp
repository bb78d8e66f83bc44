#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <vector>

namespace lecho {

/// Compensated (Neumaier) summation; keeps ensemble reductions stable to the
/// last bit regardless of magnitude ordering.
class KahanSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  KahanSum& operator+=(double x) {
    add(x);
    return *this;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

struct MeanErr {
  double mean = 0.0;
  double err = 0.0;
};

inline MeanErr mean_stderr(std::span<const double> xs) {
  MeanErr out;
  if (xs.empty()) return out;
  KahanSum s;
  for (double x : xs) s += x;
  out.mean = s.value() / static_cast<double>(xs.size());
  if (xs.size() < 2) return out;
  KahanSum ss;
  for (double x : xs) ss += (x - out.mean) * (x - out.mean);
  const double n = static_cast<double>(xs.size());
  out.err = std::sqrt(ss.value() / (n - 1.0) / n);
  return out;
}

/// Delete-one-group jackknife. `estimate(g)` must return the statistic with
/// group g left out; `estimate(-1)` the full-sample statistic.
inline MeanErr jackknife(std::size_t n_groups, const std::function<double(long)>& estimate) {
  MeanErr out;
  out.mean = estimate(-1);
  if (n_groups < 2) return out;
  std::vector<double> loo(n_groups);
  KahanSum s;
  for (std::size_t g = 0; g < n_groups; ++g) {
    loo[g] = estimate(static_cast<long>(g));
    s += loo[g];
  }
  const double n = static_cast<double>(n_groups);
  const double bar = s.value() / n;
  KahanSum ss;
  for (double v : loo) ss += (v - bar) * (v - bar);
  out.err = std::sqrt((n - 1.0) / n * ss.value());
  return out;
}

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_err = 0.0;
  double intercept_err = 0.0;
  double r_squared = 0.0;
  double correlation = 0.0;
  double chi2_reduced = 0.0;
};

/// Weighted least-squares line y = intercept + slope*x. Empty weights mean
/// unit weights, in which case errors come from the residual scatter; with
/// weights = 1/sigma^2 the errors are scaled by sqrt(max(1, chi2_reduced)).
inline LineFit fit_line(std::span<const double> x, std::span<const double> y,
                        std::span<const double> w = {}) {
  LineFit f;
  const std::size_t n = x.size();
  if (n < 2) return f;
  const bool weighted = !w.empty();
  KahanSum sw, sx, sy;
  for (std::size_t i = 0; i < n; ++i) {
    const double wi = weighted ? w[i] : 1.0;
    sw += wi;
    sx += wi * x[i];
    sy += wi * y[i];
  }
  const double xm = sx.value() / sw.value();
  const double ym = sy.value() / sw.value();
  KahanSum sxx, sxy, syy;
  for (std::size_t i = 0; i < n; ++i) {
    const double wi = weighted ? w[i] : 1.0;
    sxx += wi * (x[i] - xm) * (x[i] - xm);
    sxy += wi * (x[i] - xm) * (y[i] - ym);
    syy += wi * (y[i] - ym) * (y[i] - ym);
  }
  if (sxx.value() <= 0.0) return f;
  f.slope = sxy.value() / sxx.value();
  f.intercept = ym - f.slope * xm;
  KahanSum rss;
  for (std::size_t i = 0; i < n; ++i) {
    const double wi = weighted ? w[i] : 1.0;
    const double r = y[i] - (f.intercept + f.slope * x[i]);
    rss += wi * r * r;
  }
  const double dof = n > 2 ? static_cast<double>(n - 2) : 1.0;
  f.chi2_reduced = rss.value() / dof;
  f.r_squared = syy.value() > 0.0 ? 1.0 - rss.value() / syy.value() : 1.0;
  f.r_squared = std::max(0.0, std::min(1.0, f.r_squared));
  f.correlation = (syy.value() > 0.0) ? sxy.value() / std::sqrt(sxx.value() * syy.value()) : 1.0;
  const double scale = weighted ? std::max(1.0, f.chi2_reduced) : f.chi2_reduced;
  f.slope_err = std::sqrt(scale / sxx.value());
  f.intercept_err = std::sqrt(scale * (1.0 / sw.value() + xm * xm / sxx.value()));
  return f;
}

}  // namespace lecho
