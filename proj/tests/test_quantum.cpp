#include <catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "lecho/core/stats.hpp"
#include "lecho/quantum/echo.hpp"
#include "lecho/quantum/propagate.hpp"
#include "lecho/quantum/wavefunction.hpp"
#include "oracles/kicked_oracle.hpp"

using namespace lecho;
using namespace lecho::quantum;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

semiclassical::WavePacketSpec packet(double sigma, double r0, double p0) {
  semiclassical::WavePacketSpec p;
  p.sigma = sigma;
  p.r0 = {r0, 0.0};
  p.p0 = {p0, 0.0};
  return p;
}

noise::PerturbationSpec spec1d(double variance, double xi0, double tau0) {
  noise::PerturbationSpec s;
  s.variance = variance;
  s.xi0 = xi0;
  s.tau0 = tau0;
  s.dimension = 1;
  return s;
}

/// Variance giving tau0 / tau_V^2 = rate per kick on an N-point torus.
double variance_for(double rate, double tau0, std::size_t n) {
  const double h = torus_hbar(n);
  return rate * h * h / tau0;
}

noise::NoiseField shifted(const noise::NoiseField& f, double c) {
  std::vector<double> v(f.values().begin(), f.values().end());
  for (double& x : v) x += c;
  return noise::NoiseField(f.spec(), f.layout(), std::move(v), f.seed(), f.realization_index());
}

std::vector<double> momentum_distribution(const WaveFunction& psi) {
  std::vector<cplx> phi = psi.amplitudes;
  FftPlan({static_cast<int>(psi.size())}).forward(phi);
  std::vector<double> w(phi.size());
  for (std::size_t k = 0; k < phi.size(); ++k) w[k] = std::norm(phi[k]) / static_cast<double>(phi.size());
  return w;
}

/// Least-squares decay rate of log M over M in [lo, hi].
double log_slope_rate(const EchoCurve& c, double lo, double hi) {
  std::vector<double> x, y;
  for (std::size_t k = 1; k < c.size(); ++k) {
    if (c.mean_M[k] >= lo && c.mean_M[k] <= hi) {
      x.push_back(c.times[k]);
      y.push_back(std::log(c.mean_M[k]));
    }
  }
  REQUIRE(x.size() >= 3);
  return -fit_line(x, y).slope;
}

}  // namespace

TEST_CASE("packet is normalized, centered and carries its momentum") {
  for (double r0 : {std::numbers::pi, 0.05, 6.2}) {
    const auto psi = init_gaussian_packet(packet(0.2, r0, 1.3), 1024);
    CHECK_THAT(psi.norm2(), WithinAbs(1.0, 1e-12));
    CHECK(std::abs(wrap_centered(psi.mean_position() - r0, two_pi)) < 0.2 / 100.0);
    CHECK(std::abs(psi.mean_momentum() - 1.3) <= psi.hbar_eff);
    CHECK_THAT(psi.hbar_eff, WithinRel(two_pi / 1024.0, 1e-15));
  }
}

TEST_CASE("packet preconditions") {
  const double h = two_pi / 256.0;
  try {
    init_gaussian_packet(packet(1.9 * h, 1.0, 0.0), 256);
    FAIL("expected unresolvable packet");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::unresolvable_packet);
  }
  CHECK_THROWS_AS(init_gaussian_packet(packet(two_pi / 7.9, 1.0, 0.0), 256), Error);
  CHECK_NOTHROW(init_gaussian_packet(packet(2.0 * h, 1.0, 0.0), 256));
  CHECK_THROWS_AS(init_gaussian_packet(packet(0.2, 1.0, 0.0), 1000), Error);
}

TEST_CASE("free evolution keeps the momentum distribution") {
  const auto psi0 = init_gaussian_packet(packet(0.3, 2.0, 0.8), 256);
  const KickedPropagator u(256, 0.0);
  const auto w0 = momentum_distribution(psi0);
  const auto psi = propagate(u, psi0, 50);
  const auto w = momentum_distribution(psi);
  for (std::size_t k = 0; k < w.size(); ++k) CHECK_THAT(w[k], WithinAbs(w0[k], 1e-13));
}

TEST_CASE("one period matches the operator sequence built by hand") {
  const std::size_t n = 64;
  const auto spec = spec1d(1e-3, 1.0, 0.5);
  const auto field = noise::make_field(spec, {two_pi, 64, 0.125}, 3.0, 11, 0);
  const auto psi0 = init_gaussian_packet(packet(0.4, 2.0, 0.5), n);
  auto V = [&](double q, double t) { return field.sample({q, 0.0}, t); };
  for (int M : {1, 2, 4}) {
    const KickedPropagator u(n, 3.0, &field, M);
    WaveFunction psi = psi0;
    oracle::cvec ref = psi0.amplitudes;
    for (std::size_t p = 0; p < 3; ++p) {
      u.forward(psi, p);
      oracle::naive_period(ref, 3.0, M, p, V);
    }
    for (std::size_t j = 0; j < n; ++j) CHECK(std::abs(psi.amplitudes[j] - ref[j]) < 1e-11);
  }
}

TEST_CASE("norm is conserved at every kick") {
  const std::size_t n = 256;
  const auto spec = spec1d(variance_for(0.5, 0.5, n), 1.0, 0.5);
  const auto field = noise::make_field(spec, {two_pi, 64, 0.125}, 1000.0, 3, 0);
  const KickedPropagator u(n, 10.0, &field, 2);
  WaveFunction psi = init_gaussian_packet(packet(0.2, 1.0, 0.0), n);
  double worst = 0.0;
  for (std::size_t k = 0; k < 1000; ++k) {
    u.forward(psi, k);
    worst = std::max(worst, std::abs(psi.norm2() - 1.0));
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("backward undoes forward") {
  const std::size_t n = 256;
  const auto field = noise::make_field(spec1d(variance_for(0.5, 0.5, n), 1.0, 0.5), {two_pi, 64, 0.125}, 20.0, 4, 0);
  const auto psi0 = init_gaussian_packet(packet(0.2, 1.0, 0.5), n);
  for (int M : {1, 4}) {
    const KickedPropagator u(n, 10.0, &field, M);
    WaveFunction psi = psi0;
    for (std::size_t k = 0; k < 20; ++k) u.forward(psi, k);
    for (std::size_t k = 20; k-- > 0;) u.backward(psi, k);
    for (std::size_t j = 0; j < n; ++j) CHECK(std::abs(psi.amplitudes[j] - psi0.amplitudes[j]) < 1e-12);
  }
}

TEST_CASE("field must cover the requested kicks") {
  const auto field = noise::make_field(spec1d(1e-4, 1.0, 0.5), {two_pi, 64, 0.125}, 5.0, 4, 0);
  const auto psi0 = init_gaussian_packet(packet(0.2, 1.0, 0.5), 128);
  try {
    loschmidt_echo(psi0, 10.0, &field, 6, 2);
    FAIL("expected duration mismatch");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::duration_mismatch);
  }
  const KickedPropagator u(128, 10.0, &field, 2);
  WaveFunction psi = psi0;
  CHECK_THROWS_AS(u.forward(psi, 5), Error);
  CHECK_THROWS_AS(KickedPropagator(128, 10.0, &field, 3), Error);
}

TEST_CASE("echo: zero field and t = 0") {
  const auto psi0 = init_gaussian_packet(packet(0.2, 1.0, 0.5), 256);
  const auto quiet = noise::make_field(spec1d(0.0, 1.0, 0.5), {two_pi, 64, 0.125}, 30.0, 1, 0);
  const auto c = loschmidt_echo(psi0, 10.0, &quiet, 30, 8);
  for (double m : c.mean_M) CHECK(m == 1.0);
  const auto none = loschmidt_echo(psi0, 10.0, nullptr, 30);
  for (double m : none.mean_M) CHECK(m == 1.0);

  const auto loud = noise::make_field(spec1d(variance_for(1.0, 0.5, 256), 1.0, 0.5), {two_pi, 64, 0.125}, 30.0, 1, 0);
  const auto d = loschmidt_echo(psi0, 10.0, &loud, 30, 8);
  CHECK(d.mean_M[0] == 1.0);
  CHECK(d.mean_M.back() < 0.5);
  for (double m : d.mean_M) {
    CHECK(m >= 0.0);
    CHECK(m <= 1.0);
  }
}

TEST_CASE("echo: a constant potential is a global phase") {
  const std::size_t n = 256;
  const auto psi0 = init_gaussian_packet(packet(0.2, 1.0, 0.5), n);
  noise::PerturbationSpec s = spec1d(1.0, noise::PerturbationSpec::infinite, noise::PerturbationSpec::infinite);
  s.spatial_kind = noise::CorrelatorKind::static_limit;
  s.temporal_kind = noise::CorrelatorKind::static_limit;
  noise::FieldLayout l;
  l.dimension = 1;
  l.extent = two_pi;
  l.duration = 40.0;
  const noise::NoiseField c(s, l, {0.37}, 0, 0);
  const auto e = loschmidt_echo(psi0, 10.0, &c, 40, 1);
  for (double m : e.mean_M) CHECK_THAT(m, WithinAbs(1.0, 1e-12));

  const auto field = noise::make_field(spec1d(variance_for(0.5, 0.5, n), 1.0, 0.5), {two_pi, 64, 0.125}, 40.0, 2, 0);
  const auto a = loschmidt_echo(psi0, 10.0, &field, 40, 8);
  const auto plus = shifted(field, 2.5);
  const auto b = loschmidt_echo(psi0, 10.0, &plus, 40, 8);
  for (std::size_t k = 0; k < a.size(); ++k) CHECK_THAT(b.mean_M[k], WithinAbs(a.mean_M[k], 1e-12));
}

TEST_CASE("echo form equals the fidelity form") {
  const std::size_t n = 256;
  const auto psi0 = init_gaussian_packet(packet(0.2, 1.0, 0.5), n);
  const auto field = noise::make_field(spec1d(variance_for(0.3, 0.5, n), 1.0, 0.5), {two_pi, 64, 0.125}, 25.0, 6, 0);
  for (int M : {1, 8}) {
    const auto c = loschmidt_echo(psi0, 10.0, &field, 25, M);
    for (std::size_t t : {1u, 7u, 25u}) {
      CHECK_THAT(echo_by_time_reversal(psi0, 10.0, field, t, M), WithinAbs(c.mean_M[t], 1e-12));
    }
  }
}

TEST_CASE("strong noise saturates near the uncorrelated-overlap estimate") {
  const std::size_t n = 256;
  const auto psi0 = init_gaussian_packet(packet(0.2, 1.0, 0.5), n);
  const auto field = noise::make_field(spec1d(variance_for(2.0, 0.5, n), 1.0, 0.5), {two_pi, 64, 0.125}, 2000.0, 8, 0);
  const auto c = loschmidt_echo(psi0, 10.0, &field, 2000, 8);
  KahanSum tail;
  for (std::size_t k = 1500; k <= 2000; ++k) tail += c.mean_M[k];
  const double plateau = tail.value() / 501.0;
  INFO("plateau " << plateau << " estimate " << c.saturation);
  CHECK(plateau >= 1.0 / n);
  CHECK(plateau <= 10.0 / n);
  CHECK_THAT(plateau, WithinRel(c.saturation, 0.3));
}

TEST_CASE("ensemble echo: zero variance, determinism, preconditions") {
  EchoConfig cfg;
  cfg.N = 128;
  cfg.packet = packet(0.2, 1.0, 0.5);
  cfg.spec = spec1d(0.0, 1.0, 0.5);
  cfg.n_kicks = 10;
  cfg.n_realizations = 20;
  const auto z = ensemble_echo(cfg);
  CHECK(z.n == 20);
  for (std::size_t k = 0; k < z.size(); ++k) {
    CHECK(z.mean_M[k] == 1.0);
    CHECK(z.stderr_M[k] == 0.0);
  }

  cfg.spec.variance = variance_for(0.3, 0.5, cfg.N);
  cfg.mode = AverageMode::both;
  cfg.n_initial = 2;
  cfg.keep_members = true;
  const auto a = ensemble_echo(cfg);
  cfg.jobs = 4;
  const auto b = ensemble_echo(cfg);
  CHECK(a.mean_M == b.mean_M);
  CHECK(a.stderr_M == b.stderr_M);
  CHECK(a.members.size() == 40);
  CHECK(a.stderr_M.back() > 0.0);

  cfg.n_realizations = 19;
  try {
    ensemble_echo(cfg);
    FAIL("expected insufficient ensemble");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::insufficient_ensemble);
  }
  cfg.mode = AverageMode::initial_conditions;
  cfg.n_initial = 20;
  const auto ic = ensemble_echo(cfg);
  CHECK(ic.n == 20);

  std::ostringstream os;
  write_echo_csv(os, z);
  CHECK(os.str().rfind("t,mean_M,stderr,n\n0,1,0,20\n1,1,0,20\n", 0) == 0);
}

TEST_CASE("ensemble echo decays at tau0 / tau_V^2 in the fast-fluctuation regime") {
  EchoConfig cfg;
  cfg.N = 512;
  cfg.packet = packet(0.2, 1.0, 1.0);
  cfg.spec = spec1d(variance_for(0.15, 0.5, 512), 1.0, 0.5);
  cfg.n_kicks = 40;
  cfg.n_realizations = 24;
  cfg.mode = AverageMode::both;
  cfg.n_initial = 2;
  cfg.master_seed = 17;
  cfg.jobs = default_jobs();
  const auto c = ensemble_echo(cfg);
  const double rate = log_slope_rate(c, std::max(0.01, 10.0 * c.saturation), 0.9);
  INFO("fitted " << rate);
  CHECK_THAT(rate, WithinRel(0.15, 0.20));
}

TEST_CASE("doubling the sub-steps changes the mean echo by < 1%") {
  EchoConfig cfg;
  cfg.N = 512;
  cfg.packet = packet(0.2, 1.0, 1.0);
  cfg.spec = spec1d(variance_for(0.15, 0.5, 512), 1.0, 0.5);
  cfg.n_kicks = 30;
  cfg.n_realizations = 20;
  cfg.master_seed = 5;
  cfg.jobs = default_jobs();
  CHECK(cfg.resolved_substeps() == 8);
  const auto a = ensemble_echo(cfg);
  cfg.substeps = 16;
  const auto b = ensemble_echo(cfg);
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a.mean_M[k] < 0.01 || a.mean_M[k] > 0.9) continue;
    CHECK_THAT(b.mean_M[k], WithinRel(a.mean_M[k], 0.01));
  }
}
