#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string_view>
#include <vector>

#include "lecho/core/error.hpp"
#include "lecho/core/parallel.hpp"
#include "lecho/core/rng.hpp"
#include "lecho/core/stats.hpp"
#include "lecho/noise/field.hpp"
#include "lecho/quantum/propagate.hpp"
#include "lecho/quantum/wavefunction.hpp"

namespace lecho::quantum {

/// M(t) at integer kicks t = 0..n_kicks.
struct EchoCurve {
  std::vector<double> times;
  std::vector<double> mean_M;
  std::vector<double> stderr_M;
  std::size_t n = 0;  ///< members averaged per point
  std::vector<std::vector<double>> members;  ///< per (realization, initial condition), when retained
  /// Expected plateau: sum_j |psi0_j(t)|^2 |psi_j(t)|^2 averaged over the last
  /// quarter of the run, the overlap of two states with uncorrelated phases.
  double saturation = 0.0;

  std::size_t size() const { return times.size(); }
};

namespace detail {

inline bool field_is_zero(const noise::NoiseField& f) {
  return std::all_of(f.values().begin(), f.values().end(), [](double v) { return v == 0.0; });
}

inline double uncorrelated_overlap(const WaveFunction& a, const WaveFunction& b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += std::norm(a.amplitudes[j]) * std::norm(b.amplitudes[j]);
  return s;
}

}  // namespace detail

/// Single-realization echo M(t) = |<psi(t)|psi0(t)>|^2, the forward-forward
/// fidelity of the perturbed and unperturbed evolutions of psi0. A null or
/// identically zero field propagates both with the same map, so M is exactly 1.
inline EchoCurve loschmidt_echo(const WaveFunction& psi0, double K, const noise::NoiseField* field, std::size_t n_kicks,
                                int substeps = 1) {
  if (field && field->duration() + 1e-9 < static_cast<double>(n_kicks)) {
    throw Error(Errc::duration_mismatch, "loschmidt_echo: field is shorter than n_kicks");
  }
  const KickedPropagator u0(psi0.size(), K);
  const bool quiet = field == nullptr || detail::field_is_zero(*field);
  std::optional<KickedPropagator> u;
  if (!quiet) u.emplace(psi0.size(), K, field, substeps);
  const KickedPropagator& up = quiet ? u0 : *u;

  EchoCurve c;
  c.n = 1;
  c.times.resize(n_kicks + 1);
  c.mean_M.resize(n_kicks + 1);
  c.stderr_M.assign(n_kicks + 1, 0.0);
  WaveFunction a = psi0, b = psi0;
  c.times[0] = 0.0;
  c.mean_M[0] = fidelity(a.amplitudes, b.amplitudes);
  const std::size_t tail = n_kicks - n_kicks / 4;
  KahanSum sat;
  std::size_t n_sat = 0;
  for (std::size_t n = 0; n < n_kicks; ++n) {
    u0.forward(a, n);
    up.forward(b, n);
    c.times[n + 1] = static_cast<double>(n + 1);
    c.mean_M[n + 1] = fidelity(b.amplitudes, a.amplitudes);
    if (n + 1 >= tail) {
      sat += detail::uncorrelated_overlap(a, b);
      ++n_sat;
    }
  }
  c.saturation = n_sat > 0 ? sat.value() / static_cast<double>(n_sat) : detail::uncorrelated_overlap(a, b);
  return c;
}

/// Echo form of the same quantity: U0 forward n_kicks, then the perturbed map
/// backward, overlapped with psi0.
inline double echo_by_time_reversal(const WaveFunction& psi0, double K, const noise::NoiseField& field,
                                    std::size_t n_kicks, int substeps = 1) {
  const KickedPropagator u0(psi0.size(), K);
  const KickedPropagator u(psi0.size(), K, &field, substeps);
  WaveFunction w = psi0;
  for (std::size_t n = 0; n < n_kicks; ++n) u0.forward(w, n);
  for (std::size_t n = n_kicks; n-- > 0;) u.backward(w, n);
  return fidelity(psi0.amplitudes, w.amplitudes);
}

enum class AverageMode { realizations, initial_conditions, both };

inline std::string_view to_string(AverageMode m) {
  switch (m) {
    case AverageMode::realizations: return "realizations";
    case AverageMode::initial_conditions: return "initial_conditions";
    case AverageMode::both: return "both";
  }
  return "?";
}

inline AverageMode average_mode_from_string(std::string_view s) {
  if (s == "realizations") return AverageMode::realizations;
  if (s == "initial_conditions") return AverageMode::initial_conditions;
  if (s == "both") return AverageMode::both;
  throw Error(Errc::invalid_argument, "unknown average mode '" + std::string(s) + "'");
}

struct EchoConfig {
  std::size_t N = 1024;
  double K = 10.0;
  semiclassical::WavePacketSpec packet;
  noise::PerturbationSpec spec;
  std::size_t n_kicks = 50;
  std::size_t n_realizations = 50;
  std::size_t n_initial = 1;
  AverageMode mode = AverageMode::realizations;
  std::uint64_t master_seed = 1;
  int substeps = 0;              ///< 0: default_substeps(spec)
  std::size_t field_points = 0;  ///< 0: smallest power of two with spacing <= xi0/4 (at least 64)
  double field_dt = 0.0;         ///< 0: tau0/4
  bool keep_members = false;
  std::size_t jobs = 1;

  int resolved_substeps() const { return substeps > 0 ? substeps : default_substeps(spec); }

  noise::FieldGrid field_grid() const {
    noise::FieldGrid g;
    g.extent = two_pi;
    if (field_points > 0) {
      g.points = field_points;
    } else if (spec.spatially_static()) {
      g.points = 1;
    } else {
      g.points = noise::detail::next_pow2(std::max<std::size_t>(64, static_cast<std::size_t>(std::ceil(4.0 * two_pi / spec.xi0 - 1e-9))));
    }
    g.dt = field_dt > 0.0 ? field_dt : (spec.temporally_static() ? 1.0 : spec.tau0 / 4.0);
    return g;
  }

  std::size_t realization_count() const { return mode == AverageMode::initial_conditions ? 1 : n_realizations; }
  std::size_t initial_count() const { return mode == AverageMode::realizations ? 1 : n_initial; }

  void validate() const {
    spec.validate();
    if (spec.dimension != 1) throw Error(Errc::invalid_argument, "echo: the kicked rotor needs a 1-D perturbation");
    if (!is_power_of_two(N)) throw Error(Errc::invalid_argument, "echo: N must be a power of two");
    if (n_kicks == 0) throw Error(Errc::invalid_argument, "echo: n_kicks must be >= 1");
    if (mode != AverageMode::initial_conditions && n_realizations < 20) {
      throw Error(Errc::insufficient_ensemble, "echo: n_realizations must be >= 20");
    }
    if (mode == AverageMode::initial_conditions && n_initial < 20) {
      throw Error(Errc::insufficient_ensemble, "echo: n_initial must be >= 20 when averaging over initial conditions");
    }
    if (mode == AverageMode::both && n_initial == 0) throw Error(Errc::invalid_argument, "echo: n_initial must be >= 1");
    init_gaussian_packet(packet, N);
  }
};

/// Packet center of initial condition i: the configured r0 when only
/// realizations are averaged, else uniform on the torus.
inline double initial_position(const EchoConfig& cfg, std::size_t i) {
  if (cfg.mode == AverageMode::realizations) return cfg.packet.r0[0];
  RandomStream rng(seed_for(cfg.master_seed, i, StreamTag::initial_condition));
  return rng.uniform(0.0, two_pi);
}

/// <M(t)> over (noise realization x initial packet position). The stderr is a
/// delete-one-group jackknife with realizations as groups (initial conditions
/// when a single realization is used).
inline EchoCurve ensemble_echo(const EchoConfig& cfg) {
  cfg.validate();
  const std::size_t R = cfg.realization_count(), I = cfg.initial_count();
  const noise::FieldGrid grid = cfg.field_grid();
  const int substeps = cfg.resolved_substeps();
  const std::size_t nt = cfg.n_kicks + 1;

  struct Block {
    std::vector<std::vector<double>> curves;
    std::vector<double> saturation;
  };
  auto run = [&](std::size_t r) {
    const auto field = noise::make_field(cfg.spec, grid, static_cast<double>(cfg.n_kicks), cfg.master_seed, r);
    Block b;
    for (std::size_t i = 0; i < I; ++i) {
      semiclassical::WavePacketSpec p = cfg.packet;
      p.r0[0] = initial_position(cfg, i);
      const auto c = loschmidt_echo(init_gaussian_packet(p, cfg.N), cfg.K, &field, cfg.n_kicks, substeps);
      b.curves.push_back(c.mean_M);
      b.saturation.push_back(c.saturation);
    }
    return b;
  };
  const std::vector<Block> blocks = parallel_map(R, cfg.jobs, run);

  // members in (realization, initial condition) order
  std::vector<const std::vector<double>*> members;
  std::vector<std::size_t> group_of;
  KahanSum sat;
  for (std::size_t r = 0; r < R; ++r) {
    for (std::size_t i = 0; i < I; ++i) {
      members.push_back(&blocks[r].curves[i]);
      group_of.push_back(R >= 2 ? r : i);
      sat += blocks[r].saturation[i];
    }
  }
  const std::size_t ng = R >= 2 ? R : I;
  const double ntot = static_cast<double>(members.size());

  EchoCurve out;
  out.n = members.size();
  out.saturation = sat.value() / ntot;
  out.times.resize(nt);
  out.mean_M.resize(nt);
  out.stderr_M.resize(nt);
  std::vector<double> gs(ng), gn(ng);
  for (std::size_t k = 0; k < nt; ++k) {
    std::fill(gs.begin(), gs.end(), 0.0);
    std::fill(gn.begin(), gn.end(), 0.0);
    for (std::size_t m = 0; m < members.size(); ++m) {
      gs[group_of[m]] += (*members[m])[k];
      gn[group_of[m]] += 1.0;
    }
    KahanSum tot;
    for (double x : gs) tot += x;
    const double total = tot.value();
    const MeanErr e = jackknife(ng, [&](long g) {
      if (g < 0) return total / ntot;
      const auto u = static_cast<std::size_t>(g);
      return (total - gs[u]) / (ntot - gn[u]);
    });
    out.times[k] = static_cast<double>(k);
    out.mean_M[k] = e.mean;
    out.stderr_M[k] = e.err;
  }
  if (cfg.keep_members) {
    for (const auto* m : members) out.members.push_back(*m);
  }
  return out;
}

inline void write_echo_csv(std::ostream& os, const EchoCurve& c) {
  os.precision(17);
  os << "t,mean_M,stderr,n\n";
  for (std::size_t k = 0; k < c.size(); ++k) {
    os << c.times[k] << ',' << c.mean_M[k] << ',' << c.stderr_M[k] << ',' << c.n << '\n';
  }
}

}  // namespace lecho::quantum
