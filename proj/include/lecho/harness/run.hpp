#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "lecho/analysis/classify.hpp"
#include "lecho/analysis/fit.hpp"
#include "lecho/analysis/sweep.hpp"
#include "lecho/classical/lyapunov.hpp"
#include "lecho/core/error.hpp"
#include "lecho/core/rng.hpp"
#include "lecho/harness/config.hpp"
#include "lecho/harness/manifest.hpp"
#include "lecho/noise/correlator.hpp"
#include "lecho/noise/field.hpp"
#include "lecho/noise/field_io.hpp"
#include "lecho/quantum/echo.hpp"
#include "lecho/semiclassical/predict.hpp"

namespace lecho::harness {

enum class Command { noise, lyapunov, echo, predict, sweep, fit, report };

inline std::string_view to_string(Command c) {
  switch (c) {
    case Command::noise: return "noise";
    case Command::lyapunov: return "lyapunov";
    case Command::echo: return "echo";
    case Command::predict: return "predict";
    case Command::sweep: return "sweep";
    case Command::fit: return "fit";
    case Command::report: return "report";
  }
  return "?";
}

inline Command command_from_string(std::string_view s) {
  for (Command c : {Command::noise, Command::lyapunov, Command::echo, Command::predict, Command::sweep, Command::fit,
                    Command::report}) {
    if (s == to_string(c)) return c;
  }
  throw Error(Errc::invalid_argument, "unknown command '" + std::string(s) + "'");
}

namespace detail {

/// JSON number, or null for a non-finite value.
inline json num(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

inline void write_json(const fs::path& p, const json& j) {
  std::ofstream os(p);
  os << j.dump(2) << '\n';
  if (!os) throw Error(Errc::io, "cannot write '" + p.string() + "'");
}

template <class Writer>
void write_text(const fs::path& p, Writer&& w) {
  std::ofstream os(p);
  w(os);
  if (!os) throw Error(Errc::io, "cannot write '" + p.string() + "'");
}

inline void require_quantum(const ExperimentConfig& c, const std::string& command) {
  if (!c.quantum_backend()) {
    throw Error(Errc::precondition,
                "precondition violated in quantum.ensemble_echo: '" + command + "' needs model.backend = standard_map");
  }
}

inline json seed_list(std::uint64_t master, std::size_t n, StreamTag tag) {
  json a = json::array();
  for (std::size_t i = 0; i < n; ++i) a.push_back(seed_for(master, i, tag));
  return a;
}

struct LambdaValue {
  double lambda = 0.0;
  double stderr_lambda = 0.0;
  std::string source;
};

inline LambdaValue resolve_lambda(const ExperimentConfig& c, std::size_t jobs, json& manifest) {
  if (c.lyapunov.lambda) return {*c.lyapunov.lambda, 0.0, "config"};
  const auto est = classical::lyapunov_benettin(c.make_backend(), c.lyapunov.n_orbits, c.lyapunov.n_steps,
                                                c.lyapunov.renorm_interval, c.echo.master_seed,
                                                static_cast<std::size_t>(-1), jobs);
  manifest["seeds"]["orbit"] = seed_list(c.echo.master_seed, c.lyapunov.n_orbits, StreamTag::orbit);
  return {est.lambda, est.stderr_lambda, "benettin"};
}

inline json prediction_json(const semiclassical::RatePrediction& p) {
  return {{"fgr_rate", p.fgr_rate},          {"tau_tilde", num(p.tau_tilde())}, {"tau_tilde_1", num(p.tau_tilde_1)},
          {"tau_tilde_2", num(p.tau_tilde_2)}, {"tau_v", num(p.tau_v)},         {"tau_xi", num(p.tau_xi)},
          {"lambda", num(p.lambda)},         {"regime", semiclassical::to_string(p.regime)},
          {"approximate", p.approximate}};
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

inline double parse_number(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(Errc::schema_violation, where + ": '" + s + "' is not a number");
  }
}

/// Reads a curve written by write_echo_csv.
inline quantum::EchoCurve read_echo_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open echo curve '" + path + "'");
  std::string line;
  std::getline(in, line);
  if (line != "t,mean_M,stderr,n") throw Error(Errc::schema_violation, path + ": expected header t,mean_M,stderr,n");
  quantum::EchoCurve c;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 4) throw Error(Errc::schema_violation, path + ": expected 4 columns");
    c.times.push_back(parse_number(cells[0], path));
    c.mean_M.push_back(parse_number(cells[1], path));
    c.stderr_M.push_back(parse_number(cells[2], path));
    c.n = static_cast<std::size_t>(parse_number(cells[3], path));
  }
  return c;
}

inline semiclassical::Regime regime_from_string(const std::string& s) {
  for (auto r : {semiclassical::Regime::perturbative, semiclassical::Regime::fgr, semiclassical::Regime::lyapunov,
                 semiclassical::Regime::ambiguous}) {
    if (s == semiclassical::to_string(r)) return r;
  }
  throw Error(Errc::schema_violation, "unknown regime '" + s + "'");
}

/// Reads a table written by write_rates_csv.
inline analysis::SweepResult read_rates_csv(const std::string& path, const std::string& axis) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open rates table '" + path + "'");
  std::string line;
  std::getline(in, line);
  if (line != "axis_value,rate,rate_err,predicted_fgr,lambda,regime") {
    throw Error(Errc::schema_violation, path + ": expected header axis_value,rate,rate_err,predicted_fgr,lambda,regime");
  }
  analysis::SweepResult s;
  s.axis = axis;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 6) throw Error(Errc::schema_violation, path + ": expected 6 columns");
    s.values.push_back(parse_number(cells[0], path));
    s.rates.push_back(parse_number(cells[1], path));
    s.rate_errs.push_back(parse_number(cells[2], path));
    s.predicted_fgr.push_back(parse_number(cells[3], path));
    s.lambda = parse_number(cells[4], path);
    s.regimes.push_back(regime_from_string(cells[5]));
    s.errors.emplace_back(std::isfinite(s.rates.back()) ? "" : "failed in the source sweep");
    s.fits.emplace_back();
  }
  return s;
}

inline noise::FieldGrid noise_grid(const ExperimentConfig& c) {
  if (c.quantum_backend()) return c.echo.field_grid();
  const auto& spec = c.spec();
  noise::FieldGrid g;
  g.extent = c.box;
  g.points = spec.spatially_static()
                 ? 1
                 : noise::detail::next_pow2(std::max<std::size_t>(16, static_cast<std::size_t>(std::ceil(4.0 * c.box / spec.xi0 - 1e-9))));
  if (c.echo.field_points > 0) g.points = c.echo.field_points;
  g.dt = c.echo.field_dt > 0.0 ? c.echo.field_dt : (spec.temporally_static() ? 1.0 : spec.tau0 / 4.0);
  return g;
}

inline void run_noise(const ExperimentConfig& c, std::size_t jobs, StagedOutput& out) {
  const noise::FieldGrid grid = noise_grid(c);
  const double duration = c.quantum_backend() ? static_cast<double>(c.echo.n_kicks) : c.T_end;
  const std::size_t R = c.echo.n_realizations;
  const auto fields = parallel_map(R, jobs, [&](std::size_t r) {
    return noise::make_field(c.spec(), grid, duration, c.echo.master_seed, r);
  });
  for (std::size_t r = 0; r < std::min(R, c.save_fields); ++r) {
    std::ostringstream name;
    name << "fields/field_" << std::setw(4) << std::setfill('0') << r << ".bin";
    noise::save_field(out.file(name.str()).string(), fields[r]);
  }
  const auto& L = fields.front().layout();
  json summary = {{"format_version", 1}, {"spec", noise::to_json(c.spec())}, {"realizations", R},
                  {"grid", {{"extent", L.extent}, {"spatial_points", L.spatial_points}, {"dt", L.dt},
                            {"time_points", L.time_points}}}};
  KahanSum sq;
  double count = 0.0;
  for (const auto& f : fields) {
    for (double x : f.values()) sq += x * x;
    count += static_cast<double>(f.values().size());
  }
  summary["measured_variance"] = sq.value() / count;
  if (c.spec().variance > 0.0) {
    if (L.time_points > 1) {
      const auto lag = std::min<std::size_t>(L.time_points - 1, static_cast<std::size_t>(std::ceil(3.0 * c.spec().tau0 / L.dt)));
      const auto curve = noise::empirical_correlator(fields, noise::Axis::time, lag);
      write_text(out.file("correlator_time.csv"), [&](std::ostream& os) { noise::write_correlator_csv(os, curve); });
    }
    if (L.spatial_points > 1) {
      const auto lag = std::min<std::size_t>(L.spatial_points / 2, static_cast<std::size_t>(std::ceil(3.0 * c.spec().xi0 / L.spacing())));
      const auto curve = noise::empirical_correlator(fields, noise::Axis::space, lag);
      write_text(out.file("correlator_space.csv"), [&](std::ostream& os) { noise::write_correlator_csv(os, curve); });
    }
  }
  write_json(out.file("noise.json"), summary);
  out.manifest()["seeds"]["noise"] = seed_list(c.echo.master_seed, R, StreamTag::noise);
}

inline void run_lyapunov(const ExperimentConfig& c, std::size_t jobs, StagedOutput& out) {
  const auto est = classical::lyapunov_benettin(c.make_backend(), c.lyapunov.n_orbits, c.lyapunov.n_steps,
                                                c.lyapunov.renorm_interval, c.echo.master_seed,
                                                static_cast<std::size_t>(-1), jobs);
  out.manifest()["seeds"]["orbit"] = seed_list(c.echo.master_seed, c.lyapunov.n_orbits, StreamTag::orbit);
  write_json(out.file("lyapunov.json"), {{"format_version", 1},
                                         {"backend", c.backend},
                                         {"lambda", est.lambda},
                                         {"stderr", est.stderr_lambda},
                                         {"non_chaotic", est.non_chaotic},
                                         {"n_orbits", est.n_orbits},
                                         {"n_steps", est.n_steps},
                                         {"transient", est.transient},
                                         {"renorm_interval", est.renorm_interval},
                                         {"per_orbit", est.per_orbit}});
}

inline void record_echo_seeds(const ExperimentConfig& c, json& manifest) {
  manifest["seeds"]["noise"] = seed_list(c.echo.master_seed, c.echo.realization_count(), StreamTag::noise);
  if (c.echo.mode != quantum::AverageMode::realizations) {
    manifest["seeds"]["initial_condition"] = seed_list(c.echo.master_seed, c.echo.initial_count(), StreamTag::initial_condition);
  }
}

inline quantum::EchoCurve run_echo_curve(const ExperimentConfig& c, std::size_t jobs, StagedOutput& out) {
  require_quantum(c, "echo");
  quantum::EchoConfig q = c.echo;
  q.jobs = jobs;
  const auto curve = quantum::ensemble_echo(q);
  write_text(out.file("echo.csv"), [&](std::ostream& os) { quantum::write_echo_csv(os, curve); });
  record_echo_seeds(c, out.manifest());
  return curve;
}

inline void run_echo(const ExperimentConfig& c, std::size_t jobs, StagedOutput& out) {
  const auto curve = run_echo_curve(c, jobs, out);
  write_json(out.file("echo.json"), {{"format_version", 1},
                                     {"members", curve.n},
                                     {"saturation", curve.saturation},
                                     {"substeps", c.echo.resolved_substeps()},
                                     {"final_M", curve.mean_M.back()}});
}

inline void run_predict(const ExperimentConfig& c, std::size_t jobs, StagedOutput& out) {
  const LambdaValue lam = resolve_lambda(c, jobs, out.manifest());
  const auto p = semiclassical::predict_fgr_rate(c.spec(), c.v, c.hbar_eff, lam.lambda);
  json j = {{"format_version", 1}, {"hbar_eff", c.hbar_eff}, {"v", c.v}, {"lambda_source", lam.source},
            {"lambda_stderr", lam.stderr_lambda}};
  j.update(prediction_json(p));
  j["unit_normalized_fgr_rate"] = std::sqrt(std::numbers::pi) * p.fgr_rate;
  try {
    const auto a = semiclassical::predict_lyapunov_prefactor(c.spec(), lam.lambda, c.v, c.hbar_eff,
                                                             std::numeric_limits<double>::infinity(), c.mass,
                                                             c.echo.packet.sigma);
    j["prefactor_A_asymptotic"] = num(a.A);
  } catch (const Error&) {
    j["prefactor_A_asymptotic"] = nullptr;
  }
  write_json(out.file("predict.json"), j);
}

inline void run_fit(const ExperimentConfig& c, std::size_t jobs, StagedOutput& out) {
  quantum::EchoCurve curve;
  double saturation = 0.0;
  if (c.input) {
    curve = read_echo_csv(*c.input);
    saturation = 1.0 / static_cast<double>(c.N);  // a stored curve carries no plateau estimate
  } else {
    curve = run_echo_curve(c, jobs, out);
    saturation = curve.saturation;
  }
  const LambdaValue lam = resolve_lambda(c, jobs, out.manifest());
  const auto p = semiclassical::predict_fgr_rate(c.spec(), c.v, c.hbar_eff, lam.lambda);
  analysis::FitOptions fo = c.fit;
  if (!fo.rate_seeds && p.fgr_rate > 0.0) {
    fo.rate_seeds = std::array<double, 2>{std::max(lam.lambda, p.fgr_rate), std::min(lam.lambda, p.fgr_rate)};
  }
  json j = {{"format_version", 1}, {"saturation", saturation}, {"prediction", prediction_json(p)}};
  try {
    const auto f = analysis::fit_decay(curve, saturation, fo);
    j["fit"] = analysis::to_json(f);
    j["regime"] = p.fgr_rate > 0.0 ? semiclassical::to_string(analysis::classify_regime(f, p)) : "ambiguous";
  } catch (const Error& e) {
    if (e.code() != Errc::no_fit_window) throw;
    j["fit"] = nullptr;
    j["regime"] = "perturbative";
    j["note"] = e.what();
  }
  write_json(out.file("fit.json"), j);
}

inline void write_report(const analysis::SweepResult& s, const ExperimentConfig& c, StagedOutput& out) {
  analysis::CrossoverOptions co;
  co.convention_factor = c.convention_factor;
  const auto r = analysis::crossover_report(s, co);
  json j = analysis::to_json(r);
  j["fit_options"] = {{"upper", c.fit.upper}, {"floor_factor", c.fit.floor_factor}, {"floor_min", c.fit.floor_min},
                      {"r2_threshold", c.fit.r2_threshold}};
  write_json(out.file("report.json"), j);
}

inline void run_sweep(const ExperimentConfig& c, std::size_t jobs, StagedOutput& out) {
  require_quantum(c, "sweep");
  if (c.sweep_values.empty()) throw Error(Errc::schema_violation, "config sweep.values: expected at least one value");
  const LambdaValue lam = resolve_lambda(c, jobs, out.manifest());
  quantum::EchoConfig q = c.echo;
  q.jobs = jobs;
  const auto s = analysis::sweep(q, c.sweep_axis, c.sweep_values, {lam.lambda, c.v, c.fit});
  write_text(out.file("rates.csv"), [&](std::ostream& os) { analysis::write_rates_csv(os, s); });
  json points = json::array();
  for (std::size_t i = 0; i < s.size(); ++i) {
    points.push_back({{"value", s.values[i]},
                      {"fit", s.ok(i) ? analysis::to_json(s.fits[i]) : json(nullptr)},
                      {"predicted_fgr", num(s.predicted_fgr[i])},
                      {"regime", semiclassical::to_string(s.regimes[i])},
                      {"error", s.errors[i]}});
  }
  write_json(out.file("sweep.json"), {{"format_version", 1}, {"axis", s.axis}, {"lambda", s.lambda},
                                      {"lambda_source", lam.source}, {"points", points}});
  write_report(s, c, out);
  record_echo_seeds(c, out.manifest());
}

inline void run_report(const ExperimentConfig& c, std::size_t jobs, StagedOutput& out) {
  if (!c.input) {
    run_sweep(c, jobs, out);
    return;
  }
  write_report(read_rates_csv(*c.input, c.sweep_axis), c, out);
}

}  // namespace detail

/// Executes one pipeline and writes its artifacts plus manifest.json into
/// `out_dir` (or the configured output directory) atomically.
inline fs::path run(Command command, const ExperimentConfig& cfg, std::size_t jobs, const std::string& out_dir = {}) {
  if (jobs == 0) jobs = default_jobs();
  json manifest = {{"command", to_string(command)}, {"config", cfg.resolved}, {"jobs", jobs},
                   {"seeds", {{"master_seed", cfg.echo.master_seed}}}};
  StagedOutput out(out_dir.empty() ? cfg.out_dir : out_dir, manifest);
  switch (command) {
    case Command::noise: detail::run_noise(cfg, jobs, out); break;
    case Command::lyapunov: detail::run_lyapunov(cfg, jobs, out); break;
    case Command::echo: detail::run_echo(cfg, jobs, out); break;
    case Command::predict: detail::run_predict(cfg, jobs, out); break;
    case Command::sweep: detail::run_sweep(cfg, jobs, out); break;
    case Command::fit: detail::run_fit(cfg, jobs, out); break;
    case Command::report: detail::run_report(cfg, jobs, out); break;
  }
  out.commit();
  return out.destination();
}

}  // namespace lecho::harness
