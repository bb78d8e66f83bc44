// Command-line front end: lecho <command> --config <path> [--set key=value ...]
//                                  [--out <dir>] [--seed <n>] [--jobs <n>]

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "lecho/harness/config.hpp"
#include "lecho/harness/run.hpp"

int main(int argc, char** argv) {
  using namespace lecho;

  CLI::App app{"Loschmidt echo laboratory: noise synthesis, chaotic dynamics, echo decay and rate predictions"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  std::uint64_t seed = 0;
  std::size_t jobs = 0;

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"noise", "synthesize perturbation realizations and their empirical correlators"},
      {"lyapunov", "Benettin estimate of the Lyapunov exponent"},
      {"echo", "ensemble-averaged Loschmidt echo of the quantized kicked rotor"},
      {"predict", "closed-form decay rates and regime"},
      {"sweep", "fit and classify the echo decay along one parameter axis"},
      {"fit", "fit the decay rate of an echo curve"},
      {"report", "crossover report from a rates table or a fresh sweep"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "JSON configuration file")->required()->check(CLI::ExistingFile);
    sub->add_option("--set", overrides, "override a config field, key=value (repeatable)");
    sub->add_option("--out", out_dir, "output directory (default: output.directory)");
    sub->add_option("--seed", seed, "master seed (overrides ensemble.master_seed)");
    sub->add_option("--jobs", jobs, "worker threads (default: LECHO_JOBS or all cores)");
  }

  CLI11_PARSE(app, argc, argv);
  const std::string command = app.get_subcommands().front()->get_name();
  if (app.get_subcommands().front()->count("--seed") > 0) {
    overrides.push_back("ensemble.master_seed=" + std::to_string(seed));
  }

  try {
    const harness::ExperimentConfig cfg = harness::load_config(config_path, overrides);
    const auto dest = harness::run(harness::command_from_string(command), cfg, jobs, out_dir);
    std::cout << dest.string() << '\n';
    return 0;
  } catch (const Error& e) {
    std::cerr << "lecho " << command << ": " << to_string(e.code()) << ": " << e.what() << '\n';
    return e.code() == Errc::schema_violation || e.code() == Errc::precondition ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "lecho " << command << ": " << e.what() << '\n';
    return 1;
  }
}
