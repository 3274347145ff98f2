#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "phonon_herald/commands.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  std::string preset = "paper";
  std::string out_dir;
  std::int64_t seed = -1;
  int workers = -1;
  std::int64_t shots = -1;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "configuration file (key = value grammar)");
  cmd->add_option("--preset", flags.preset,
                  "base preset when no config file is given (paper, low-gain, high-gain)");
  cmd->add_option("--out", flags.out_dir, "output directory");
  cmd->add_option("--seed", flags.seed, "master seed override");
  cmd->add_option("--workers", flags.workers, "worker threads (0 = hardware)");
  cmd->add_option("--shots", flags.shots, "shot count override");
}

herald::RunConfig load_config(const CommonFlags& flags) {
  herald::RunConfig cfg = flags.config_path.empty()
                              ? herald::RunConfig::preset(flags.preset)
                              : herald::RunConfig::from_file(flags.config_path);
  if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
  if (flags.seed >= 0) cfg.campaign.master_seed = static_cast<std::uint64_t>(flags.seed);
  if (flags.workers >= 0) cfg.workers = flags.workers;
  if (flags.shots >= 0) cfg.campaign.n_shots = flags.shots;
  cfg.resolve();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"phonon-herald: pulsed optomechanical DLCZ campaign simulator and analyzer"};
  app.require_subcommand(1);

  CommonFlags rates_flags, sim_flags, ana_flags, fit_flags, filt_flags;
  std::string shot_file, observed_csv;

  CLI::App* rates = app.add_subcommand("rates", "deterministic occupation and photon-rate traces");
  add_common(rates, rates_flags);

  CLI::App* simulate = app.add_subcommand("simulate", "generate a timestamped shot campaign");
  add_common(simulate, sim_flags);

  CLI::App* analyze = app.add_subcommand("analyze", "correlation map, R section and p-value");
  analyze->add_option("shots", shot_file, "shot file (phonon-herald/shots/v1)")->required();
  add_common(analyze, ana_flags);

  CLI::App* fit = app.add_subcommand("fit", "fit power-scale coefficients to observed rates");
  fit->add_option("observed", observed_csv, "observed total-rate CSV")->required();
  add_common(fit, fit_flags);

  CLI::App* filter = app.add_subcommand("filter", "filter cascade response curves");
  add_common(filter, filt_flags);

  CLI11_PARSE(app, argc, argv);

  try {
    if (rates->parsed()) {
      herald::cmd_rates(load_config(rates_flags), std::cout);
    } else if (simulate->parsed()) {
      herald::cmd_simulate(load_config(sim_flags), std::cout);
    } else if (analyze->parsed()) {
      herald::cmd_analyze(load_config(ana_flags), shot_file, std::cout);
    } else if (fit->parsed()) {
      herald::cmd_fit(load_config(fit_flags), observed_csv, std::cout);
    } else if (filter->parsed()) {
      herald::cmd_filter(load_config(filt_flags), std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
