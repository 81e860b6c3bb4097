#include "drivercal/cli.hpp"
#include "drivercal/config.hpp"
#include "drivercal/errors.hpp"

#include "CLI11.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace {

struct CommonFlags {
  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> jobs;
  std::vector<std::string> formats;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("-c,--config", flags.config_path, "Run configuration (JSON)")
      ->required();
  cmd->add_option("-o,--out", flags.out_dir, "Output directory (overrides config)");
  cmd->add_option("-s,--seed", flags.seed, "Master seed (overrides config)");
  cmd->add_option("-j,--jobs", flags.jobs, "Worker threads (overrides config)");
  cmd->add_option("-f,--format", flags.formats,
                  "Output formats: json, csv, svg (overrides config)");
}

drivercal::config::RunConfig load_with_overrides(const CommonFlags& flags) {
  auto cfg = drivercal::config::load(flags.config_path);
  if (flags.out_dir) cfg.out_dir = *flags.out_dir;
  if (flags.seed) cfg.seed = *flags.seed;
  if (flags.jobs) {
    if (*flags.jobs == 0) throw drivercal::ConfigError("--jobs must be >= 1");
    cfg.jobs = *flags.jobs;
  }
  if (!flags.formats.empty()) {
    for (const auto& f : flags.formats)
      if (f != "json" && f != "csv" && f != "svg")
        throw drivercal::ConfigError("unknown format '" + f + "'");
    cfg.formats = flags.formats;
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Car-following calibration toolkit: trajectory ingest, synthetic "
      "populations, per-driver model fitting, and behavior analyses"};
  app.require_subcommand(1);

  CommonFlags ingest_flags, synth_flags, fit_flags, rollout_flags, analyze_flags;

  CLI::App* ingest = app.add_subcommand(
      "ingest", "Parse a trajectory CSV into car-following episodes");
  add_common(ingest, ingest_flags);

  CLI::App* synth = app.add_subcommand(
      "synth", "Generate a synthetic driver population with known parameters");
  add_common(synth, synth_flags);

  CLI::App* fit = app.add_subcommand(
      "fit", "Calibrate car-following parameters against episodes");
  add_common(fit, fit_flags);
  std::string fit_mode;
  fit->add_option("-m,--mode", fit_mode,
                  "per_driver or shared (overrides config)");

  CLI::App* rollout = app.add_subcommand(
      "rollout", "Replay fitted models along recorded leader trajectories");
  add_common(rollout, rollout_flags);
  std::string rollout_source;
  rollout->add_option(
      "--source", rollout_source,
      "idm_per_driver, idm_shared, or boosted (overrides config)");

  CLI::App* analyze = app.add_subcommand(
      "analyze", "Behavior reports: diversity, params, consistency, or all");
  add_common(analyze, analyze_flags);
  std::string which = "all";
  analyze->add_option("-w,--which", which,
                      "diversity, params, consistency, or all");

  CLI11_PARSE(app, argc, argv);

  using drivercal::cli::run_guarded;
  namespace cfg_ns = drivercal::config;

  if (ingest->parsed())
    return run_guarded([&] {
      return drivercal::cli::cmd_ingest(load_with_overrides(ingest_flags));
    });
  if (synth->parsed())
    return run_guarded([&] {
      return drivercal::cli::cmd_synth(load_with_overrides(synth_flags));
    });
  if (fit->parsed())
    return run_guarded([&] {
      auto cfg = load_with_overrides(fit_flags);
      if (!fit_mode.empty()) {
        if (fit_mode == "per_driver")
          cfg.fit.mode = cfg_ns::FitMode::per_driver;
        else if (fit_mode == "shared")
          cfg.fit.mode = cfg_ns::FitMode::shared;
        else
          throw drivercal::ConfigError("--mode must be per_driver or shared");
      }
      return drivercal::cli::cmd_fit(cfg);
    });
  if (rollout->parsed())
    return run_guarded([&] {
      auto cfg = load_with_overrides(rollout_flags);
      if (!rollout_source.empty()) {
        if (rollout_source == "idm_per_driver")
          cfg.rollout.source = cfg_ns::RolloutSource::idm_per_driver;
        else if (rollout_source == "idm_shared")
          cfg.rollout.source = cfg_ns::RolloutSource::idm_shared;
        else if (rollout_source == "boosted")
          cfg.rollout.source = cfg_ns::RolloutSource::boosted;
        else
          throw drivercal::ConfigError(
              "--source must be idm_per_driver, idm_shared, or boosted");
      }
      return drivercal::cli::cmd_rollout(cfg);
    });
  if (analyze->parsed())
    return run_guarded([&] {
      return drivercal::cli::cmd_analyze(load_with_overrides(analyze_flags),
                                         which);
    });
  return 1;  // unreachable: require_subcommand(1)
}
