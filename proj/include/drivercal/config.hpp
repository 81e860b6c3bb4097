#pragma once

#include "drivercal/analysis.hpp"
#include "drivercal/boostreg.hpp"
#include "drivercal/calib.hpp"
#include "drivercal/synth.hpp"
#include "drivercal/trajdata.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace drivercal::config {

struct IngestConfig {
  std::filesystem::path csv;
  std::string dataset_name = "dataset";
  trajdata::UnitSystem units = trajdata::UnitSystem::feet;
  trajdata::CsvSchema schema = trajdata::CsvSchema::ngsim();
  std::size_t min_episode_length = 50;
};

enum class FitMode { per_driver, shared };

struct FitConfig {
  FitMode mode = FitMode::per_driver;
  bool write_trials = false;  // dump the full trial log next to the results
};

enum class RolloutSource { idm_per_driver, idm_shared, boosted };

struct RolloutConfig {
  RolloutSource source = RolloutSource::idm_per_driver;
  std::size_t episodes = 4;  // sampled deterministically from the dataset
};

struct BoostConfig {
  boostreg::TrainConfig train;
};

struct AnalysisConfig {
  analysis::DiversityOptions diversity;
  std::vector<std::pair<std::size_t, std::size_t>> consistency_buckets = {
      {100, 500}, {500, 1500}, {1500, 1000000}};
  std::size_t cross_pairs = 1000;
  std::size_t min_half_frames = 50;
  // Optimizer-noise estimation: repeats per probed driver, and how many
  // drivers (lowest ids) are probed.
  std::size_t noise_repeats = 5;
  std::size_t noise_drivers = 8;
  std::size_t histogram_bins = 30;
};

struct RunConfig {
  std::uint64_t seed = 0;
  unsigned jobs = 1;
  std::filesystem::path out_dir = "out";
  std::vector<std::string> formats = {"json", "csv"};  // json, csv, svg

  std::optional<IngestConfig> ingest;
  // Existing episode file used by fit/rollout/analyze (and written by
  // ingest/synth).
  std::optional<std::filesystem::path> episodes;
  std::optional<synth::PopulationSpec> synth;

  calib::SearchSpace space;
  std::size_t n_trials = 500;
  calib::FitOptions fit_options;

  FitConfig fit;
  RolloutConfig rollout;
  BoostConfig boost;
  AnalysisConfig analysis;
};

// Load and validate a JSON run configuration.  Unknown top-level or nested
// keys are rejected so typos fail loudly rather than silently running with
// defaults.  Throws ConfigError / SchemaError / ParseError.
RunConfig load(const std::filesystem::path& path);

}  // namespace drivercal::config
