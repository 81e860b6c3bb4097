#pragma once

#include "drivercal/calib.hpp"
#include "drivercal/config.hpp"
#include "drivercal/trajdata.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <span>
#include <string>

namespace drivercal::cli {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;      // config/schema/parse problems
inline constexpr int kExitGeneration = 3;  // infeasible synthetic population
inline constexpr int kExitNoData = 4;      // nothing usable to work on

// Content hash of an episode set (ids, dt, and all three series), used for
// fit-cache keys.
std::uint64_t hash_episodes(std::span<const trajdata::FollowEpisode> episodes);

// Process-local calibration memo: repeated requests for the same
// (episodes, space, n_trials, seed, options) return the stored result
// instead of fitting again, so one analysis run never fits a driver twice.
class FitCache {
 public:
  const calib::CalibrationResult& get(
      std::span<const trajdata::FollowEpisode> episodes,
      const calib::SearchSpace& space, std::size_t n_trials, std::uint64_t seed,
      const calib::FitOptions& opts);

  std::size_t hits() const { return hits_; }
  std::size_t misses() const { return misses_; }

 private:
  std::mutex mu_;
  std::map<std::string, calib::CalibrationResult> results_;
  std::size_t hits_ = 0;
  std::size_t misses_ = 0;
};

// Subcommand bodies.  Each validates the parts of the config it needs,
// writes its outputs under cfg.out_dir, and returns an exit code; the CLI
// frontend maps thrown errors onto the codes above via run_guarded.
int cmd_ingest(const config::RunConfig& cfg);
int cmd_synth(const config::RunConfig& cfg);
int cmd_fit(const config::RunConfig& cfg);
int cmd_rollout(const config::RunConfig& cfg);
// which: diversity | params | consistency | all
int cmd_analyze(const config::RunConfig& cfg, const std::string& which);

// Run a command body, translating exceptions into exit codes and printing
// the message to stderr.
int run_guarded(const std::function<int()>& body);

}  // namespace drivercal::cli
