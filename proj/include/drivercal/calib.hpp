#pragma once

#include "drivercal/idm.hpp"
#include "drivercal/trajdata.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

namespace drivercal::calib {

struct ParamBounds {
  double lo = 0.0;
  double hi = 1.0;
};

// Calibration box for (v0, s0, T, a, b); delta stays fixed.
struct SearchSpace {
  ParamBounds v0{1.0, 60.0};
  ParamBounds s0{0.0, 15.0};
  ParamBounds T{0.0, 5.0};
  ParamBounds a{0.05, 10.0};
  ParamBounds b{0.05, 10.0};

  std::array<ParamBounds, 5> bounds() const { return {v0, s0, T, a, b}; }
  bool valid() const;
};

using ParamVector = std::array<double, 5>;  // (v0, s0, T, a, b)

ParamVector to_vector(const idm::Params& p);
idm::Params to_params(const ParamVector& v, double delta = 4.0);
ParamVector clip_to_space(const ParamVector& v, const SearchSpace& space);
bool in_space(const ParamVector& v, const SearchSpace& space);

enum class ObjectiveWeighting {
  // Sum of squared velocity errors over all frames of all episodes, divided
  // by the total frame count: long episodes weigh proportionally more.
  pooled_frames,
  // Mean over episodes of each episode's own MSE.
  per_episode_mean,
};

struct FitOptions {
  ObjectiveWeighting weighting = ObjectiveWeighting::pooled_frames;
  idm::Options idm;
  // Fraction of the evaluation budget spent on uniform exploration before
  // local refinement starts.
  double explore_fraction = 0.2;
  // Cap on objective evaluations per local refinement run.
  std::size_t refine_run_cap = 150;
};

// Mean squared velocity error of the model against recorded episodes: each
// episode is replayed from its first frame (recorded initial velocity and
// gap) against its recorded leader series, and predicted ego velocities are
// compared frame-by-frame, frame 0 included.  Collisions freeze the rollout,
// so the objective stays finite everywhere in the space.
// Throws NoDataError when episodes is empty.
double objective(const idm::Params& p,
                 std::span<const trajdata::FollowEpisode> episodes,
                 const FitOptions& opts = {});

struct Trial {
  ParamVector params;
  double objective = 0.0;
};

struct CalibrationResult {
  idm::Params params;
  double objective = 0.0;
  std::size_t n_trials = 0;
  std::uint64_t seed = 0;
  // Every objective evaluation in order; size() == n_trials and the reported
  // objective equals the minimum over this log.
  std::vector<Trial> trial_log;
};

// Derivative-free calibration under a fixed evaluation budget: a uniform
// exploration stage over the box, then repeated bounded Nelder-Mead runs
// seeded from the incumbent, from the best unexplored candidates, and from
// progressively wider Gaussian jitters of the incumbent when progress stalls.
// Spends exactly n_trials objective evaluations and is deterministic in
// (episodes, space, n_trials, seed, opts).
CalibrationResult fit(std::span<const trajdata::FollowEpisode> episodes,
                      const SearchSpace& space, std::size_t n_trials,
                      std::uint64_t seed, const FitOptions& opts = {});

// Seed handed to one driver's fit inside fit_per_driver, exposed so other
// call sites can reproduce exactly the same fit.
std::uint64_t driver_fit_seed(std::uint64_t seed, std::int64_t driver_id);

// One independent fit per driver, each with a seed derived from (seed,
// driver_id).  Runs fits in parallel when jobs > 1; results are keyed and
// ordered by driver id, independent of thread scheduling.
std::map<std::int64_t, CalibrationResult> fit_per_driver(
    std::span<const trajdata::FollowEpisode> episodes, const SearchSpace& space,
    std::size_t n_trials, std::uint64_t seed, const FitOptions& opts = {},
    unsigned jobs = 1);

struct FitNoiseEstimate {
  // Per-parameter sample std over repeated fits of the same data.
  ParamVector param_std{};
  double mean_pairwise_distance = 0.0;  // raw-unit L2
  std::size_t n_repeats = 0;
};

// Aggregate repeat fits into a noise estimate.  Requires >= 2 results.
FitNoiseEstimate noise_from_fits(std::span<const CalibrationResult> fits);

// Fit the same episodes n_repeats times with derived seeds and summarize the
// scatter; quantifies how much of any parameter difference is optimizer noise
// rather than behavioral difference.
FitNoiseEstimate estimate_fit_noise(
    std::span<const trajdata::FollowEpisode> episodes, const SearchSpace& space,
    std::size_t n_trials, std::size_t n_repeats, std::uint64_t seed,
    const FitOptions& opts = {}, unsigned jobs = 1);

// L2 distance between parameter vectors in raw units.
double param_distance(const idm::Params& x, const idm::Params& y);
// L2 distance with each component scaled by its search-space range.
double param_distance_normalized(const idm::Params& x, const idm::Params& y,
                                 const SearchSpace& space);

}  // namespace drivercal::calib
