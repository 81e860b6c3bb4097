#pragma once

#include "drivercal/calib.hpp"
#include "drivercal/stats.hpp"
#include "drivercal/trajdata.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace drivercal::analysis {

struct Histogram {
  std::vector<double> edges;        // size = counts.size() + 1
  std::vector<std::size_t> counts;  // uniform bins over [min, max]
};

// Uniform-bin histogram over the value range; the top edge is inclusive.
// Empty input yields empty counts; a degenerate range yields one bin.
Histogram make_histogram(std::span<const double> values, std::size_t bins);

enum class AccelWindow {
  // Consecutive frames: a qualifying event is a one-frame velocity change of
  // at least the threshold (at dt = 0.1 s that is an extreme 20 m/s^2 burst,
  // so recorded data rarely qualifies -- kept for comparability).
  per_frame,
  // Frames one second apart: a qualifying event is a velocity change of at
  // least the threshold within one second, i.e. a sustained ~2 m/s^2
  // maneuver.  The default.
  per_second,
};

struct DiversityOptions {
  double accel_threshold = 2.0;  // m/s change per window
  double headway_cap = 5.0;      // s; drivers with larger minimum are excluded
  double standstill_velocity = 0.1;  // m/s; slower frames skipped for headway
  AccelWindow window = AccelWindow::per_second;
  std::size_t histogram_bins = 30;
};

struct MetricSummary {
  std::vector<std::int64_t> driver_ids;  // drivers with at least one value
  std::vector<double> values;            // aligned with driver_ids
  Histogram histogram;
  double included_fraction = 0.0;  // contributing drivers / all drivers
};

// Per-driver behavior summaries: mean acceleration over qualifying speed-up
// events, mean deceleration over qualifying slow-down events (negative
// values), and minimum time headway.  Drivers without qualifying events (or
// with all headways above the cap) are excluded from the respective metric,
// and the report carries the included fraction.
struct DiversityReport {
  DiversityOptions options;
  std::size_t total_drivers = 0;
  MetricSummary acceleration;
  MetricSummary deceleration;
  MetricSummary min_headway;
};

DiversityReport diversity_metrics(
    std::span<const trajdata::FollowEpisode> episodes,
    const DiversityOptions& opts = {});

// Compares the spread of per-driver fitted parameters against a shared fit
// plus a band of +/- 2 average refit stds: parameters whose per-driver values
// routinely leave the band differ across drivers by more than optimizer
// noise.
struct ParamDistributionReport {
  std::vector<std::int64_t> driver_ids;
  std::array<std::vector<double>, 5> values;  // per parameter, aligned
  calib::ParamVector shared{};
  calib::ParamVector band_halfwidth{};        // 2 * average refit std
  std::array<double, 5> in_band_fraction{};
  std::array<bool, 5> diverse{};  // true when < 95% of drivers fit the band
  std::array<Histogram, 5> histograms;
};

ParamDistributionReport param_distribution(
    const std::map<std::int64_t, calib::CalibrationResult>& per_driver,
    const calib::CalibrationResult& shared,
    const calib::FitNoiseEstimate& noise, std::size_t histogram_bins = 30);

struct DistanceStats {
  double mean = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};

struct ConsistencyBucket {
  std::size_t min_frames = 0;  // inclusive
  std::size_t max_frames = 0;  // exclusive
  std::size_t n_drivers = 0;
  // Raw-unit L2 distances between parameter vectors.
  DistanceStats refit;        // same half fitted twice, different seeds
  DistanceStats same_driver;  // first half vs second half of one driver
  DistanceStats cross_driver; // halves of two different drivers
  // The same three, with components scaled by search-space ranges.
  DistanceStats refit_normalized;
  DistanceStats same_driver_normalized;
  DistanceStats cross_driver_normalized;
};

struct ConsistencyOptions {
  // Buckets over per-driver pooled frame counts, [min, max) pairs.
  std::vector<std::pair<std::size_t, std::size_t>> buckets = {
      {100, 500}, {500, 1500}, {1500, 1000000}};
  std::size_t cross_pairs = 1000;   // sampled cross-driver pairs per bucket
  std::size_t min_half_frames = 50; // a driver needs 2x this to participate
  calib::FitOptions fit;
  unsigned jobs = 1;
};

struct ConsistencyReport {
  std::vector<ConsistencyBucket> buckets;
  // Welch's t-test of same-driver vs cross-driver distances in the longest
  // usable bucket; absent when no bucket has enough drivers.
  std::optional<stats::WelchResult> longest_bucket_test;
  std::vector<std::string> warnings;  // e.g. buckets dropped for small n
};

// Half-trajectory consistency experiment: each eligible driver's pooled data
// is split at its frame midpoint, both halves are calibrated independently,
// and one half is refit with a different seed.  Distances within a driver,
// across drivers (seeded pair sampling), and between refits quantify whether
// drivers are self-consistent relative to optimizer noise.
ConsistencyReport consistency_experiment(
    std::span<const trajdata::FollowEpisode> episodes,
    const calib::SearchSpace& space, std::size_t n_trials, std::uint64_t seed,
    const ConsistencyOptions& opts = {});

// Split one driver's episodes at the pooled frame midpoint.  An episode
// straddling the midpoint is cut in two; fragments shorter than 2 frames are
// dropped.
struct HalfSplit {
  std::vector<trajdata::FollowEpisode> first;
  std::vector<trajdata::FollowEpisode> second;
};

HalfSplit split_halves(std::span<const trajdata::FollowEpisode> episodes);

}  // namespace drivercal::analysis
