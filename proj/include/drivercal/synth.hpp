#pragma once

#include "drivercal/idm.hpp"
#include "drivercal/trajdata.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

namespace drivercal::synth {

enum class LeaderKind { constant, stop_and_go, sawtooth, recorded };

struct LeaderProfile {
  LeaderKind kind = LeaderKind::stop_and_go;
  double cruise = 20.0;     // m/s, top speed of the profile
  double amplitude = 4.0;   // sawtooth half-range, m/s
  std::size_t period = 200; // sawtooth period, frames
  std::vector<double> recorded;  // used by LeaderKind::recorded
};

// Deterministic leader velocity series, never negative.  `seed` only matters
// for stop_and_go (random cruise/brake/creep segment layout); constant and
// sawtooth are seed-independent, recorded replays the stored series (which
// must hold at least `frames` values).
std::vector<double> leader_velocity_series(const LeaderProfile& profile,
                                           std::size_t frames,
                                           std::uint64_t seed);

struct Archetype {
  idm::Params params;
  double weight = 1.0;
};

struct PopulationSpec {
  std::vector<Archetype> archetypes;  // weights must sum to 1
  double action_noise_std = 0.3;      // m/s^2, per-frame Gaussian on the action
  LeaderProfile leader;
  std::size_t n_drivers = 1;
  // Cycled when shorter than n_drivers, so mixed-length populations are easy.
  std::vector<std::size_t> frames_per_driver = {1000};
  std::uint64_t seed = 0;
  // When set, each driver's parameters are re-drawn from the mixture at the
  // episode midpoint (a deliberately inconsistent population).
  bool resample_midway = false;
  idm::Options idm_options;
  double dt = 0.1;
};

struct DriverLabel {
  std::size_t archetype = 0;
  idm::Params params;
  // Present only for resample_midway populations: parameters in force from
  // the midpoint frame on.
  std::optional<idm::Params> second_half_params;
};

using GroundTruthLabels = std::map<std::int64_t, DriverLabel>;

struct Population {
  std::vector<trajdata::FollowEpisode> episodes;  // one per driver, ids 1..n
  GroundTruthLabels labels;
};

// Simulate a population of IDM drivers with archetype-mixture parameters and
// per-frame action noise.  Fully deterministic in spec.seed.  A driver whose
// noisy rollout collides is re-simulated with a fresh noise stream; an
// archetype that still collides after 100 attempts raises GenerationError.
Population generate(const PopulationSpec& spec);

}  // namespace drivercal::synth
