#include "drivercal/synth.hpp"

#include "drivercal/errors.hpp"
#include "drivercal/rng.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace drivercal::synth {

namespace {

// rng sub-stream tags (arbitrary distinct constants)
constexpr std::uint64_t kProfileStream = 0x1eadf00d;
constexpr std::uint64_t kArchetypeStream = 0xa2c4e6;
constexpr std::uint64_t kNoiseStream = 0x0153e5;

double smoothstep(double x) {
  x = std::clamp(x, 0.0, 1.0);
  return x * x * (3.0 - 2.0 * x);
}

void append_hold(std::vector<double>& v, std::size_t frames, double value) {
  v.insert(v.end(), frames, value);
}

void append_ramp(std::vector<double>& v, std::size_t frames, double from,
                 double to) {
  for (std::size_t i = 0; i < frames; ++i) {
    const double x = static_cast<double>(i + 1) / static_cast<double>(frames);
    v.push_back(from + (to - from) * smoothstep(x));
  }
}

std::vector<double> stop_and_go_series(std::size_t frames, double cruise,
                                       std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> cruise_len(40, 80);
  std::uniform_int_distribution<std::size_t> ramp_len(30, 60);
  std::uniform_int_distribution<std::size_t> low_len(20, 50);
  std::uniform_real_distribution<double> creep_frac(0.2, 0.5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<double> v;
  v.reserve(frames + 120);
  while (v.size() < frames) {
    append_hold(v, cruise_len(rng), cruise);
    // Half the slowdowns go to a full stop, the rest to a creep speed, so the
    // data carries both hard braking and mild following.
    const double low = unit(rng) < 0.5 ? 0.0 : creep_frac(rng) * cruise;
    append_ramp(v, ramp_len(rng), cruise, low);
    append_hold(v, low_len(rng), low);
    append_ramp(v, ramp_len(rng), low, cruise);
  }
  v.resize(frames);
  return v;
}

}  // namespace

std::vector<double> leader_velocity_series(const LeaderProfile& profile,
                                           std::size_t frames,
                                           std::uint64_t seed) {
  if (frames == 0) throw ConfigError("leader profile: frames must be positive");
  if (!(profile.cruise >= 0.0))
    throw ConfigError("leader profile: cruise must be nonnegative");

  std::vector<double> v;
  switch (profile.kind) {
    case LeaderKind::constant:
      v.assign(frames, profile.cruise);
      break;
    case LeaderKind::stop_and_go:
      v = stop_and_go_series(frames, profile.cruise, seed);
      break;
    case LeaderKind::sawtooth: {
      if (profile.period < 2)
        throw ConfigError("leader profile: sawtooth period must be >= 2");
      v.reserve(frames);
      const std::size_t half = profile.period / 2;
      for (std::size_t t = 0; t < frames; ++t) {
        const std::size_t ph = t % profile.period;
        const double x = ph < half
                             ? static_cast<double>(ph) / static_cast<double>(half)
                             : 1.0 - static_cast<double>(ph - half) /
                                         static_cast<double>(profile.period - half);
        v.push_back(profile.cruise - profile.amplitude + 2.0 * profile.amplitude * x);
      }
      break;
    }
    case LeaderKind::recorded:
      if (profile.recorded.size() < frames)
        throw ConfigError("leader profile: recorded series shorter than requested " +
                          std::to_string(frames) + " frames");
      v.assign(profile.recorded.begin(),
               profile.recorded.begin() + static_cast<std::ptrdiff_t>(frames));
      break;
  }
  for (double& x : v) x = std::max(0.0, x);
  return v;
}

namespace {

struct SimResult {
  std::vector<double> ego_velocity;
  std::vector<double> gap;
  bool collided = false;
};

SimResult simulate_driver(const idm::Params& first, const idm::Params* second,
                          const std::vector<double>& leader, double dt,
                          double noise_std, const idm::Options& opts,
                          std::mt19937_64& noise_rng) {
  const std::size_t frames = leader.size();
  const std::size_t switch_frame = frames / 2;
  std::normal_distribution<double> noise(0.0, noise_std > 0.0 ? noise_std : 1.0);

  SimResult out;
  out.ego_velocity.reserve(frames);
  out.gap.reserve(frames);

  // Start near (not at) steady state: slightly slower than free flow, with a
  // gap a bit wider than desired, so the opening frames already carry signal.
  double v = std::min(leader.front(), 0.95 * first.v0);
  double gap = 1.2 * (first.s0 + v * first.T) + 0.5;
  out.ego_velocity.push_back(v);
  out.gap.push_back(gap);

  for (std::size_t t = 0; t + 1 < frames; ++t) {
    const idm::Params& p =
        (second != nullptr && t >= switch_frame) ? *second : first;
    double acc = idm::acceleration(p, v, v - leader[t], gap, opts);
    if (noise_std > 0.0) acc += noise(noise_rng);
    const double v_new = std::max(0.0, v + acc * dt);
    const double v_for_gap =
        opts.gap_update == idm::GapUpdate::semi_implicit ? v_new : v;
    gap += (leader[t] - v_for_gap) * dt;
    v = v_new;
    if (gap <= 0.0) {
      out.collided = true;
      return out;
    }
    out.ego_velocity.push_back(v);
    out.gap.push_back(gap);
  }
  return out;
}

}  // namespace

Population generate(const PopulationSpec& spec) {
  if (spec.archetypes.empty())
    throw ConfigError("population: at least one archetype required");
  double weight_sum = 0.0;
  for (const auto& arch : spec.archetypes) {
    if (!(arch.weight > 0.0))
      throw ConfigError("population: archetype weights must be positive");
    if (!arch.params.valid())
      throw ConfigError("population: invalid archetype parameters");
    weight_sum += arch.weight;
  }
  if (std::abs(weight_sum - 1.0) > 1e-9)
    throw ConfigError("population: archetype weights must sum to 1");
  if (spec.n_drivers == 0)
    throw ConfigError("population: n_drivers must be positive");
  if (spec.frames_per_driver.empty())
    throw ConfigError("population: frames_per_driver must not be empty");
  for (std::size_t f : spec.frames_per_driver)
    if (f < 2) throw ConfigError("population: episodes need at least 2 frames");
  if (spec.action_noise_std < 0.0)
    throw ConfigError("population: action noise must be nonnegative");
  if (!(spec.dt > 0.0)) throw ConfigError("population: dt must be positive");

  Population pop;
  for (std::size_t d = 0; d < spec.n_drivers; ++d) {
    const std::int64_t driver_id = static_cast<std::int64_t>(d) + 1;
    const std::size_t frames =
        spec.frames_per_driver[d % spec.frames_per_driver.size()];

    const auto leader = leader_velocity_series(
        spec.leader, frames, derive_seed(spec.seed, kProfileStream, d));

    // Archetype draws are independent of the retry loop below so a driver's
    // identity never depends on how many noisy rollouts collided.
    auto arch_rng = make_rng(spec.seed, kArchetypeStream, d);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto draw_archetype = [&]() {
      const double u = unit(arch_rng);
      double acc = 0.0;
      for (std::size_t i = 0; i < spec.archetypes.size(); ++i) {
        acc += spec.archetypes[i].weight;
        if (u < acc) return i;
      }
      return spec.archetypes.size() - 1;
    };

    DriverLabel label;
    label.archetype = draw_archetype();
    label.params = spec.archetypes[label.archetype].params;
    const idm::Params* second = nullptr;
    if (spec.resample_midway) {
      label.second_half_params = spec.archetypes[draw_archetype()].params;
      second = &*label.second_half_params;
    }

    SimResult sim;
    bool ok = false;
    for (std::size_t attempt = 0; attempt < 100; ++attempt) {
      auto noise_rng =
          make_rng(spec.seed, kNoiseStream, d * 101 + attempt);
      sim = simulate_driver(label.params, second, leader, spec.dt,
                            spec.action_noise_std, spec.idm_options, noise_rng);
      if (!sim.collided) {
        ok = true;
        break;
      }
    }
    if (!ok)
      throw GenerationError(
          "population: archetype " + std::to_string(label.archetype) +
          " for driver " + std::to_string(driver_id) +
          " collides under the configured leader profile and noise");

    trajdata::FollowEpisode ep;
    ep.episode_id = "synth_" + std::to_string(driver_id);
    ep.driver_id = driver_id;
    ep.lane_id = 1;
    ep.dt = spec.dt;
    ep.ego_velocity = std::move(sim.ego_velocity);
    ep.leader_velocity = leader;
    ep.gap = std::move(sim.gap);
    pop.episodes.push_back(std::move(ep));
    pop.labels.emplace(driver_id, std::move(label));
  }
  return pop;
}

}  // namespace drivercal::synth
