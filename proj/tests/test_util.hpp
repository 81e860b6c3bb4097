#pragma once

#include "drivercal/idm.hpp"
#include "drivercal/trajdata.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace testutil {

// Fresh scratch directory per call; unique across the test binary.
inline std::filesystem::path scratch_dir(const std::string& tag) {
  static std::atomic<int> counter{0};
  const auto dir = std::filesystem::temp_directory_path() /
                   ("drivercal_test_" + tag + "_" +
                    std::to_string(counter.fetch_add(1)));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::filesystem::path write_file(const std::filesystem::path& dir,
                                        const std::string& name,
                                        const std::string& content) {
  const auto path = dir / name;
  std::ofstream out(path, std::ios::binary);
  out << content;
  if (!out) throw std::runtime_error("test fixture write failed: " + path.string());
  return path;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("test fixture read failed: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Noiseless car-following episode generated by the physics model itself.
inline drivercal::trajdata::FollowEpisode episode_from_rollout(
    const drivercal::idm::Params& params, const drivercal::idm::State& initial,
    const std::vector<double>& leader_velocities, double dt,
    const std::string& episode_id, std::int64_t driver_id,
    const drivercal::idm::Options& opts = {}) {
  const auto r =
      drivercal::idm::rollout(params, initial, leader_velocities, dt, opts);
  if (r.collided)
    throw std::runtime_error("test fixture rollout collided: " + episode_id);
  drivercal::trajdata::FollowEpisode ep;
  ep.episode_id = episode_id;
  ep.driver_id = driver_id;
  ep.lane_id = 1;
  ep.dt = dt;
  ep.ego_velocity = r.velocities;
  ep.leader_velocity = leader_velocities;
  ep.gap = r.gaps;
  return ep;
}

}  // namespace testutil
