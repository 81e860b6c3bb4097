#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace drivercal::trajdata {

constexpr double kFeetToMeters = 0.3048;

inline double feet_to_meters(double ft) { return ft * kFeetToMeters; }
inline double meters_to_feet(double m) { return m / kFeetToMeters; }

enum class VehicleClass { motorcycle, car, truck };

// One vehicle at one frame, normalized to SI units (meters, m/s, m/s^2).
struct TrajectoryFrame {
  std::int64_t vehicle_id = 0;
  std::int64_t frame_index = 0;
  double local_x = 0.0;
  double local_y = 0.0;  // longitudinal position along the section
  double velocity = 0.0;
  double acceleration = 0.0;
  int lane_id = 0;
  std::int64_t preceding_id = 0;  // 0 = no leader
  std::int64_t following_id = 0;
  double vehicle_length = 0.0;
  VehicleClass vehicle_class = VehicleClass::car;
};

// A maximal contiguous stretch of one driver following one leader in one
// lane, at fixed frame spacing dt.  The three series are aligned per frame;
// gap is bumper-to-bumper and positive everywhere.
struct FollowEpisode {
  std::string episode_id;
  std::int64_t driver_id = 0;
  int lane_id = 0;
  double dt = 0.1;
  std::vector<double> ego_velocity;
  std::vector<double> leader_velocity;
  std::vector<double> gap;
  // Data irregularities hit while building this episode, e.g.
  // "nonpositive_gap" (episode truncated there) or "missing_leader".
  std::vector<std::string> anomalies;

  std::size_t length() const { return ego_velocity.size(); }
};

struct DatasetSummary {
  std::string dataset_name;
  std::size_t episode_count = 0;
  std::size_t driver_count = 0;
  std::size_t total_frames = 0;
  std::map<std::string, std::size_t> anomaly_counts;
};

enum class UnitSystem { feet, meters };

// Maps canonical field names to the CSV's column headers, so differently
// labeled exports of the same trajectory layout all parse.
// Required fields: vehicle_id, frame_index, local_x, local_y, velocity,
// lane_id, preceding_id, vehicle_length.
// Optional: acceleration, following_id, vehicle_class.
struct CsvSchema {
  std::map<std::string, std::string> columns;
  char delimiter = ',';

  // Column mapping matching the public NGSIM trajectory exports.
  static CsvSchema ngsim();
};

// Parse a trajectory CSV into frames sorted by (vehicle_id, frame_index),
// converting feet-based files to meters.  Throws SchemaError when a required
// column is absent and ParseError (with the file line number) on malformed
// cells.  Blank lines are skipped.
std::vector<TrajectoryFrame> parse_csv(const std::filesystem::path& path,
                                       const CsvSchema& schema,
                                       UnitSystem units);

// Cut frames into car-following episodes.  An episode ends on lane change,
// leader change, a frame-index gap, a frame without a leader record, or a
// nonpositive computed gap (the latter truncates the episode just before the
// offending frame and tags it "nonpositive_gap").  Episodes shorter than
// min_length frames are dropped.  Requires min_length >= 2.
std::vector<FollowEpisode> extract_episodes(std::span<const TrajectoryFrame> frames,
                                            std::size_t min_length);

DatasetSummary summarize(std::span<const FollowEpisode> episodes,
                         std::string_view dataset_name = "");

// Episodes grouped by driver, keyed by driver_id (sorted).
std::map<std::int64_t, std::vector<const FollowEpisode*>> group_by_driver(
    std::span<const FollowEpisode> episodes);

}  // namespace drivercal::trajdata
