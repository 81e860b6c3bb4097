#include "drivercal/trajdata.hpp"

#include "drivercal/errors.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace drivercal::trajdata {

namespace {

const char* const kRequiredFields[] = {
    "vehicle_id", "frame_index", "local_x",      "local_y",
    "velocity",   "lane_id",     "preceding_id", "vehicle_length",
};

std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, delim)) cells.push_back(cell);
  if (!line.empty() && line.back() == delim) cells.emplace_back();
  return cells;
}

std::string strip(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t'))
    s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
  return s.substr(i);
}

double parse_double(const std::string& cell, std::size_t line_no,
                    const std::string& column) {
  const std::string s = strip(cell);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw ParseError("line " + std::to_string(line_no) + ": non-numeric value '" +
                     cell + "' in column '" + column + "'");
  return value;
}

std::int64_t parse_int(const std::string& cell, std::size_t line_no,
                       const std::string& column) {
  const double v = parse_double(cell, line_no, column);
  const auto i = static_cast<std::int64_t>(v);
  if (static_cast<double>(i) != v)
    throw ParseError("line " + std::to_string(line_no) + ": non-integer value '" +
                     cell + "' in column '" + column + "'");
  return i;
}

VehicleClass parse_class(std::int64_t code, std::size_t line_no) {
  switch (code) {
    case 1: return VehicleClass::motorcycle;
    case 2: return VehicleClass::car;
    case 3: return VehicleClass::truck;
    default:
      throw ParseError("line " + std::to_string(line_no) +
                       ": unknown vehicle class code " + std::to_string(code));
  }
}

}  // namespace

CsvSchema CsvSchema::ngsim() {
  CsvSchema s;
  s.columns = {
      {"vehicle_id", "Vehicle_ID"}, {"frame_index", "Frame_ID"},
      {"local_x", "Local_X"},       {"local_y", "Local_Y"},
      {"velocity", "v_Vel"},        {"acceleration", "v_Acc"},
      {"lane_id", "Lane_ID"},       {"preceding_id", "Preceding"},
      {"following_id", "Following"}, {"vehicle_length", "v_length"},
      {"vehicle_class", "v_Class"},
  };
  return s;
}

std::vector<TrajectoryFrame> parse_csv(const std::filesystem::path& path,
                                       const CsvSchema& schema,
                                       UnitSystem units) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open trajectory file: " + path.string());

  std::string line;
  std::size_t line_no = 0;

  // Header: resolve canonical field -> column index.
  if (!std::getline(in, line)) return {};
  ++line_no;
  const auto headers = split_line(line, schema.delimiter);
  std::unordered_map<std::string, std::size_t> header_index;
  for (std::size_t i = 0; i < headers.size(); ++i)
    header_index.emplace(strip(headers[i]), i);

  std::unordered_map<std::string, std::size_t> col;  // canonical -> index
  for (const auto& [field, name] : schema.columns) {
    const auto it = header_index.find(name);
    if (it != header_index.end()) col[field] = it->second;
  }
  for (const char* field : kRequiredFields) {
    if (col.count(field)) continue;
    const auto mapped = schema.columns.find(field);
    const std::string name =
        mapped == schema.columns.end() ? "<unmapped>" : mapped->second;
    throw SchemaError("missing required column '" + name + "' (field " + field +
                      ") in " + path.string());
  }

  const double scale = units == UnitSystem::feet ? kFeetToMeters : 1.0;
  const bool has_acc = col.count("acceleration") > 0;
  const bool has_follow = col.count("following_id") > 0;
  const bool has_class = col.count("vehicle_class") > 0;

  std::vector<TrajectoryFrame> frames;
  while (std::getline(in, line)) {
    ++line_no;
    if (strip(line).empty()) continue;
    const auto cells = split_line(line, schema.delimiter);
    auto cell = [&](const std::string& field) -> const std::string& {
      const std::size_t idx = col.at(field);
      if (idx >= cells.size())
        throw ParseError("line " + std::to_string(line_no) +
                         ": row has too few columns");
      return cells[idx];
    };

    TrajectoryFrame f;
    f.vehicle_id = parse_int(cell("vehicle_id"), line_no, "vehicle_id");
    f.frame_index = parse_int(cell("frame_index"), line_no, "frame_index");
    f.local_x = parse_double(cell("local_x"), line_no, "local_x") * scale;
    f.local_y = parse_double(cell("local_y"), line_no, "local_y") * scale;
    f.velocity = parse_double(cell("velocity"), line_no, "velocity") * scale;
    f.lane_id = static_cast<int>(parse_int(cell("lane_id"), line_no, "lane_id"));
    f.preceding_id = parse_int(cell("preceding_id"), line_no, "preceding_id");
    f.vehicle_length =
        parse_double(cell("vehicle_length"), line_no, "vehicle_length") * scale;
    if (has_acc)
      f.acceleration = parse_double(cell("acceleration"), line_no, "acceleration") * scale;
    if (has_follow)
      f.following_id = parse_int(cell("following_id"), line_no, "following_id");
    if (has_class)
      f.vehicle_class = parse_class(
          parse_int(cell("vehicle_class"), line_no, "vehicle_class"), line_no);

    if (f.velocity < 0.0)
      throw ParseError("line " + std::to_string(line_no) + ": negative velocity");
    if (!(f.vehicle_length > 0.0))
      throw ParseError("line " + std::to_string(line_no) +
                       ": nonpositive vehicle length");
    frames.push_back(f);
  }

  std::sort(frames.begin(), frames.end(),
            [](const TrajectoryFrame& a, const TrajectoryFrame& b) {
              if (a.vehicle_id != b.vehicle_id) return a.vehicle_id < b.vehicle_id;
              return a.frame_index < b.frame_index;
            });
  return frames;
}

namespace {

struct EpisodeBuilder {
  std::int64_t driver_id = 0;
  int lane_id = 0;
  std::int64_t leader_id = 0;
  std::int64_t first_frame = 0;
  std::int64_t last_frame = 0;
  FollowEpisode ep;
  bool open = false;

  void start(const TrajectoryFrame& f) {
    ep = FollowEpisode{};
    driver_id = f.vehicle_id;
    lane_id = f.lane_id;
    leader_id = f.preceding_id;
    first_frame = f.frame_index;
    open = true;
  }

  void append(const TrajectoryFrame& ego, const TrajectoryFrame& leader,
              double gap) {
    ep.ego_velocity.push_back(ego.velocity);
    ep.leader_velocity.push_back(leader.velocity);
    ep.gap.push_back(gap);
    last_frame = ego.frame_index;
  }

  void close(std::vector<FollowEpisode>& out, std::size_t min_length,
             const char* anomaly = nullptr) {
    if (!open) return;
    open = false;
    if (anomaly) ep.anomalies.emplace_back(anomaly);
    if (ep.length() < min_length) return;
    ep.episode_id =
        std::to_string(driver_id) + "_" + std::to_string(first_frame);
    ep.driver_id = driver_id;
    ep.lane_id = lane_id;
    out.push_back(std::move(ep));
  }
};

}  // namespace

std::vector<FollowEpisode> extract_episodes(std::span<const TrajectoryFrame> frames,
                                            std::size_t min_length) {
  if (min_length < 2)
    throw std::invalid_argument("extract_episodes: min_length must be >= 2");

  // Leader lookup: (vehicle, frame) -> record.
  std::unordered_map<std::int64_t, std::unordered_map<std::int64_t, const TrajectoryFrame*>>
      by_vehicle_frame;
  for (const auto& f : frames) by_vehicle_frame[f.vehicle_id][f.frame_index] = &f;

  std::vector<FollowEpisode> out;
  EpisodeBuilder cur;

  for (std::size_t i = 0; i < frames.size(); ++i) {
    const TrajectoryFrame& f = frames[i];

    if (cur.open && f.vehicle_id != cur.driver_id) cur.close(out, min_length);

    if (f.preceding_id == 0) {
      cur.close(out, min_length);
      continue;
    }

    if (cur.open) {
      const bool broke = f.lane_id != cur.lane_id ||
                         f.preceding_id != cur.leader_id ||
                         f.frame_index != cur.last_frame + 1;
      if (broke) cur.close(out, min_length);
    }

    const TrajectoryFrame* leader = nullptr;
    const auto vit = by_vehicle_frame.find(f.preceding_id);
    if (vit != by_vehicle_frame.end()) {
      const auto fit = vit->second.find(f.frame_index);
      if (fit != vit->second.end()) leader = fit->second;
    }
    if (leader == nullptr) {
      // Leader exists per the ego record but has no frame here; not a hard
      // error in recorded data, just a boundary.
      cur.close(out, min_length, "missing_leader");
      continue;
    }

    const double gap = leader->local_y - f.local_y - leader->vehicle_length;
    if (gap <= 0.0) {
      // Overlapping records; cut just before the bad frame and move on.
      cur.close(out, min_length, "nonpositive_gap");
      continue;
    }

    if (!cur.open) cur.start(f);
    cur.append(f, *leader, gap);
  }
  cur.close(out, min_length);
  return out;
}

DatasetSummary summarize(std::span<const FollowEpisode> episodes,
                         std::string_view dataset_name) {
  DatasetSummary s;
  s.dataset_name = std::string(dataset_name);
  s.episode_count = episodes.size();
  std::vector<std::int64_t> drivers;
  for (const auto& ep : episodes) {
    drivers.push_back(ep.driver_id);
    s.total_frames += ep.length();
    for (const auto& a : ep.anomalies) ++s.anomaly_counts[a];
  }
  std::sort(drivers.begin(), drivers.end());
  s.driver_count = static_cast<std::size_t>(
      std::unique(drivers.begin(), drivers.end()) - drivers.begin());
  return s;
}

std::map<std::int64_t, std::vector<const FollowEpisode*>> group_by_driver(
    std::span<const FollowEpisode> episodes) {
  std::map<std::int64_t, std::vector<const FollowEpisode*>> groups;
  for (const auto& ep : episodes) groups[ep.driver_id].push_back(&ep);
  return groups;
}

}  // namespace drivercal::trajdata
