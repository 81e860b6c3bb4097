#include "drivercal/episode_io.hpp"

#include "drivercal/errors.hpp"

#include "json.hpp"

#include <fstream>

namespace drivercal::episode_io {

using nlohmann::json;

namespace {

json dump_params(const idm::Params& p) {
  return json{{"v0", p.v0}, {"s0", p.s0}, {"T", p.T},
              {"a", p.a},   {"b", p.b},   {"delta", p.delta}};
}

idm::Params load_params(const json& j) {
  idm::Params p;
  p.v0 = j.at("v0").get<double>();
  p.s0 = j.at("s0").get<double>();
  p.T = j.at("T").get<double>();
  p.a = j.at("a").get<double>();
  p.b = j.at("b").get<double>();
  if (j.contains("delta")) p.delta = j.at("delta").get<double>();
  return p;
}

json read_document(const std::filesystem::path& path, const char* what) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError(std::string("cannot open ") + what + " file: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed ") + what + " file " + path.string() +
                     ": " + e.what());
  }
  if (!j.is_object() || !j.contains("format_version"))
    throw SchemaError(std::string(what) + " file " + path.string() +
                      " lacks a format_version field");
  if (j.at("format_version").get<int>() != kFormatVersion)
    throw SchemaError(std::string("unsupported ") + what + " format_version in " +
                      path.string());
  return j;
}

void write_document(const std::filesystem::path& path, const json& j,
                    const char* what) {
  std::ofstream out(path);
  if (!out)
    throw ConfigError(std::string("cannot write ") + what + " file: " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace

void write_episodes(const std::filesystem::path& path, const EpisodeFile& file) {
  json eps = json::array();
  for (const auto& ep : file.episodes) {
    eps.push_back(json{{"episode_id", ep.episode_id},
                       {"driver_id", ep.driver_id},
                       {"lane_id", ep.lane_id},
                       {"dt", ep.dt},
                       {"ego_velocity", ep.ego_velocity},
                       {"leader_velocity", ep.leader_velocity},
                       {"gap", ep.gap},
                       {"anomalies", ep.anomalies}});
  }
  write_document(path,
                 json{{"format_version", kFormatVersion},
                      {"dataset_name", file.dataset_name},
                      {"episodes", std::move(eps)}},
                 "episode");
}

EpisodeFile read_episodes(const std::filesystem::path& path) {
  const json j = read_document(path, "episode");
  EpisodeFile file;
  try {
    file.dataset_name = j.value("dataset_name", "");
    for (const auto& je : j.at("episodes")) {
      trajdata::FollowEpisode ep;
      ep.episode_id = je.at("episode_id").get<std::string>();
      ep.driver_id = je.at("driver_id").get<std::int64_t>();
      ep.lane_id = je.at("lane_id").get<int>();
      ep.dt = je.at("dt").get<double>();
      ep.ego_velocity = je.at("ego_velocity").get<std::vector<double>>();
      ep.leader_velocity = je.at("leader_velocity").get<std::vector<double>>();
      ep.gap = je.at("gap").get<std::vector<double>>();
      if (je.contains("anomalies"))
        ep.anomalies = je.at("anomalies").get<std::vector<std::string>>();
      if (ep.ego_velocity.size() != ep.leader_velocity.size() ||
          ep.ego_velocity.size() != ep.gap.size())
        throw SchemaError("episode " + ep.episode_id +
                          " has misaligned series lengths in " + path.string());
      file.episodes.push_back(std::move(ep));
    }
  } catch (const json::exception& e) {
    throw SchemaError("episode file " + path.string() +
                      " does not match the expected layout: " + e.what());
  }
  return file;
}

void write_labels(const std::filesystem::path& path,
                  const synth::GroundTruthLabels& labels) {
  json drivers = json::object();
  for (const auto& [driver_id, label] : labels) {
    json jl{{"archetype", label.archetype}, {"params", dump_params(label.params)}};
    if (label.second_half_params)
      jl["second_half_params"] = dump_params(*label.second_half_params);
    drivers[std::to_string(driver_id)] = std::move(jl);
  }
  write_document(path,
                 json{{"format_version", kFormatVersion},
                      {"drivers", std::move(drivers)}},
                 "label");
}

synth::GroundTruthLabels read_labels(const std::filesystem::path& path) {
  const json j = read_document(path, "label");
  synth::GroundTruthLabels labels;
  try {
    for (const auto& [key, jl] : j.at("drivers").items()) {
      synth::DriverLabel label;
      label.archetype = jl.at("archetype").get<std::size_t>();
      label.params = load_params(jl.at("params"));
      if (jl.contains("second_half_params"))
        label.second_half_params = load_params(jl.at("second_half_params"));
      labels.emplace(std::stoll(key), std::move(label));
    }
  } catch (const json::exception& e) {
    throw SchemaError("label file " + path.string() +
                      " does not match the expected layout: " + e.what());
  }
  return labels;
}

void write_summary(const std::filesystem::path& path,
                   const trajdata::DatasetSummary& summary) {
  write_document(path,
                 json{{"format_version", kFormatVersion},
                      {"dataset_name", summary.dataset_name},
                      {"episode_count", summary.episode_count},
                      {"driver_count", summary.driver_count},
                      {"total_frames", summary.total_frames},
                      {"anomaly_counts", summary.anomaly_counts}},
                 "summary");
}

}  // namespace drivercal::episode_io
