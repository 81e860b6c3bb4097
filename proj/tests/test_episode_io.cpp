#include "doctest.h"

#include "drivercal/episode_io.hpp"
#include "drivercal/errors.hpp"

#include "test_util.hpp"

#include <string>

using namespace drivercal;

namespace {

trajdata::FollowEpisode sample_episode(const std::string& id,
                                       std::int64_t driver) {
  trajdata::FollowEpisode ep;
  ep.episode_id = id;
  ep.driver_id = driver;
  ep.lane_id = 3;
  ep.dt = 0.1;
  ep.ego_velocity = {10.0, 10.5, 11.0};
  ep.leader_velocity = {11.0, 11.0, 11.0};
  ep.gap = {8.0, 8.05, 8.1};
  ep.anomalies = {"nonpositive_gap"};
  return ep;
}

}  // namespace

TEST_CASE("episode files round-trip exactly") {
  const auto dir = testutil::scratch_dir("epio_roundtrip");
  episode_io::EpisodeFile file;
  file.dataset_name = "unit";
  file.episodes.push_back(sample_episode("1_100", 1));
  file.episodes.push_back(sample_episode("2_50", 2));
  file.episodes[1].anomalies.clear();

  const auto path = dir / "episodes.json";
  episode_io::write_episodes(path, file);
  const auto back = episode_io::read_episodes(path);

  CHECK(back.dataset_name == "unit");
  REQUIRE(back.episodes.size() == 2);
  const auto& a = back.episodes[0];
  CHECK(a.episode_id == "1_100");
  CHECK(a.driver_id == 1);
  CHECK(a.lane_id == 3);
  CHECK(a.dt == 0.1);
  CHECK(a.ego_velocity == file.episodes[0].ego_velocity);
  CHECK(a.leader_velocity == file.episodes[0].leader_velocity);
  CHECK(a.gap == file.episodes[0].gap);
  CHECK(a.anomalies == std::vector<std::string>{"nonpositive_gap"});
  CHECK(back.episodes[1].anomalies.empty());
}

TEST_CASE("label files round-trip, with and without midpoint params") {
  const auto dir = testutil::scratch_dir("epio_labels");
  synth::GroundTruthLabels labels;
  synth::DriverLabel plain;
  plain.archetype = 1;
  plain.params.v0 = 22.0;
  plain.params.T = 1.1;
  labels[1] = plain;

  synth::DriverLabel resampled = plain;
  resampled.archetype = 0;
  idm::Params second;
  second.v0 = 18.0;
  second.a = 0.9;
  resampled.second_half_params = second;
  labels[7] = resampled;

  const auto path = dir / "labels.json";
  episode_io::write_labels(path, labels);
  const auto back = episode_io::read_labels(path);

  REQUIRE(back.size() == 2);
  CHECK(back.at(1).archetype == 1);
  CHECK(back.at(1).params.v0 == 22.0);
  CHECK(back.at(1).params.T == 1.1);
  CHECK_FALSE(back.at(1).second_half_params.has_value());
  REQUIRE(back.at(7).second_half_params.has_value());
  CHECK(back.at(7).second_half_params->v0 == 18.0);
  CHECK(back.at(7).second_half_params->a == 0.9);
}

TEST_CASE("summary files are written with counts and anomalies") {
  const auto dir = testutil::scratch_dir("epio_summary");
  trajdata::DatasetSummary s;
  s.dataset_name = "unit";
  s.episode_count = 3;
  s.driver_count = 2;
  s.total_frames = 19;
  s.anomaly_counts["missing_leader"] = 1;
  episode_io::write_summary(dir / "summary.json", s);

  const auto text = testutil::read_file(dir / "summary.json");
  CHECK(text.find("\"episode_count\": 3") != std::string::npos);
  CHECK(text.find("\"driver_count\": 2") != std::string::npos);
  CHECK(text.find("\"missing_leader\": 1") != std::string::npos);
  CHECK(text.find("\"format_version\": 1") != std::string::npos);
}

TEST_CASE("unknown format versions are rejected") {
  const auto dir = testutil::scratch_dir("epio_version");
  const auto path = testutil::write_file(
      dir, "episodes.json",
      R"({"format_version": 99, "dataset_name": "x", "episodes": []})");
  CHECK_THROWS_AS(episode_io::read_episodes(path), SchemaError);

  const auto no_version = testutil::write_file(
      dir, "noversion.json", R"({"dataset_name": "x", "episodes": []})");
  CHECK_THROWS_AS(episode_io::read_episodes(no_version), SchemaError);
}

TEST_CASE("malformed JSON raises a parse error, wrong layout a schema error") {
  const auto dir = testutil::scratch_dir("epio_malformed");
  const auto bad = testutil::write_file(dir, "bad.json", "{not json");
  CHECK_THROWS_AS(episode_io::read_episodes(bad), ParseError);

  const auto misaligned = testutil::write_file(
      dir, "misaligned.json",
      R"({"format_version": 1, "dataset_name": "x", "episodes": [
            {"episode_id": "e", "driver_id": 1, "lane_id": 1, "dt": 0.1,
             "ego_velocity": [1, 2], "leader_velocity": [1], "gap": [5, 5]}
          ]})");
  CHECK_THROWS_AS(episode_io::read_episodes(misaligned), SchemaError);

  const auto missing_field = testutil::write_file(
      dir, "missing.json",
      R"({"format_version": 1, "episodes": [{"episode_id": "e"}]})");
  CHECK_THROWS_AS(episode_io::read_episodes(missing_field), SchemaError);

  CHECK_THROWS_AS(episode_io::read_episodes(dir / "does_not_exist.json"),
                  ConfigError);
}
