#include "doctest.h"

#include "drivercal/errors.hpp"
#include "drivercal/trajdata.hpp"

#include "test_util.hpp"

#include <sstream>
#include <string>
#include <vector>

using namespace drivercal;
using doctest::Approx;

namespace {

const char* kHeader =
    "Vehicle_ID,Frame_ID,Local_X,Local_Y,v_Vel,v_Acc,Lane_ID,Preceding,"
    "Following,v_length,v_Class\n";

std::string row(std::int64_t vid, std::int64_t frame, double y, double vel,
                int lane, std::int64_t prec, double len, int cls = 2,
                double x = 0.0, double acc = 0.0, std::int64_t follow = 0) {
  std::ostringstream ss;
  ss << vid << ',' << frame << ',' << x << ',' << y << ',' << vel << ',' << acc
     << ',' << lane << ',' << prec << ',' << follow << ',' << len << ',' << cls
     << '\n';
  return ss.str();
}

std::vector<trajdata::TrajectoryFrame> parse_meters(const std::string& body,
                                                    const std::string& tag) {
  const auto dir = testutil::scratch_dir("trajdata_" + tag);
  const auto path = testutil::write_file(dir, "data.csv", kHeader + body);
  return trajdata::parse_csv(path, trajdata::CsvSchema::ngsim(),
                             trajdata::UnitSystem::meters);
}

}  // namespace

TEST_CASE("feet-based files are converted to meters") {
  const auto dir = testutil::scratch_dir("trajdata_feet");
  const std::string body = row(1, 100, 50.0, 32.8, 2, 9, 10.0);
  const auto path = testutil::write_file(dir, "data.csv", kHeader + body);
  const auto frames = trajdata::parse_csv(path, trajdata::CsvSchema::ngsim(),
                                          trajdata::UnitSystem::feet);
  REQUIRE(frames.size() == 1);
  CHECK(frames[0].velocity == Approx(9.99744).epsilon(1e-12));   // 32.8 ft/s
  CHECK(frames[0].local_y == Approx(15.24).epsilon(1e-12));      // 50 ft
  CHECK(frames[0].vehicle_length == Approx(3.048).epsilon(1e-12));  // 10 ft
}

TEST_CASE("meters-based files pass through unscaled") {
  const auto frames = parse_meters(row(1, 100, 50.0, 20.0, 2, 9, 4.5), "si");
  REQUIRE(frames.size() == 1);
  CHECK(frames[0].velocity == 20.0);
  CHECK(frames[0].local_y == 50.0);
  CHECK(frames[0].vehicle_length == 4.5);
  CHECK(frames[0].vehicle_id == 1);
  CHECK(frames[0].frame_index == 100);
  CHECK(frames[0].lane_id == 2);
  CHECK(frames[0].preceding_id == 9);
  CHECK(frames[0].vehicle_class == trajdata::VehicleClass::car);
}

TEST_CASE("rows are sorted by vehicle then frame") {
  const std::string body = row(2, 101, 10, 1, 1, 0, 4) + row(1, 200, 10, 1, 1, 0, 4) +
                           row(2, 100, 10, 1, 1, 0, 4) + row(1, 199, 10, 1, 1, 0, 4);
  const auto frames = parse_meters(body, "sort");
  REQUIRE(frames.size() == 4);
  CHECK(frames[0].vehicle_id == 1);
  CHECK(frames[0].frame_index == 199);
  CHECK(frames[1].frame_index == 200);
  CHECK(frames[2].vehicle_id == 2);
  CHECK(frames[2].frame_index == 100);
  CHECK(frames[3].frame_index == 101);
}

TEST_CASE("blank lines and trailing carriage returns are tolerated") {
  const auto dir = testutil::scratch_dir("trajdata_crlf");
  const std::string body = "1,100,0,50.0,20.0,0,2,9,0,4.5,2\r\n\r\n"
                           "1,101,0,52.0,20.0,0,2,9,0,4.5,2\r\n";
  const auto path = testutil::write_file(dir, "data.csv", kHeader + body);
  const auto frames = trajdata::parse_csv(path, trajdata::CsvSchema::ngsim(),
                                          trajdata::UnitSystem::meters);
  REQUIRE(frames.size() == 2);
  CHECK(frames[1].local_y == 52.0);
}

TEST_CASE("missing required column raises a schema error naming it") {
  const auto dir = testutil::scratch_dir("trajdata_schema");
  const std::string header_no_vel =
      "Vehicle_ID,Frame_ID,Local_X,Local_Y,v_Acc,Lane_ID,Preceding,"
      "Following,v_length,v_Class\n";
  const auto path = testutil::write_file(dir, "data.csv",
                                         header_no_vel + "1,1,0,0,0,1,0,0,4,2\n");
  try {
    trajdata::parse_csv(path, trajdata::CsvSchema::ngsim(),
                        trajdata::UnitSystem::meters);
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find("v_Vel") != std::string::npos);
  }
}

TEST_CASE("malformed cells raise parse errors carrying the line number") {
  auto expect_parse_error = [](const std::string& body, const char* needle,
                               const std::string& tag) {
    try {
      parse_meters(body, tag);
      FAIL_CHECK("expected ParseError for: " << needle);
    } catch (const ParseError& e) {
      const std::string msg = e.what();
      CHECK(msg.find(needle) != std::string::npos);
      // Data starts on file line 2 (line 1 is the header).
      CHECK(msg.find("line 2") != std::string::npos);
    }
  };

  expect_parse_error("1,100,0,abc,20.0,0,2,9,0,4.5,2\n", "non-numeric", "bad_num");
  expect_parse_error("1,100.7,0,50,20.0,0,2,9,0,4.5,2\n", "non-integer", "bad_int");
  expect_parse_error("1,100,0,50,-3.0,0,2,9,0,4.5,2\n", "negative velocity",
                     "neg_vel");
  expect_parse_error("1,100,0,50,20.0,0,2,9,0,0,2\n", "nonpositive vehicle length",
                     "bad_len");
  expect_parse_error("1,100,0,50,20.0,0,2,9,0,4.5,7\n", "vehicle class",
                     "bad_class");
  expect_parse_error("1,100,0,50\n", "too few columns", "short_row");
}

namespace {

// Leader 9 runs ahead of the ego with a constant 8 m bumper gap: ego at
// y = frame, leader at y = frame + 12 with a 4 m body.
std::string follow_pair(std::int64_t ego, std::int64_t frame, int lane,
                        std::int64_t leader = 9, double gap12 = 12.0) {
  return row(leader, frame, static_cast<double>(frame) + gap12, 11.0, lane, 0, 4.0) +
         row(ego, frame, static_cast<double>(frame), 10.0, lane, leader, 4.2);
}

}  // namespace

TEST_CASE("episodes break on lane change and carry id, series, and gap") {
  std::string body;
  for (std::int64_t t = 100; t <= 105; ++t) body += follow_pair(1, t, 2);
  for (std::int64_t t = 106; t <= 109; ++t) body += follow_pair(1, t, 3);
  const auto frames = parse_meters(body, "lane");
  const auto eps = trajdata::extract_episodes(frames, 3);

  REQUIRE(eps.size() == 2);
  CHECK(eps[0].episode_id == "1_100");
  CHECK(eps[0].driver_id == 1);
  CHECK(eps[0].lane_id == 2);
  CHECK(eps[0].length() == 6);
  CHECK(eps[1].episode_id == "1_106");
  CHECK(eps[1].lane_id == 3);
  CHECK(eps[1].length() == 4);

  for (std::size_t t = 0; t < eps[0].length(); ++t) {
    CHECK(eps[0].ego_velocity[t] == 10.0);
    CHECK(eps[0].leader_velocity[t] == 11.0);
    CHECK(eps[0].gap[t] == Approx(8.0).epsilon(1e-12));  // 12 - 4 m body
  }
  CHECK(eps[0].anomalies.empty());
}

TEST_CASE("episodes break on frame gaps and leader changes") {
  std::string body;
  for (std::int64_t t = 200; t <= 204; ++t) body += follow_pair(2, t, 1);
  for (std::int64_t t = 206; t <= 210; ++t) body += follow_pair(2, t, 1);  // gap
  for (std::int64_t t = 300; t <= 304; ++t) body += follow_pair(3, t, 1, 9);
  for (std::int64_t t = 305; t <= 309; ++t) body += follow_pair(3, t, 1, 8);
  const auto frames = parse_meters(body, "breaks");
  const auto eps = trajdata::extract_episodes(frames, 2);

  REQUIRE(eps.size() == 4);
  CHECK(eps[0].episode_id == "2_200");
  CHECK(eps[0].length() == 5);
  CHECK(eps[1].episode_id == "2_206");
  CHECK(eps[1].length() == 5);
  CHECK(eps[2].episode_id == "3_300");
  CHECK(eps[3].episode_id == "3_305");
}

TEST_CASE("a leader without a record ends the episode with an anomaly tag") {
  std::string body;
  for (std::int64_t t = 300; t <= 303; ++t) body += follow_pair(3, t, 1);
  // Frames 304-305: ego still claims leader 9, but 9 has no record.
  body += row(3, 304, 304.0, 10.0, 1, 9, 4.2);
  body += row(3, 305, 305.0, 10.0, 1, 9, 4.2);
  const auto frames = parse_meters(body, "missing_leader");
  const auto eps = trajdata::extract_episodes(frames, 2);

  REQUIRE(eps.size() == 1);
  CHECK(eps[0].length() == 4);
  REQUIRE(eps[0].anomalies.size() == 1);
  CHECK(eps[0].anomalies[0] == "missing_leader");
}

TEST_CASE("a nonpositive computed gap truncates the episode") {
  std::string body;
  for (std::int64_t t = 400; t <= 403; ++t) body += follow_pair(4, t, 1);
  // Overlapping records: leader body longer than the spacing.
  for (std::int64_t t = 404; t <= 406; ++t) body += follow_pair(4, t, 1, 9, 3.0);
  const auto frames = parse_meters(body, "overlap");
  const auto eps = trajdata::extract_episodes(frames, 2);

  REQUIRE(eps.size() == 1);
  CHECK(eps[0].length() == 4);
  REQUIRE(eps[0].anomalies.size() == 1);
  CHECK(eps[0].anomalies[0] == "nonpositive_gap");
}

TEST_CASE("short episodes are dropped and min_length is validated") {
  std::string body;
  for (std::int64_t t = 100; t <= 102; ++t) body += follow_pair(1, t, 1);
  const auto frames = parse_meters(body, "minlen");
  CHECK(trajdata::extract_episodes(frames, 3).size() == 1);
  CHECK(trajdata::extract_episodes(frames, 4).empty());
  CHECK_THROWS_AS(trajdata::extract_episodes(frames, 1), std::invalid_argument);
}

TEST_CASE("vehicles without a leader produce no episodes") {
  std::string body;
  for (std::int64_t t = 100; t <= 110; ++t)
    body += row(6, t, static_cast<double>(t), 10.0, 1, 0, 4.0);
  const auto frames = parse_meters(body, "noleader");
  CHECK(trajdata::extract_episodes(frames, 2).empty());
}

TEST_CASE("summarize and group_by_driver aggregate the episode set") {
  std::string body;
  for (std::int64_t t = 100; t <= 109; ++t) body += follow_pair(1, t, 2);
  for (std::int64_t t = 200; t <= 204; ++t) body += follow_pair(2, t, 1);
  for (std::int64_t t = 300; t <= 303; ++t) body += follow_pair(2, t, 1);
  body += row(2, 304, 304.0, 10.0, 1, 9, 4.2);  // leader record missing
  const auto frames = parse_meters(body, "summary");
  const auto eps = trajdata::extract_episodes(frames, 2);
  REQUIRE(eps.size() == 3);

  const auto s = trajdata::summarize(eps, "unit");
  CHECK(s.dataset_name == "unit");
  CHECK(s.episode_count == 3);
  CHECK(s.driver_count == 2);
  CHECK(s.total_frames == 10 + 5 + 4);
  REQUIRE(s.anomaly_counts.count("missing_leader") == 1);
  CHECK(s.anomaly_counts.at("missing_leader") == 1);

  const auto groups = trajdata::group_by_driver(eps);
  REQUIRE(groups.size() == 2);
  CHECK(groups.at(1).size() == 1);
  CHECK(groups.at(2).size() == 2);
  CHECK(groups.at(2)[0]->episode_id == "2_200");
  CHECK(groups.at(2)[1]->episode_id == "2_300");
}
