#include "doctest.h"

#include "drivercal/analysis.hpp"
#include "drivercal/errors.hpp"
#include "drivercal/synth.hpp"

#include "test_util.hpp"

#include <cmath>
#include <string>
#include <vector>

using namespace drivercal;
using doctest::Approx;

TEST_CASE("histograms bin uniformly with an inclusive top edge") {
  const std::vector<double> values{0.0, 1.0, 2.0, 3.0};
  const auto h = analysis::make_histogram(values, 2);
  REQUIRE(h.edges.size() == 3);
  CHECK(h.edges[0] == 0.0);
  CHECK(h.edges[1] == Approx(1.5));
  CHECK(h.edges[2] == 3.0);
  REQUIRE(h.counts.size() == 2);
  CHECK(h.counts[0] == 2);  // 0, 1
  CHECK(h.counts[1] == 2);  // 2, and 3 lands in the last bin inclusively

  const std::vector<double> flat(7, 5.0);
  const auto d = analysis::make_histogram(flat, 4);
  REQUIRE(d.counts.size() == 1);
  CHECK(d.counts[0] == 7);
  CHECK(d.edges[0] == Approx(4.5));
  CHECK(d.edges[1] == Approx(5.5));

  const auto empty = analysis::make_histogram(std::vector<double>{}, 5);
  CHECK(empty.counts.empty());
  CHECK(empty.edges.empty());

  CHECK_THROWS_AS(analysis::make_histogram(values, 0), std::invalid_argument);
}

namespace {

trajdata::FollowEpisode ramp_episode(std::int64_t driver, double v0,
                                     double per_frame, std::size_t frames,
                                     double gap) {
  trajdata::FollowEpisode ep;
  ep.episode_id = std::to_string(driver) + "_0";
  ep.driver_id = driver;
  ep.dt = 0.1;
  for (std::size_t t = 0; t < frames; ++t) {
    ep.ego_velocity.push_back(v0 + per_frame * static_cast<double>(t));
    ep.leader_velocity.push_back(v0);
    ep.gap.push_back(gap);
  }
  return ep;
}

}  // namespace

TEST_CASE("diversity metrics: qualifying windows, caps, and inclusion") {
  // Driver 1 speeds up 0.25 m/s per frame: every one-second window gains
  // 2.5 m/s and qualifies as an acceleration event.
  // Driver 2 slows down symmetrically; its wide gap fails the headway cap.
  // Driver 3 cruises: no events, but a comfortable headway.
  std::vector<trajdata::FollowEpisode> eps;
  eps.push_back(ramp_episode(1, 10.0, 0.25, 20, 30.0));
  eps.push_back(ramp_episode(2, 20.0, -0.25, 20, 120.0));
  eps.push_back(ramp_episode(3, 15.0, 0.0, 20, 30.0));

  const auto report = analysis::diversity_metrics(eps);
  CHECK(report.total_drivers == 3);

  REQUIRE(report.acceleration.driver_ids == std::vector<std::int64_t>{1});
  CHECK(report.acceleration.values[0] == Approx(2.5).epsilon(1e-12));
  CHECK(report.acceleration.included_fraction == Approx(1.0 / 3.0));

  REQUIRE(report.deceleration.driver_ids == std::vector<std::int64_t>{2});
  CHECK(report.deceleration.values[0] == Approx(-2.5).epsilon(1e-12));
  CHECK(report.deceleration.included_fraction == Approx(1.0 / 3.0));

  // Driver 1: minimum headway at the top speed; driver 2 excluded because
  // even its best headway exceeds the 5 s cap; driver 3 at 30/15 = 2 s.
  REQUIRE(report.min_headway.driver_ids == std::vector<std::int64_t>{1, 3});
  CHECK(report.min_headway.values[0] == Approx(30.0 / 14.75).epsilon(1e-12));
  CHECK(report.min_headway.values[1] == Approx(2.0).epsilon(1e-12));
  CHECK(report.min_headway.included_fraction == Approx(2.0 / 3.0));
}

TEST_CASE("diversity metrics: per-frame window and standstill skipping") {
  // One abrupt 2.5 m/s jump between consecutive frames.
  trajdata::FollowEpisode jump;
  jump.driver_id = 4;
  jump.dt = 0.1;
  jump.ego_velocity = {10.0, 10.0, 12.5, 12.5, 12.5};
  jump.leader_velocity.assign(5, 10.0);
  jump.gap.assign(5, 25.0);

  analysis::DiversityOptions opts;
  opts.window = analysis::AccelWindow::per_frame;
  const std::vector<trajdata::FollowEpisode> eps{jump};
  const auto report = analysis::diversity_metrics(eps, opts);
  REQUIRE(report.acceleration.values.size() == 1);
  CHECK(report.acceleration.values[0] == Approx(25.0).epsilon(1e-12));

  // Near-standstill frames are skipped for headway, so a tiny gap at
  // crawling speed does not dominate the metric.
  trajdata::FollowEpisode crawl;
  crawl.driver_id = 5;
  crawl.dt = 0.1;
  crawl.ego_velocity = {0.05, 10.0, 10.0};
  crawl.leader_velocity.assign(3, 10.0);
  crawl.gap = {0.01, 20.0, 20.0};
  const std::vector<trajdata::FollowEpisode> eps2{crawl};
  const auto r2 = analysis::diversity_metrics(eps2);
  REQUIRE(r2.min_headway.values.size() == 1);
  CHECK(r2.min_headway.values[0] == Approx(2.0).epsilon(1e-12));

  CHECK_THROWS_AS(
      analysis::diversity_metrics(std::vector<trajdata::FollowEpisode>{}),
      NoDataError);
}

TEST_CASE("two behavioral archetypes produce a bimodal acceleration histogram") {
  synth::PopulationSpec spec;
  idm::Params eager;
  eager.v0 = 24.0;
  eager.T = 1.0;
  eager.a = 2.5;
  eager.b = 2.5;
  idm::Params timid = eager;
  timid.a = 0.8;
  timid.T = 1.8;
  spec.archetypes = {{eager, 0.5}, {timid, 0.5}};
  spec.leader.kind = synth::LeaderKind::stop_and_go;
  spec.leader.cruise = 22.0;
  spec.n_drivers = 60;
  spec.frames_per_driver = {700};
  spec.action_noise_std = 0.15;
  spec.seed = 400;

  const auto pop = synth::generate(spec);
  analysis::DiversityOptions opts;
  opts.histogram_bins = 15;
  // The timid archetype tops out at 0.8 m/s^2, so a threshold below that
  // keeps both groups in the metric and the histogram bimodal.
  opts.accel_threshold = 0.5;
  const auto report = analysis::diversity_metrics(pop.episodes, opts);
  REQUIRE(report.acceleration.values.size() > 40);

  // Two local maxima separated by at least two bins.
  const auto& counts = report.acceleration.histogram.counts;
  std::vector<std::size_t> peaks;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const std::size_t left = i == 0 ? 0 : counts[i - 1];
    const std::size_t right = i + 1 == counts.size() ? 0 : counts[i + 1];
    if (counts[i] > left && counts[i] >= right && counts[i] >= 3)
      peaks.push_back(i);
  }
  REQUIRE(peaks.size() >= 2);
  CHECK(peaks.back() - peaks.front() >= 2);
}

namespace {

calib::CalibrationResult result_with_v0(double v0) {
  calib::CalibrationResult r;
  r.params.v0 = v0;
  r.params.s0 = 2.0;
  r.params.T = 1.5;
  r.params.a = 1.5;
  r.params.b = 2.0;
  return r;
}

}  // namespace

TEST_CASE("parameter distribution: in-band fractions against the noise band") {
  std::map<std::int64_t, calib::CalibrationResult> per_driver;
  // Eight drivers inside shared v0 = 20 +/- 1.0, two well outside.
  const std::vector<double> v0s{19.2, 19.5, 19.8, 20.0, 20.2, 20.5,
                                20.8, 21.0, 24.0, 16.0};
  for (std::size_t i = 0; i < v0s.size(); ++i)
    per_driver[static_cast<std::int64_t>(i + 1)] = result_with_v0(v0s[i]);

  const calib::CalibrationResult shared = result_with_v0(20.0);
  calib::FitNoiseEstimate noise;
  noise.param_std = {0.5, 0.1, 0.05, 0.05, 0.1};  // band halfwidth = 2x this

  const auto report = analysis::param_distribution(per_driver, shared, noise);
  CHECK(report.driver_ids.size() == 10);
  CHECK(report.shared[0] == 20.0);
  CHECK(report.band_halfwidth[0] == Approx(1.0).epsilon(1e-12));

  // v0: 21.0 sits exactly on the band edge and still counts as inside.
  CHECK(report.in_band_fraction[0] == Approx(0.8).epsilon(1e-12));
  CHECK(report.diverse[0]);

  // Every other parameter is identical across drivers: fully in band.
  for (std::size_t k = 1; k < 5; ++k) {
    CHECK(report.in_band_fraction[k] == 1.0);
    CHECK_FALSE(report.diverse[k]);
  }
  CHECK(report.histograms[0].counts.size() > 0);

  CHECK_THROWS_AS(
      analysis::param_distribution({}, shared, noise), NoDataError);
}

TEST_CASE("half splits cut at the pooled frame midpoint") {
  const idm::Params p;  // defaults are fine for fixture data

  SUBCASE("single episode splits into labeled halves") {
    std::vector<double> lead(100, 15.0);
    const auto ep = testutil::episode_from_rollout(p, {14.0, 30.0}, lead, 0.1,
                                                   "7_0", 7);
    const std::vector<trajdata::FollowEpisode> eps{ep};
    const auto halves = analysis::split_halves(eps);
    REQUIRE(halves.first.size() == 1);
    REQUIRE(halves.second.size() == 1);
    CHECK(halves.first[0].episode_id == "7_0_h1");
    CHECK(halves.second[0].episode_id == "7_0_h2");
    CHECK(halves.first[0].length() == 50);
    CHECK(halves.second[0].length() == 50);
    CHECK(halves.first[0].ego_velocity[0] == ep.ego_velocity[0]);
    CHECK(halves.second[0].ego_velocity[0] == ep.ego_velocity[50]);
    CHECK(halves.second[0].gap[0] == ep.gap[50]);
    CHECK(halves.first[0].driver_id == 7);
  }

  SUBCASE("straddling episodes are cut, whole ones assigned") {
    std::vector<double> lead30(30, 15.0), lead70(70, 15.0);
    const auto a =
        testutil::episode_from_rollout(p, {14.0, 30.0}, lead30, 0.1, "9_0", 9);
    const auto b =
        testutil::episode_from_rollout(p, {14.0, 30.0}, lead70, 0.1, "9_30", 9);
    const std::vector<trajdata::FollowEpisode> eps{a, b};
    const auto halves = analysis::split_halves(eps);  // midpoint at frame 50
    REQUIRE(halves.first.size() == 2);
    REQUIRE(halves.second.size() == 1);
    CHECK(halves.first[0].length() == 30);
    CHECK(halves.first[1].length() == 20);
    CHECK(halves.first[1].episode_id == "9_30_h1");
    CHECK(halves.second[0].length() == 50);
    CHECK(halves.second[0].episode_id == "9_30_h2");
  }

  SUBCASE("fragments shorter than two frames are dropped") {
    std::vector<double> lead3(3, 15.0), lead2(2, 15.0);
    const auto a =
        testutil::episode_from_rollout(p, {14.0, 30.0}, lead3, 0.1, "4_0", 4);
    const auto b =
        testutil::episode_from_rollout(p, {14.0, 30.0}, lead2, 0.1, "4_3", 4);
    const std::vector<trajdata::FollowEpisode> eps{a, b};
    const auto halves = analysis::split_halves(eps);  // midpoint at frame 2
    REQUIRE(halves.first.size() == 1);
    CHECK(halves.first[0].length() == 2);
    REQUIRE(halves.second.size() == 1);  // 1-frame tail of episode a dropped
    CHECK(halves.second[0].length() == 2);
  }
}

namespace {

std::vector<trajdata::FollowEpisode> consistency_population(std::uint64_t seed) {
  synth::PopulationSpec spec;
  idm::Params p;
  p.v0 = 23.0;
  p.T = 1.4;
  p.a = 1.6;
  p.b = 2.0;
  spec.archetypes = {{p, 1.0}};
  spec.leader.kind = synth::LeaderKind::stop_and_go;
  spec.leader.cruise = 25.0;
  spec.n_drivers = 6;
  spec.frames_per_driver = {240, 700};  // alternates short / long drivers
  spec.action_noise_std = 0.25;
  spec.seed = seed;
  return synth::generate(spec).episodes;
}

analysis::ConsistencyOptions small_consistency_options() {
  analysis::ConsistencyOptions opts;
  opts.buckets = {{100, 500}, {500, 1000000}};
  opts.cross_pairs = 100;
  opts.min_half_frames = 50;
  return opts;
}

}  // namespace

TEST_CASE("consistency experiment: bucket structure and determinism") {
  const auto eps = consistency_population(80);
  const auto opts = small_consistency_options();
  const auto report =
      analysis::consistency_experiment(eps, calib::SearchSpace{}, 60, 13, opts);

  REQUIRE(report.buckets.size() == 2);
  CHECK(report.warnings.empty());
  for (const auto& bucket : report.buckets) {
    CHECK(bucket.n_drivers == 3);
    CHECK(bucket.refit.n == 3);
    CHECK(bucket.same_driver.n == 3);
    CHECK(bucket.cross_driver.n == 100);
    CHECK(bucket.refit.mean >= 0.0);
    CHECK(bucket.same_driver.mean >= 0.0);
    CHECK(bucket.cross_driver.mean > 0.0);
    // Search-space ranges all exceed one unit, so normalizing shrinks L2.
    CHECK(bucket.same_driver_normalized.mean <= bucket.same_driver.mean);
    CHECK(bucket.cross_driver_normalized.mean <= bucket.cross_driver.mean);
  }
  CHECK(report.buckets[0].min_frames == 100);
  CHECK(report.buckets[1].min_frames == 500);

  REQUIRE(report.longest_bucket_test.has_value());
  CHECK(report.longest_bucket_test->n1 == 3);
  CHECK(report.longest_bucket_test->n2 == 100);

  const auto again =
      analysis::consistency_experiment(eps, calib::SearchSpace{}, 60, 13, opts);
  REQUIRE(again.buckets.size() == report.buckets.size());
  for (std::size_t b = 0; b < report.buckets.size(); ++b) {
    CHECK(again.buckets[b].same_driver.mean == report.buckets[b].same_driver.mean);
    CHECK(again.buckets[b].cross_driver.mean ==
          report.buckets[b].cross_driver.mean);
    CHECK(again.buckets[b].refit.mean == report.buckets[b].refit.mean);
  }
  CHECK(again.longest_bucket_test->t == report.longest_bucket_test->t);
}

TEST_CASE("consistency experiment: warnings for starved buckets") {
  const auto eps = consistency_population(81);
  auto opts = small_consistency_options();
  opts.buckets = {{100, 500}, {500, 1000000}, {2000000, 3000000}};
  const auto report =
      analysis::consistency_experiment(eps, calib::SearchSpace{}, 40, 5, opts);
  CHECK(report.buckets.size() == 2);
  REQUIRE(report.warnings.size() == 1);
  CHECK(report.warnings[0].find("skipped") != std::string::npos);

  // Raising the eligibility floor above every driver empties the experiment.
  opts = small_consistency_options();
  opts.min_half_frames = 5000;
  const auto starved =
      analysis::consistency_experiment(eps, calib::SearchSpace{}, 40, 5, opts);
  CHECK(starved.buckets.empty());
  CHECK_FALSE(starved.longest_bucket_test.has_value());
  REQUIRE(starved.warnings.size() == 1);
  CHECK(starved.warnings[0].find("minimum data requirement") !=
        std::string::npos);

  CHECK_THROWS_AS(
      analysis::consistency_experiment(std::vector<trajdata::FollowEpisode>{},
                                       calib::SearchSpace{}, 40, 5, opts),
      NoDataError);
  auto no_buckets = small_consistency_options();
  no_buckets.buckets.clear();
  CHECK_THROWS_AS(analysis::consistency_experiment(eps, calib::SearchSpace{},
                                                   40, 5, no_buckets),
                  std::invalid_argument);
}
