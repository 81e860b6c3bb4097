#include "drivercal/analysis.hpp"

#include "drivercal/errors.hpp"
#include "drivercal/parallel.hpp"
#include "drivercal/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace drivercal::analysis {

Histogram make_histogram(std::span<const double> values, std::size_t bins) {
  if (bins == 0) throw std::invalid_argument("make_histogram: bins must be > 0");
  Histogram h;
  if (values.empty()) return h;

  const auto [mn_it, mx_it] = std::minmax_element(values.begin(), values.end());
  double lo = *mn_it, hi = *mx_it;
  if (lo == hi) {
    // Degenerate range: a single bin centered on the value.
    h.edges = {lo - 0.5, lo + 0.5};
    h.counts = {values.size()};
    return h;
  }

  h.edges.resize(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i)
    h.edges[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
  h.counts.assign(bins, 0);
  for (double v : values) {
    auto idx = static_cast<std::size_t>(
        (v - lo) / (hi - lo) * static_cast<double>(bins));
    if (idx >= bins) idx = bins - 1;  // top edge inclusive
    ++h.counts[idx];
  }
  return h;
}

DiversityReport diversity_metrics(
    std::span<const trajdata::FollowEpisode> episodes,
    const DiversityOptions& opts) {
  if (episodes.empty()) throw NoDataError("diversity: no episodes");
  if (!(opts.accel_threshold > 0.0))
    throw std::invalid_argument("diversity: accel threshold must be positive");

  DiversityReport report;
  report.options = opts;
  const auto groups = trajdata::group_by_driver(episodes);
  report.total_drivers = groups.size();

  for (const auto& [driver_id, eps] : groups) {
    std::vector<double> accels, decels;
    double min_headway = std::numeric_limits<double>::infinity();

    for (const auto* ep : eps) {
      // Window of one second's worth of frames (>= 1).
      std::size_t window = 1;
      if (opts.window == AccelWindow::per_second)
        window = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::llround(1.0 / ep->dt)));
      const double span_s = static_cast<double>(window) * ep->dt;

      for (std::size_t t = 0; t + window < ep->length(); ++t) {
        const double dv = ep->ego_velocity[t + window] - ep->ego_velocity[t];
        if (dv >= opts.accel_threshold) accels.push_back(dv / span_s);
        if (dv <= -opts.accel_threshold) decels.push_back(dv / span_s);
      }
      for (std::size_t t = 0; t < ep->length(); ++t) {
        if (ep->ego_velocity[t] < opts.standstill_velocity) continue;
        min_headway = std::min(min_headway, ep->gap[t] / ep->ego_velocity[t]);
      }
    }

    if (!accels.empty()) {
      report.acceleration.driver_ids.push_back(driver_id);
      report.acceleration.values.push_back(stats::mean(accels));
    }
    if (!decels.empty()) {
      report.deceleration.driver_ids.push_back(driver_id);
      report.deceleration.values.push_back(stats::mean(decels));
    }
    if (std::isfinite(min_headway) && min_headway <= opts.headway_cap) {
      report.min_headway.driver_ids.push_back(driver_id);
      report.min_headway.values.push_back(min_headway);
    }
  }

  const double total = static_cast<double>(report.total_drivers);
  for (MetricSummary* m :
       {&report.acceleration, &report.deceleration, &report.min_headway}) {
    m->included_fraction = static_cast<double>(m->values.size()) / total;
    m->histogram = make_histogram(m->values, opts.histogram_bins);
  }
  return report;
}

ParamDistributionReport param_distribution(
    const std::map<std::int64_t, calib::CalibrationResult>& per_driver,
    const calib::CalibrationResult& shared,
    const calib::FitNoiseEstimate& noise, std::size_t histogram_bins) {
  if (per_driver.empty()) throw NoDataError("param distribution: no fits");

  ParamDistributionReport report;
  report.shared = calib::to_vector(shared.params);
  for (std::size_t k = 0; k < 5; ++k)
    report.band_halfwidth[k] = 2.0 * noise.param_std[k];

  for (const auto& [driver_id, result] : per_driver) {
    report.driver_ids.push_back(driver_id);
    const auto v = calib::to_vector(result.params);
    for (std::size_t k = 0; k < 5; ++k) report.values[k].push_back(v[k]);
  }

  const double n = static_cast<double>(report.driver_ids.size());
  for (std::size_t k = 0; k < 5; ++k) {
    std::size_t inside = 0;
    for (double v : report.values[k])
      if (std::abs(v - report.shared[k]) <= report.band_halfwidth[k]) ++inside;
    report.in_band_fraction[k] = static_cast<double>(inside) / n;
    report.diverse[k] = report.in_band_fraction[k] < 0.95;
    report.histograms[k] = make_histogram(report.values[k], histogram_bins);
  }
  return report;
}

HalfSplit split_halves(std::span<const trajdata::FollowEpisode> episodes) {
  std::size_t total = 0;
  for (const auto& ep : episodes) total += ep.length();
  const std::size_t half = total / 2;

  auto slice = [](const trajdata::FollowEpisode& ep, std::size_t from,
                  std::size_t to, const char* suffix) {
    trajdata::FollowEpisode out;
    out.episode_id = ep.episode_id + suffix;
    out.driver_id = ep.driver_id;
    out.lane_id = ep.lane_id;
    out.dt = ep.dt;
    out.ego_velocity.assign(ep.ego_velocity.begin() + static_cast<std::ptrdiff_t>(from),
                            ep.ego_velocity.begin() + static_cast<std::ptrdiff_t>(to));
    out.leader_velocity.assign(
        ep.leader_velocity.begin() + static_cast<std::ptrdiff_t>(from),
        ep.leader_velocity.begin() + static_cast<std::ptrdiff_t>(to));
    out.gap.assign(ep.gap.begin() + static_cast<std::ptrdiff_t>(from),
                   ep.gap.begin() + static_cast<std::ptrdiff_t>(to));
    return out;
  };

  HalfSplit split;
  std::size_t seen = 0;
  for (const auto& ep : episodes) {
    const std::size_t len = ep.length();
    if (seen + len <= half) {
      split.first.push_back(ep);
    } else if (seen >= half) {
      split.second.push_back(ep);
    } else {
      const std::size_t cut = half - seen;  // frames belonging to the first half
      if (cut >= 2) split.first.push_back(slice(ep, 0, cut, "_h1"));
      if (len - cut >= 2) split.second.push_back(slice(ep, cut, len, "_h2"));
    }
    seen += len;
  }
  return split;
}

namespace {

DistanceStats summarize_distances(const std::vector<double>& ds) {
  DistanceStats s;
  s.n = ds.size();
  s.mean = stats::mean(ds);
  s.se = stats::standard_error(ds);
  return s;
}

}  // namespace

ConsistencyReport consistency_experiment(
    std::span<const trajdata::FollowEpisode> episodes,
    const calib::SearchSpace& space, std::size_t n_trials, std::uint64_t seed,
    const ConsistencyOptions& opts) {
  if (episodes.empty()) throw NoDataError("consistency: no episodes");
  if (opts.buckets.empty())
    throw std::invalid_argument("consistency: no buckets configured");

  const auto groups = trajdata::group_by_driver(episodes);

  struct DriverWork {
    std::int64_t driver_id = 0;
    std::size_t total_frames = 0;
    HalfSplit halves;
    calib::CalibrationResult fit_first, fit_second, refit_first;
  };

  // Eligibility: enough pooled frames that both halves support a fit.
  std::vector<DriverWork> work;
  for (const auto& [driver_id, eps] : groups) {
    DriverWork w;
    w.driver_id = driver_id;
    std::vector<trajdata::FollowEpisode> own;
    for (const auto* ep : eps) {
      own.push_back(*ep);
      w.total_frames += ep->length();
    }
    if (w.total_frames < 2 * opts.min_half_frames) continue;
    w.halves = split_halves(own);
    if (w.halves.first.empty() || w.halves.second.empty()) continue;
    work.push_back(std::move(w));
  }

  ConsistencyReport report;
  if (work.empty()) {
    report.warnings.push_back("no driver meets the minimum data requirement");
    return report;
  }

  // Three fits per driver: both halves, plus the first half again under a
  // different seed to expose pure optimizer noise.
  parallel_for(work.size(), opts.jobs, [&](std::size_t i) {
    DriverWork& w = work[i];
    const auto id = static_cast<std::uint64_t>(w.driver_id);
    w.fit_first =
        calib::fit(w.halves.first, space, n_trials,
                   derive_seed(seed, 0xa1, id), opts.fit);
    w.fit_second =
        calib::fit(w.halves.second, space, n_trials,
                   derive_seed(seed, 0xa2, id), opts.fit);
    w.refit_first =
        calib::fit(w.halves.first, space, n_trials,
                   derive_seed(seed, 0xa3, id), opts.fit);
  });

  std::optional<std::size_t> longest_bucket;
  std::vector<double> longest_same, longest_cross;

  for (std::size_t b = 0; b < opts.buckets.size(); ++b) {
    const auto [lo, hi] = opts.buckets[b];
    std::vector<const DriverWork*> members;
    for (const auto& w : work)
      if (w.total_frames >= lo && w.total_frames < hi) members.push_back(&w);

    if (members.size() < 2) {
      report.warnings.push_back(
          "bucket [" + std::to_string(lo) + ", " + std::to_string(hi) +
          ") has " + std::to_string(members.size()) +
          " eligible driver(s); skipped");
      continue;
    }

    ConsistencyBucket bucket;
    bucket.min_frames = lo;
    bucket.max_frames = hi;
    bucket.n_drivers = members.size();

    std::vector<double> refit, same, cross, refit_n, same_n, cross_n;
    for (const auto* w : members) {
      refit.push_back(calib::param_distance(w->fit_first.params,
                                            w->refit_first.params));
      refit_n.push_back(calib::param_distance_normalized(
          w->fit_first.params, w->refit_first.params, space));
      same.push_back(
          calib::param_distance(w->fit_first.params, w->fit_second.params));
      same_n.push_back(calib::param_distance_normalized(
          w->fit_first.params, w->fit_second.params, space));
    }

    // Cross-driver distances: seeded sampling of (driver, driver, half, half)
    // tuples, so the estimate is reproducible and cheap even for large
    // buckets.
    auto rng = make_rng(seed, 0xcc, b);
    std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
    std::uniform_int_distribution<int> pick_half(0, 1);
    for (std::size_t k = 0; k < opts.cross_pairs; ++k) {
      std::size_t i = pick(rng);
      std::size_t j = pick(rng);
      while (j == i) j = pick(rng);
      const auto& fi = pick_half(rng) == 0 ? members[i]->fit_first
                                           : members[i]->fit_second;
      const auto& fj = pick_half(rng) == 0 ? members[j]->fit_first
                                           : members[j]->fit_second;
      cross.push_back(calib::param_distance(fi.params, fj.params));
      cross_n.push_back(
          calib::param_distance_normalized(fi.params, fj.params, space));
    }

    bucket.refit = summarize_distances(refit);
    bucket.same_driver = summarize_distances(same);
    bucket.cross_driver = summarize_distances(cross);
    bucket.refit_normalized = summarize_distances(refit_n);
    bucket.same_driver_normalized = summarize_distances(same_n);
    bucket.cross_driver_normalized = summarize_distances(cross_n);

    if (!longest_bucket || lo >= opts.buckets[*longest_bucket].first) {
      longest_bucket = b;
      longest_same = same;
      longest_cross = cross;
    }
    report.buckets.push_back(std::move(bucket));
  }

  if (longest_bucket && longest_same.size() >= 2 && longest_cross.size() >= 2)
    report.longest_bucket_test = stats::welch_t_test(longest_same, longest_cross);
  return report;
}

}  // namespace drivercal::analysis
