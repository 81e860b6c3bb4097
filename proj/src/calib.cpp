#include "drivercal/calib.hpp"

#include "drivercal/errors.hpp"
#include "drivercal/parallel.hpp"
#include "drivercal/rng.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <stdexcept>

namespace drivercal::calib {

namespace {

constexpr std::uint64_t kDriverFitStream = 0xd21f17;

}  // namespace

bool SearchSpace::valid() const {
  for (const auto& pb : bounds())
    if (!(pb.lo <= pb.hi)) return false;
  return v0.lo > 0.0 && s0.lo >= 0.0 && T.lo >= 0.0 && a.lo > 0.0 && b.lo > 0.0;
}

ParamVector to_vector(const idm::Params& p) { return {p.v0, p.s0, p.T, p.a, p.b}; }

idm::Params to_params(const ParamVector& v, double delta) {
  idm::Params p;
  p.v0 = v[0];
  p.s0 = v[1];
  p.T = v[2];
  p.a = v[3];
  p.b = v[4];
  p.delta = delta;
  return p;
}

ParamVector clip_to_space(const ParamVector& v, const SearchSpace& space) {
  const auto bounds = space.bounds();
  ParamVector out;
  for (std::size_t i = 0; i < 5; ++i)
    out[i] = std::clamp(v[i], bounds[i].lo, bounds[i].hi);
  return out;
}

bool in_space(const ParamVector& v, const SearchSpace& space) {
  const auto bounds = space.bounds();
  for (std::size_t i = 0; i < 5; ++i)
    if (v[i] < bounds[i].lo || v[i] > bounds[i].hi) return false;
  return true;
}

double objective(const idm::Params& p,
                 std::span<const trajdata::FollowEpisode> episodes,
                 const FitOptions& opts) {
  if (episodes.empty()) throw NoDataError("objective: no episodes");
  if (!p.valid()) throw std::invalid_argument("objective: invalid parameters");

  double pooled_sse = 0.0;
  std::size_t pooled_frames = 0;
  double episode_mse_sum = 0.0;

  for (const auto& ep : episodes) {
    const auto sim = idm::rollout(p, {ep.ego_velocity.front(), ep.gap.front()},
                                  ep.leader_velocity, ep.dt, opts.idm);
    double sse = 0.0;
    for (std::size_t t = 0; t < ep.length(); ++t) {
      const double e = sim.velocities[t] - ep.ego_velocity[t];
      sse += e * e;
    }
    pooled_sse += sse;
    pooled_frames += ep.length();
    episode_mse_sum += sse / static_cast<double>(ep.length());
  }

  return opts.weighting == ObjectiveWeighting::pooled_frames
             ? pooled_sse / static_cast<double>(pooled_frames)
             : episode_mse_sum / static_cast<double>(episodes.size());
}

namespace {

// Bounded Nelder-Mead on the 5-parameter box: standard reflection/expansion/
// contraction/shrink coefficients, every candidate clipped into the box, and
// a hard budget on objective evaluations.  Returns the evaluations consumed
// (0 when the budget cannot even cover the initial simplex).
struct NmOutcome {
  ParamVector x{};
  double fx = 0.0;
  std::size_t used = 0;
};

NmOutcome nelder_mead(const std::function<double(const ParamVector&)>& f,
                      const ParamVector& x0, const SearchSpace& space,
                      double step_fraction, std::size_t budget) {
  constexpr std::size_t n = 5;
  NmOutcome out;
  if (budget < n + 2) return out;

  const auto bounds = space.bounds();
  std::array<ParamVector, n + 1> simplex;
  std::array<double, n + 1> fv{};
  simplex[0] = clip_to_space(x0, space);
  for (std::size_t i = 0; i < n; ++i) {
    ParamVector x = simplex[0];
    const double step = step_fraction * (bounds[i].hi - bounds[i].lo);
    // Step away from the nearer boundary so the simplex keeps full rank even
    // when the start sits on an edge of the box.
    x[i] = (x[i] + step <= bounds[i].hi) ? x[i] + step : x[i] - step;
    simplex[i + 1] = clip_to_space(x, space);
  }
  for (std::size_t i = 0; i <= n; ++i) {
    fv[i] = f(simplex[i]);
    ++out.used;
  }

  std::array<std::size_t, n + 1> order;
  while (out.used < budget) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
    {
      std::array<ParamVector, n + 1> s2;
      std::array<double, n + 1> f2{};
      for (std::size_t i = 0; i <= n; ++i) {
        s2[i] = simplex[order[i]];
        f2[i] = fv[order[i]];
      }
      simplex = s2;
      fv = f2;
    }
    if (fv[n] - fv[0] < 1e-12 * (1.0 + std::abs(fv[0]))) break;

    ParamVector centroid{};
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < 5; ++k) centroid[k] += simplex[i][k];
    for (double& c : centroid) c /= static_cast<double>(n);

    auto blend = [&](const ParamVector& from, const ParamVector& to,
                     double coef) {
      ParamVector x;
      for (std::size_t k = 0; k < 5; ++k) x[k] = from[k] + coef * (to[k] - from[k]);
      return clip_to_space(x, space);
    };

    const ParamVector xr = blend(centroid, simplex[n], -1.0);  // reflection
    const double fr = f(xr);
    ++out.used;
    if (fr < fv[0]) {
      if (out.used < budget) {
        const ParamVector xe = blend(centroid, xr, 2.0);  // expansion
        const double fe = f(xe);
        ++out.used;
        if (fe < fr) {
          simplex[n] = xe;
          fv[n] = fe;
        } else {
          simplex[n] = xr;
          fv[n] = fr;
        }
      } else {
        simplex[n] = xr;
        fv[n] = fr;
      }
    } else if (fr < fv[n - 1]) {
      simplex[n] = xr;
      fv[n] = fr;
    } else {
      if (out.used >= budget) break;
      const ParamVector xc = blend(centroid, simplex[n], 0.5);  // contraction
      const double fc = f(xc);
      ++out.used;
      if (fc < fv[n]) {
        simplex[n] = xc;
        fv[n] = fc;
      } else {
        for (std::size_t i = 1; i <= n && out.used < budget; ++i) {  // shrink
          simplex[i] = blend(simplex[0], simplex[i], 0.5);
          fv[i] = f(simplex[i]);
          ++out.used;
        }
      }
    }
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i <= n; ++i)
    if (fv[i] < fv[best]) best = i;
  out.x = simplex[best];
  out.fx = fv[best];
  return out;
}

}  // namespace

CalibrationResult fit(std::span<const trajdata::FollowEpisode> episodes,
                      const SearchSpace& space, std::size_t n_trials,
                      std::uint64_t seed, const FitOptions& opts) {
  if (episodes.empty()) throw NoDataError("fit: no episodes");
  if (n_trials == 0) throw std::invalid_argument("fit: n_trials must be positive");
  if (!space.valid()) throw std::invalid_argument("fit: invalid search space");

  CalibrationResult result;
  result.n_trials = n_trials;
  result.seed = seed;
  result.trial_log.reserve(n_trials);

  auto eval = [&](const ParamVector& v) {
    const double fx = objective(to_params(v), episodes, opts);
    result.trial_log.push_back({v, fx});
    return fx;
  };

  std::mt19937_64 rng(seed);
  const auto bounds = space.bounds();
  auto uniform_candidate = [&]() {
    ParamVector v;
    for (std::size_t i = 0; i < 5; ++i) {
      std::uniform_real_distribution<double> d(bounds[i].lo, bounds[i].hi);
      v[i] = d(rng);
    }
    return v;
  };

  // Stage 1: uniform exploration over the box.
  const std::size_t n_explore = std::min<std::size_t>(
      n_trials,
      std::max<std::size_t>(
          6, static_cast<std::size_t>(
                 std::llround(opts.explore_fraction *
                              static_cast<double>(n_trials)))));
  std::vector<Trial> explored;
  explored.reserve(n_explore);
  for (std::size_t i = 0; i < n_explore; ++i) {
    const ParamVector v = uniform_candidate();
    explored.push_back({v, eval(v)});
  }
  std::stable_sort(explored.begin(), explored.end(),
                   [](const Trial& a, const Trial& b) {
                     return a.objective < b.objective;
                   });

  ParamVector best = explored.front().params;
  double best_obj = explored.front().objective;
  std::size_t evals = n_explore;

  // Stage 2: repeated bounded Nelder-Mead runs.  While runs keep making real
  // progress they continue from the incumbent; once they stall, restarts
  // alternate between the next-best exploration candidates and Gaussian
  // jitters of the incumbent whose width grows with the stall count, which
  // gets the search out of shallow local basins.
  std::size_t stall = 0;
  std::size_t next_candidate = 1;
  std::normal_distribution<double> gauss(0.0, 1.0);
  while (evals < n_trials) {
    ParamVector x0;
    if (stall == 0) {
      x0 = best;
    } else if (stall % 2 == 1 && next_candidate < explored.size()) {
      x0 = explored[next_candidate++].params;
    } else {
      const double jitter =
          std::min(0.45, 0.15 * (1.0 + static_cast<double>(stall / 2)));
      for (std::size_t k = 0; k < 5; ++k)
        x0[k] = best[k] + gauss(rng) * jitter * (bounds[k].hi - bounds[k].lo);
      x0 = clip_to_space(x0, space);
    }

    const auto run = nelder_mead(eval, x0, space, 0.10,
                                 std::min(opts.refine_run_cap, n_trials - evals));
    evals += run.used;
    if (run.used == 0) break;

    if (run.fx < best_obj - std::max(1e-10, 1e-3 * best_obj)) {
      best = run.x;
      best_obj = run.fx;
      stall = 0;
    } else {
      if (run.fx < best_obj) {
        best = run.x;
        best_obj = run.fx;
      }
      ++stall;
    }
  }

  // Tail: too few evaluations left for another simplex; spend them on tight
  // Gaussian perturbations of the incumbent so the budget is used exactly.
  while (evals < n_trials) {
    ParamVector v;
    for (std::size_t k = 0; k < 5; ++k)
      v[k] = best[k] + gauss(rng) * 0.01 * (bounds[k].hi - bounds[k].lo);
    v = clip_to_space(v, space);
    const double fx = eval(v);
    ++evals;
    if (fx < best_obj) {
      best = v;
      best_obj = fx;
    }
  }

  result.params = to_params(best);
  result.objective = best_obj;
  return result;
}

std::uint64_t driver_fit_seed(std::uint64_t seed, std::int64_t driver_id) {
  return derive_seed(seed, kDriverFitStream, static_cast<std::uint64_t>(driver_id));
}

std::map<std::int64_t, CalibrationResult> fit_per_driver(
    std::span<const trajdata::FollowEpisode> episodes, const SearchSpace& space,
    std::size_t n_trials, std::uint64_t seed, const FitOptions& opts,
    unsigned jobs) {
  if (episodes.empty()) throw NoDataError("fit_per_driver: no episodes");
  const auto groups = trajdata::group_by_driver(episodes);

  std::vector<std::int64_t> driver_ids;
  driver_ids.reserve(groups.size());
  for (const auto& [id, eps] : groups) driver_ids.push_back(id);

  std::vector<CalibrationResult> results(driver_ids.size());
  parallel_for(driver_ids.size(), jobs, [&](std::size_t i) {
    const std::int64_t id = driver_ids[i];
    std::vector<trajdata::FollowEpisode> eps;
    for (const auto* ep : groups.at(id)) eps.push_back(*ep);
    results[i] = fit(eps, space, n_trials, driver_fit_seed(seed, id), opts);
  });

  std::map<std::int64_t, CalibrationResult> out;
  for (std::size_t i = 0; i < driver_ids.size(); ++i)
    out.emplace(driver_ids[i], std::move(results[i]));
  return out;
}

FitNoiseEstimate noise_from_fits(std::span<const CalibrationResult> fits) {
  if (fits.size() < 2)
    throw std::invalid_argument("noise_from_fits: need at least 2 repeats");

  FitNoiseEstimate est;
  est.n_repeats = fits.size();
  const double n = static_cast<double>(fits.size());

  for (std::size_t k = 0; k < 5; ++k) {
    double mean = 0.0;
    for (const auto& f : fits) mean += to_vector(f.params)[k];
    mean /= n;
    double ss = 0.0;
    for (const auto& f : fits) {
      const double d = to_vector(f.params)[k] - mean;
      ss += d * d;
    }
    est.param_std[k] = std::sqrt(ss / (n - 1.0));
  }

  double dist_sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < fits.size(); ++i)
    for (std::size_t j = i + 1; j < fits.size(); ++j) {
      dist_sum += param_distance(fits[i].params, fits[j].params);
      ++pairs;
    }
  est.mean_pairwise_distance = dist_sum / static_cast<double>(pairs);
  return est;
}

FitNoiseEstimate estimate_fit_noise(
    std::span<const trajdata::FollowEpisode> episodes, const SearchSpace& space,
    std::size_t n_trials, std::size_t n_repeats, std::uint64_t seed,
    const FitOptions& opts, unsigned jobs) {
  if (n_repeats < 2)
    throw std::invalid_argument("estimate_fit_noise: need at least 2 repeats");
  std::vector<CalibrationResult> fits(n_repeats);
  parallel_for(n_repeats, jobs, [&](std::size_t r) {
    fits[r] = fit(episodes, space, n_trials, derive_seed(seed, 0xf17, r), opts);
  });
  return noise_from_fits(fits);
}

double param_distance(const idm::Params& x, const idm::Params& y) {
  const auto vx = to_vector(x);
  const auto vy = to_vector(y);
  double ss = 0.0;
  for (std::size_t k = 0; k < 5; ++k) ss += (vx[k] - vy[k]) * (vx[k] - vy[k]);
  return std::sqrt(ss);
}

double param_distance_normalized(const idm::Params& x, const idm::Params& y,
                                 const SearchSpace& space) {
  const auto vx = to_vector(x);
  const auto vy = to_vector(y);
  const auto bounds = space.bounds();
  double ss = 0.0;
  for (std::size_t k = 0; k < 5; ++k) {
    const double range = bounds[k].hi - bounds[k].lo;
    const double d = range > 0.0 ? (vx[k] - vy[k]) / range : 0.0;
    ss += d * d;
  }
  return std::sqrt(ss);
}

}  // namespace drivercal::calib
