#include "drivercal/cli.hpp"

#include "drivercal/analysis.hpp"
#include "drivercal/boostreg.hpp"
#include "drivercal/episode_io.hpp"
#include "drivercal/errors.hpp"
#include "drivercal/parallel.hpp"
#include "drivercal/rng.hpp"
#include "drivercal/svg.hpp"
#include "drivercal/synth.hpp"

#include "json.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <tuple>

namespace drivercal::cli {

using nlohmann::json;

namespace {

constexpr std::uint64_t kSharedFitStream = 0x5a4ed;
constexpr std::uint64_t kNoiseEstStream = 0x015e;
constexpr std::uint64_t kRolloutStream = 0x011a;
constexpr std::uint64_t kConsistencyStream = 0xc015;

// --- logging -----------------------------------------------------------

int log_level() {
  static const int level = [] {
    const char* env = std::getenv("DRIVERCAL_LOG");
    if (env == nullptr) return 0;
    if (std::strcmp(env, "debug") == 0) return 2;
    if (std::strcmp(env, "info") == 0) return 1;
    return 0;
  }();
  return level;
}

void log_info(const std::string& msg) {
  if (log_level() >= 1) std::cerr << "[drivercal] " << msg << '\n';
}

// --- small output helpers ----------------------------------------------

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

bool wants(const config::RunConfig& cfg, const char* format) {
  return std::find(cfg.formats.begin(), cfg.formats.end(), format) !=
         cfg.formats.end();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write output file: " + path.string());
  out << text;
}

void write_json(const std::filesystem::path& path, const json& j) {
  write_text(path, j.dump(2) + "\n");
}

std::filesystem::path prepare_out_dir(const config::RunConfig& cfg) {
  std::error_code ec;
  std::filesystem::create_directories(cfg.out_dir, ec);
  if (ec)
    throw ConfigError("cannot create output directory " + cfg.out_dir.string() +
                      ": " + ec.message());
  return cfg.out_dir;
}

json params_json(const idm::Params& p) {
  return json{{"v0", p.v0}, {"s0", p.s0}, {"T", p.T},
              {"a", p.a},   {"b", p.b},   {"delta", p.delta}};
}

json space_json(const calib::SearchSpace& space) {
  const auto b = space.bounds();
  return json{{"v0", {b[0].lo, b[0].hi}}, {"s0", {b[1].lo, b[1].hi}},
              {"T", {b[2].lo, b[2].hi}},  {"a", {b[3].lo, b[3].hi}},
              {"b", {b[4].lo, b[4].hi}}};
}

// --- data loading -------------------------------------------------------

episode_io::EpisodeFile load_episode_input(const config::RunConfig& cfg) {
  if (!cfg.episodes)
    throw ConfigError("config: this command needs an 'episodes' file path");
  auto file = episode_io::read_episodes(*cfg.episodes);
  if (file.episodes.empty())
    throw NoDataError("episode file " + cfg.episodes->string() +
                      " holds no episodes");
  return file;
}

std::map<std::int64_t, std::vector<trajdata::FollowEpisode>> copy_by_driver(
    std::span<const trajdata::FollowEpisode> episodes) {
  std::map<std::int64_t, std::vector<trajdata::FollowEpisode>> out;
  for (const auto& ep : episodes) out[ep.driver_id].push_back(ep);
  return out;
}

}  // namespace

// --- fit cache ----------------------------------------------------------

std::uint64_t hash_episodes(std::span<const trajdata::FollowEpisode> episodes) {
  // FNV-1a over the raw bytes of everything that affects a fit.
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto eat_bytes = [&h](const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ull;
    }
  };
  auto eat_double = [&](double v) { eat_bytes(&v, sizeof(v)); };

  for (const auto& ep : episodes) {
    eat_bytes(ep.episode_id.data(), ep.episode_id.size());
    eat_bytes(&ep.driver_id, sizeof(ep.driver_id));
    eat_double(ep.dt);
    for (const auto* series :
         {&ep.ego_velocity, &ep.leader_velocity, &ep.gap}) {
      const std::size_t n = series->size();
      eat_bytes(&n, sizeof(n));
      eat_bytes(series->data(), n * sizeof(double));
    }
  }
  return h;
}

namespace {

std::string cache_key(std::span<const trajdata::FollowEpisode> episodes,
                      const calib::SearchSpace& space, std::size_t n_trials,
                      std::uint64_t seed, const calib::FitOptions& opts) {
  std::ostringstream key;
  key << std::hex << hash_episodes(episodes) << '/' << std::dec << n_trials
      << '/' << seed << '/';
  for (const auto& b : space.bounds()) key << fmt(b.lo) << ',' << fmt(b.hi) << ';';
  key << (opts.weighting == calib::ObjectiveWeighting::pooled_frames ? "pf" : "pe")
      << '/' << (opts.idm.clamp_desired_gap ? 1 : 0) << '/'
      << (opts.idm.gap_update == idm::GapUpdate::semi_implicit ? "si" : "ee")
      << '/' << fmt(opts.explore_fraction) << '/' << opts.refine_run_cap;
  return key.str();
}

}  // namespace

const calib::CalibrationResult& FitCache::get(
    std::span<const trajdata::FollowEpisode> episodes,
    const calib::SearchSpace& space, std::size_t n_trials, std::uint64_t seed,
    const calib::FitOptions& opts) {
  const std::string key = cache_key(episodes, space, n_trials, seed, opts);
  {
    std::lock_guard<std::mutex> lock(mu_);
    const auto it = results_.find(key);
    if (it != results_.end()) {
      ++hits_;
      return it->second;
    }
  }
  auto result = calib::fit(episodes, space, n_trials, seed, opts);
  std::lock_guard<std::mutex> lock(mu_);
  const auto [it, inserted] = results_.emplace(key, std::move(result));
  if (inserted)
    ++misses_;
  else
    ++hits_;  // another thread computed it first; identical by determinism
  return it->second;
}

namespace {

// Per-driver fits through the cache, parallel over drivers.
std::map<std::int64_t, const calib::CalibrationResult*> fit_drivers_cached(
    FitCache& cache,
    const std::map<std::int64_t, std::vector<trajdata::FollowEpisode>>& by_driver,
    const config::RunConfig& cfg) {
  std::vector<std::int64_t> ids;
  for (const auto& [id, eps] : by_driver) ids.push_back(id);

  std::vector<const calib::CalibrationResult*> results(ids.size(), nullptr);
  parallel_for(ids.size(), cfg.jobs, [&](std::size_t i) {
    const auto& eps = by_driver.at(ids[i]);
    results[i] = &cache.get(eps, cfg.space, cfg.n_trials,
                            calib::driver_fit_seed(cfg.seed, ids[i]),
                            cfg.fit_options);
  });

  std::map<std::int64_t, const calib::CalibrationResult*> out;
  for (std::size_t i = 0; i < ids.size(); ++i) out.emplace(ids[i], results[i]);
  return out;
}

// Average per-driver optimizer-noise estimate over the first few drivers.
calib::FitNoiseEstimate average_fit_noise(
    const std::map<std::int64_t, std::vector<trajdata::FollowEpisode>>& by_driver,
    const config::RunConfig& cfg) {
  std::vector<std::int64_t> probe;
  for (const auto& [id, eps] : by_driver) {
    probe.push_back(id);
    if (probe.size() >= cfg.analysis.noise_drivers) break;
  }

  std::vector<calib::FitNoiseEstimate> estimates(probe.size());
  parallel_for(probe.size(), cfg.jobs, [&](std::size_t i) {
    estimates[i] = calib::estimate_fit_noise(
        by_driver.at(probe[i]), cfg.space, cfg.n_trials,
        cfg.analysis.noise_repeats,
        derive_seed(cfg.seed, kNoiseEstStream,
                    static_cast<std::uint64_t>(probe[i])),
        cfg.fit_options, 1);
  });

  calib::FitNoiseEstimate avg;
  avg.n_repeats = cfg.analysis.noise_repeats;
  for (const auto& est : estimates) {
    for (std::size_t k = 0; k < 5; ++k) avg.param_std[k] += est.param_std[k];
    avg.mean_pairwise_distance += est.mean_pairwise_distance;
  }
  const double n = static_cast<double>(estimates.size());
  for (std::size_t k = 0; k < 5; ++k) avg.param_std[k] /= n;
  avg.mean_pairwise_distance /= n;
  return avg;
}

json noise_json(const calib::FitNoiseEstimate& noise) {
  return json{{"param_std",
               {{"v0", noise.param_std[0]},
                {"s0", noise.param_std[1]},
                {"T", noise.param_std[2]},
                {"a", noise.param_std[3]},
                {"b", noise.param_std[4]}}},
              {"mean_pairwise_distance", noise.mean_pairwise_distance},
              {"n_repeats", noise.n_repeats}};
}

// --- mse table ----------------------------------------------------------

struct MseRow {
  std::string dataset;
  std::string mode;
  std::vector<double> per_driver_mse;
};

void write_mse_table(const std::filesystem::path& path,
                     const std::vector<MseRow>& rows) {
  std::ostringstream os;
  os << "dataset,mode,mse_mean,mse_se,mse_sd,n_drivers\n";
  for (const auto& row : rows) {
    os << row.dataset << ',' << row.mode << ','
       << fmt(stats::mean(row.per_driver_mse)) << ','
       << fmt(stats::standard_error(row.per_driver_mse)) << ','
       << fmt(stats::sample_std(row.per_driver_mse)) << ','
       << row.per_driver_mse.size() << '\n';
  }
  write_text(path, os.str());
}

}  // namespace

// --- commands -----------------------------------------------------------

int cmd_ingest(const config::RunConfig& cfg) {
  if (!cfg.ingest)
    throw ConfigError("config: ingest command needs an 'ingest' section");
  const auto& ingest = *cfg.ingest;
  const auto out_dir = prepare_out_dir(cfg);

  log_info("parsing " + ingest.csv.string());
  const auto frames = trajdata::parse_csv(ingest.csv, ingest.schema, ingest.units);
  const auto episodes =
      trajdata::extract_episodes(frames, ingest.min_episode_length);
  if (episodes.empty())
    throw NoDataError("no usable episodes in " + ingest.csv.string());

  const auto summary = trajdata::summarize(episodes, ingest.dataset_name);
  log_info(std::to_string(summary.episode_count) + " episodes from " +
           std::to_string(summary.driver_count) + " drivers");

  episode_io::write_episodes(out_dir / "episodes.json",
                             {ingest.dataset_name, episodes});
  episode_io::write_summary(out_dir / "summary.json", summary);
  return kExitOk;
}

int cmd_synth(const config::RunConfig& cfg) {
  if (!cfg.synth)
    throw ConfigError("config: synth command needs a 'synth' section");
  const auto out_dir = prepare_out_dir(cfg);

  log_info("generating population of " + std::to_string(cfg.synth->n_drivers) +
           " drivers");
  const auto population = synth::generate(*cfg.synth);
  const auto summary = trajdata::summarize(population.episodes, "synthetic");

  episode_io::write_episodes(out_dir / "episodes.json",
                             {"synthetic", population.episodes});
  episode_io::write_labels(out_dir / "labels.json", population.labels);
  episode_io::write_summary(out_dir / "summary.json", summary);
  return kExitOk;
}

int cmd_fit(const config::RunConfig& cfg) {
  const auto out_dir = prepare_out_dir(cfg);
  const auto file = load_episode_input(cfg);
  const std::string dataset =
      file.dataset_name.empty() ? "dataset" : file.dataset_name;
  const auto by_driver = copy_by_driver(file.episodes);

  FitCache cache;
  json results = json::array();
  json trials = json::object();
  std::vector<MseRow> table;

  if (cfg.fit.mode == config::FitMode::per_driver) {
    log_info("fitting " + std::to_string(by_driver.size()) +
             " drivers independently");
    const auto fits = fit_drivers_cached(cache, by_driver, cfg);
    MseRow row{dataset, "per_driver", {}};
    for (const auto& [driver_id, result] : fits) {
      results.push_back(json{{"driver_id", driver_id},
                             {"params", params_json(result->params)},
                             {"objective", result->objective},
                             {"n_trials", result->n_trials},
                             {"seed", result->seed}});
      row.per_driver_mse.push_back(result->objective);
      if (cfg.fit.write_trials) {
        json log = json::array();
        for (const auto& trial : result->trial_log)
          log.push_back(json{{"params", trial.params}, {"objective", trial.objective}});
        trials[std::to_string(driver_id)] = std::move(log);
      }
    }
    table.push_back(std::move(row));
  } else {
    log_info("fitting one shared model over " +
             std::to_string(file.episodes.size()) + " episodes");
    // A shared fit over a single driver's data is exactly that driver's own
    // fit, derived seed included, so the two modes agree in that case.
    const std::uint64_t shared_seed =
        by_driver.size() == 1
            ? calib::driver_fit_seed(cfg.seed, by_driver.begin()->first)
            : derive_seed(cfg.seed, kSharedFitStream);
    const auto& shared = cache.get(file.episodes, cfg.space, cfg.n_trials,
                                   shared_seed, cfg.fit_options);
    results.push_back(json{{"driver_id", nullptr},
                           {"params", params_json(shared.params)},
                           {"objective", shared.objective},
                           {"n_trials", shared.n_trials},
                           {"seed", shared.seed}});
    if (cfg.fit.write_trials) {
      json log = json::array();
      for (const auto& trial : shared.trial_log)
        log.push_back(json{{"params", trial.params}, {"objective", trial.objective}});
      trials["shared"] = std::move(log);
    }
    // The table row scores the shared parameters per driver so the shared
    // and per-driver rows aggregate over the same units.
    MseRow row{dataset, "shared", {}};
    for (const auto& [driver_id, eps] : by_driver)
      row.per_driver_mse.push_back(
          calib::objective(shared.params, eps, cfg.fit_options));
    table.push_back(std::move(row));
  }

  if (wants(cfg, "json")) {
    write_json(out_dir / "fit_results.json",
               json{{"format_version", episode_io::kFormatVersion},
                    {"dataset_name", dataset},
                    {"mode", cfg.fit.mode == config::FitMode::per_driver
                                 ? "per_driver"
                                 : "shared"},
                    {"seed", cfg.seed},
                    {"n_trials", cfg.n_trials},
                    {"search_space", space_json(cfg.space)},
                    {"results", std::move(results)}});
    if (cfg.fit.write_trials)
      write_json(out_dir / "fit_trials.json", trials);
  }
  if (wants(cfg, "csv")) write_mse_table(out_dir / "mse_table.csv", table);
  return kExitOk;
}

int cmd_rollout(const config::RunConfig& cfg) {
  const auto out_dir = prepare_out_dir(cfg);
  const auto file = load_episode_input(cfg);
  const std::string dataset =
      file.dataset_name.empty() ? "dataset" : file.dataset_name;
  const auto by_driver = copy_by_driver(file.episodes);

  // Deterministic episode sample.
  std::vector<std::size_t> order(file.episodes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  {
    auto rng = make_rng(cfg.seed, kRolloutStream);
    std::shuffle(order.begin(), order.end(), rng);
  }
  order.resize(std::min(cfg.rollout.episodes, order.size()));
  std::sort(order.begin(), order.end());

  FitCache cache;
  std::string source_name;
  std::function<idm::RolloutResult(const trajdata::FollowEpisode&)> replay;

  boostreg::Model model;
  std::map<std::int64_t, const calib::CalibrationResult*> fits;

  switch (cfg.rollout.source) {
    case config::RolloutSource::idm_per_driver: {
      source_name = "idm_per_driver";
      fits = fit_drivers_cached(cache, by_driver, cfg);
      replay = [&](const trajdata::FollowEpisode& ep) {
        return idm::rollout(fits.at(ep.driver_id)->params,
                            {ep.ego_velocity.front(), ep.gap.front()},
                            ep.leader_velocity, ep.dt, cfg.fit_options.idm);
      };
      break;
    }
    case config::RolloutSource::idm_shared: {
      source_name = "idm_shared";
      const std::uint64_t shared_seed =
          by_driver.size() == 1
              ? calib::driver_fit_seed(cfg.seed, by_driver.begin()->first)
              : derive_seed(cfg.seed, kSharedFitStream);
      const auto& shared = cache.get(file.episodes, cfg.space, cfg.n_trials,
                                     shared_seed, cfg.fit_options);
      const idm::Params params = shared.params;
      replay = [&, params](const trajdata::FollowEpisode& ep) {
        return idm::rollout(params, {ep.ego_velocity.front(), ep.gap.front()},
                            ep.leader_velocity, ep.dt, cfg.fit_options.idm);
      };
      break;
    }
    case config::RolloutSource::boosted: {
      source_name = "boosted";
      const auto samples = boostreg::build_training_set(file.episodes);
      if (samples.empty())
        throw NoDataError("episodes too short to build training pairs");
      log_info("training boosted model on " + std::to_string(samples.size()) +
               " samples");
      boostreg::TrainMetrics metrics;
      model = boostreg::train(samples, cfg.boost.train, &metrics);
      boostreg::save_model(out_dir / "boost_model.json", model);
      if (wants(cfg, "csv"))
        boostreg::write_loss_csv(out_dir / "boost_loss.csv", metrics);
      replay = [&](const trajdata::FollowEpisode& ep) {
        return boostreg::rollout(model,
                                 {ep.ego_velocity.front(), ep.gap.front()},
                                 ep.leader_velocity, ep.dt, cfg.fit_options.idm);
      };
      break;
    }
  }

  // Closed-loop MSE per driver for the table, plus per-episode trace files
  // for the sampled episodes.
  std::map<std::int64_t, std::pair<double, std::size_t>> driver_sse;
  json index = json::array();
  for (const auto& ep : file.episodes) {
    const auto sim = replay(ep);
    double sse = 0.0;
    for (std::size_t t = 0; t < ep.length(); ++t) {
      const double e = sim.velocities[t] - ep.ego_velocity[t];
      sse += e * e;
    }
    auto& [acc, n] = driver_sse[ep.driver_id];
    acc += sse;
    n += ep.length();
  }
  MseRow row{dataset, source_name, {}};
  for (const auto& [driver_id, sse] : driver_sse)
    row.per_driver_mse.push_back(sse.first / static_cast<double>(sse.second));

  for (std::size_t idx : order) {
    const auto& ep = file.episodes[idx];
    const auto sim = replay(ep);
    double sse = 0.0;
    std::ostringstream os;
    os << "t,recorded_velocity,model_velocity,recorded_gap,model_gap\n";
    for (std::size_t t = 0; t < ep.length(); ++t) {
      const double e = sim.velocities[t] - ep.ego_velocity[t];
      sse += e * e;
      os << fmt(static_cast<double>(t) * ep.dt) << ','
         << fmt(ep.ego_velocity[t]) << ',' << fmt(sim.velocities[t]) << ','
         << fmt(ep.gap[t]) << ',' << fmt(sim.gaps[t]) << '\n';
    }
    const std::string name = "rollout_" + source_name + "_" + ep.episode_id + ".csv";
    if (wants(cfg, "csv")) write_text(out_dir / name, os.str());
    index.push_back(json{{"episode_id", ep.episode_id},
                         {"driver_id", ep.driver_id},
                         {"file", name},
                         {"mse", sse / static_cast<double>(ep.length())},
                         {"collided", sim.collided}});
  }

  if (wants(cfg, "json"))
    write_json(out_dir / "rollout_index.json",
               json{{"format_version", episode_io::kFormatVersion},
                    {"dataset_name", dataset},
                    {"source", source_name},
                    {"episodes", std::move(index)}});
  if (wants(cfg, "csv"))
    write_mse_table(out_dir / "rollout_mse.csv", {row});
  return kExitOk;
}

namespace {

json histogram_json(const analysis::Histogram& h) {
  return json{{"edges", h.edges}, {"counts", h.counts}};
}

json metric_json(const analysis::MetricSummary& m) {
  return json{{"driver_ids", m.driver_ids},
              {"values", m.values},
              {"included_fraction", m.included_fraction},
              {"histogram", histogram_json(m.histogram)}};
}

void analyze_diversity(const config::RunConfig& cfg,
                       const episode_io::EpisodeFile& file,
                       const std::filesystem::path& out_dir) {
  auto opts = cfg.analysis.diversity;
  const auto report = analysis::diversity_metrics(file.episodes, opts);

  if (wants(cfg, "json")) {
    write_json(
        out_dir / "diversity.json",
        json{{"format_version", episode_io::kFormatVersion},
             {"dataset_name", file.dataset_name},
             {"total_drivers", report.total_drivers},
             {"options",
              {{"accel_threshold", opts.accel_threshold},
               {"headway_cap", opts.headway_cap},
               {"standstill_velocity", opts.standstill_velocity},
               {"window", opts.window == analysis::AccelWindow::per_second
                              ? "per_second"
                              : "per_frame"}}},
             {"acceleration", metric_json(report.acceleration)},
             {"deceleration", metric_json(report.deceleration)},
             {"min_headway", metric_json(report.min_headway)}});
  }
  if (wants(cfg, "csv")) {
    std::ostringstream os;
    os << "metric,driver_id,value\n";
    const std::pair<const char*, const analysis::MetricSummary*> metrics[] = {
        {"acceleration", &report.acceleration},
        {"deceleration", &report.deceleration},
        {"min_headway", &report.min_headway}};
    for (const auto& [name, m] : metrics)
      for (std::size_t i = 0; i < m->values.size(); ++i)
        os << name << ',' << m->driver_ids[i] << ',' << fmt(m->values[i]) << '\n';
    write_text(out_dir / "diversity.csv", os.str());
  }
  if (wants(cfg, "svg")) {
    write_text(out_dir / "diversity_acceleration.svg",
               svg::histogram_chart(report.acceleration.histogram,
                                    "Mean acceleration per driver", "m/s^2"));
    write_text(out_dir / "diversity_deceleration.svg",
               svg::histogram_chart(report.deceleration.histogram,
                                    "Mean deceleration per driver", "m/s^2"));
    write_text(out_dir / "diversity_min_headway.svg",
               svg::histogram_chart(report.min_headway.histogram,
                                    "Minimum time headway per driver", "s"));
  }
}

void analyze_params(const config::RunConfig& cfg,
                    const episode_io::EpisodeFile& file,
                    const std::filesystem::path& out_dir, FitCache& cache) {
  const auto by_driver = copy_by_driver(file.episodes);
  log_info("params analysis: fitting " + std::to_string(by_driver.size()) +
           " drivers");
  const auto fits = fit_drivers_cached(cache, by_driver, cfg);
  std::map<std::int64_t, calib::CalibrationResult> owned;
  for (const auto& [id, result] : fits) owned.emplace(id, *result);

  const std::uint64_t shared_seed =
      by_driver.size() == 1
          ? calib::driver_fit_seed(cfg.seed, by_driver.begin()->first)
          : derive_seed(cfg.seed, kSharedFitStream);
  const auto& shared = cache.get(file.episodes, cfg.space, cfg.n_trials,
                                 shared_seed, cfg.fit_options);

  log_info("params analysis: estimating optimizer noise");
  const auto noise = average_fit_noise(by_driver, cfg);
  const auto report = analysis::param_distribution(owned, shared, noise,
                                                   cfg.analysis.histogram_bins);

  static const char* const names[] = {"v0", "s0", "T", "a", "b"};
  if (wants(cfg, "json")) {
    json per_param = json::object();
    for (std::size_t k = 0; k < 5; ++k)
      per_param[names[k]] = json{{"values", report.values[k]},
                                 {"shared", report.shared[k]},
                                 {"band_halfwidth", report.band_halfwidth[k]},
                                 {"in_band_fraction", report.in_band_fraction[k]},
                                 {"diverse", report.diverse[k]},
                                 {"histogram", histogram_json(report.histograms[k])}};
    write_json(out_dir / "params.json",
               json{{"format_version", episode_io::kFormatVersion},
                    {"dataset_name", file.dataset_name},
                    {"driver_ids", report.driver_ids},
                    {"noise", noise_json(noise)},
                    {"shared_objective", shared.objective},
                    {"parameters", std::move(per_param)}});
  }
  if (wants(cfg, "csv")) {
    std::ostringstream os;
    os << "driver_id,v0,s0,T,a,b,objective\n";
    for (const auto& [id, result] : owned) {
      const auto v = calib::to_vector(result.params);
      os << id;
      for (double x : v) os << ',' << fmt(x);
      os << ',' << fmt(result.objective) << '\n';
    }
    write_text(out_dir / "params.csv", os.str());
  }
  if (wants(cfg, "svg")) {
    for (std::size_t k = 0; k < 5; ++k) {
      const svg::Band band{report.shared[k], report.band_halfwidth[k]};
      write_text(out_dir / ("params_" + std::string(names[k]) + ".svg"),
                 svg::histogram_chart(report.histograms[k],
                                      std::string("Fitted ") + names[k] +
                                          " across drivers",
                                      names[k], band));
    }
  }
}

json distance_json(const analysis::DistanceStats& s) {
  return json{{"mean", s.mean}, {"se", s.se}, {"n", s.n}};
}

void analyze_consistency(const config::RunConfig& cfg,
                         const episode_io::EpisodeFile& file,
                         const std::filesystem::path& out_dir) {
  analysis::ConsistencyOptions opts;
  opts.buckets = cfg.analysis.consistency_buckets;
  opts.cross_pairs = cfg.analysis.cross_pairs;
  opts.min_half_frames = cfg.analysis.min_half_frames;
  opts.fit = cfg.fit_options;
  opts.jobs = cfg.jobs;

  log_info("consistency analysis over " +
           std::to_string(opts.buckets.size()) + " buckets");
  const auto report = analysis::consistency_experiment(
      file.episodes, cfg.space, cfg.n_trials,
      derive_seed(cfg.seed, kConsistencyStream), opts);

  for (const auto& warning : report.warnings)
    std::cerr << "warning: " << warning << '\n';

  if (wants(cfg, "json")) {
    json buckets = json::array();
    for (const auto& b : report.buckets)
      buckets.push_back(json{
          {"min_frames", b.min_frames},
          {"max_frames", b.max_frames},
          {"n_drivers", b.n_drivers},
          {"refit", distance_json(b.refit)},
          {"same_driver", distance_json(b.same_driver)},
          {"cross_driver", distance_json(b.cross_driver)},
          {"refit_normalized", distance_json(b.refit_normalized)},
          {"same_driver_normalized", distance_json(b.same_driver_normalized)},
          {"cross_driver_normalized", distance_json(b.cross_driver_normalized)}});
    json j{{"format_version", episode_io::kFormatVersion},
           {"dataset_name", file.dataset_name},
           {"buckets", std::move(buckets)},
           {"warnings", report.warnings}};
    if (report.longest_bucket_test) {
      const auto& t = *report.longest_bucket_test;
      j["longest_bucket_test"] = json{{"t", t.t},
                                      {"df", t.df},
                                      {"p_value", t.p_value},
                                      {"n_same", t.n1},
                                      {"n_cross", t.n2}};
    }
    write_json(out_dir / "consistency.json", j);
  }
  if (wants(cfg, "csv")) {
    std::ostringstream os;
    os << "bucket_min,bucket_max,n_drivers,population,normalized,mean,se,n\n";
    for (const auto& b : report.buckets) {
      const std::tuple<const char*, int, const analysis::DistanceStats*> rows[] = {
          {"refit", 0, &b.refit},
          {"same_driver", 0, &b.same_driver},
          {"cross_driver", 0, &b.cross_driver},
          {"refit", 1, &b.refit_normalized},
          {"same_driver", 1, &b.same_driver_normalized},
          {"cross_driver", 1, &b.cross_driver_normalized}};
      for (const auto& [population, normalized, s] : rows)
        os << b.min_frames << ',' << b.max_frames << ',' << b.n_drivers << ','
           << population << ',' << normalized << ',' << fmt(s->mean) << ','
           << fmt(s->se) << ',' << s->n << '\n';
    }
    write_text(out_dir / "consistency.csv", os.str());
  }
  if (wants(cfg, "svg") && !report.buckets.empty()) {
    std::vector<std::string> categories;
    svg::ErrorBarSeries refit{"refit same data", {}, {}};
    svg::ErrorBarSeries same{"same driver", {}, {}};
    svg::ErrorBarSeries cross{"different drivers", {}, {}};
    for (const auto& b : report.buckets) {
      categories.push_back(std::to_string(b.min_frames) + "-" +
                           std::to_string(b.max_frames) + " frames");
      refit.means.push_back(b.refit.mean);
      refit.ses.push_back(b.refit.se);
      same.means.push_back(b.same_driver.mean);
      same.ses.push_back(b.same_driver.se);
      cross.means.push_back(b.cross_driver.mean);
      cross.ses.push_back(b.cross_driver.se);
    }
    write_text(out_dir / "consistency.svg",
               svg::errorbar_chart(categories, {refit, same, cross},
                                   "Parameter distance by trajectory length",
                                   "L2 distance"));
  }
}

}  // namespace

int cmd_analyze(const config::RunConfig& cfg, const std::string& which) {
  if (which != "diversity" && which != "params" && which != "consistency" &&
      which != "all")
    throw ConfigError("analyze: unknown report '" + which +
                      "' (expected diversity, params, consistency, or all)");

  const auto out_dir = prepare_out_dir(cfg);
  const auto file = load_episode_input(cfg);

  FitCache cache;
  if (which == "diversity" || which == "all")
    analyze_diversity(cfg, file, out_dir);
  if (which == "params" || which == "all")
    analyze_params(cfg, file, out_dir, cache);
  if (which == "consistency" || which == "all")
    analyze_consistency(cfg, file, out_dir);
  log_info("fit cache: " + std::to_string(cache.hits()) + " hits, " +
           std::to_string(cache.misses()) + " misses");
  return kExitOk;
}

int run_guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const ConfigError& e) {  // covers SchemaError and ParseError
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const GenerationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitGeneration;
  } catch (const NoDataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNoData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace drivercal::cli
