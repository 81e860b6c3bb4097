#include "drivercal/config.hpp"

#include "drivercal/errors.hpp"

#include "json.hpp"

#include <fstream>
#include <set>
#include <string>

namespace drivercal::config {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ConfigError("config: " + where + ": " + what);
}

void expect_keys(const json& j, const std::string& where,
                 const std::set<std::string>& allowed) {
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key)) fail(where, "unknown key '" + key + "'");
}

double get_number(const json& j, const std::string& where, const char* key,
                  double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number()) fail(where, std::string(key) + " must be a number");
  return j.at(key).get<double>();
}

std::size_t get_count(const json& j, const std::string& where, const char* key,
                      std::size_t fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number_unsigned())
    fail(where, std::string(key) + " must be a nonnegative integer");
  return j.at(key).get<std::size_t>();
}

std::string get_string(const json& j, const std::string& where, const char* key,
                       const std::string& fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_string()) fail(where, std::string(key) + " must be a string");
  return j.at(key).get<std::string>();
}

bool get_bool(const json& j, const std::string& where, const char* key,
              bool fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_boolean()) fail(where, std::string(key) + " must be a boolean");
  return j.at(key).get<bool>();
}

idm::Params parse_idm_params(const json& j, const std::string& where) {
  expect_keys(j, where, {"v0", "s0", "T", "a", "b", "delta"});
  idm::Params p;
  for (const char* key : {"v0", "s0", "T", "a", "b"})
    if (!j.contains(key)) fail(where, std::string("missing ") + key);
  p.v0 = get_number(j, where, "v0", p.v0);
  p.s0 = get_number(j, where, "s0", p.s0);
  p.T = get_number(j, where, "T", p.T);
  p.a = get_number(j, where, "a", p.a);
  p.b = get_number(j, where, "b", p.b);
  p.delta = get_number(j, where, "delta", 4.0);
  if (!p.valid()) fail(where, "parameters out of the model's valid domain");
  return p;
}

idm::Options parse_idm_options(const json& j, const std::string& where) {
  expect_keys(j, where, {"clamp_desired_gap", "gap_update"});
  idm::Options opts;
  opts.clamp_desired_gap = get_bool(j, where, "clamp_desired_gap", true);
  const std::string scheme = get_string(j, where, "gap_update", "semi_implicit");
  if (scheme == "semi_implicit")
    opts.gap_update = idm::GapUpdate::semi_implicit;
  else if (scheme == "explicit_euler")
    opts.gap_update = idm::GapUpdate::explicit_euler;
  else
    fail(where, "gap_update must be semi_implicit or explicit_euler");
  return opts;
}

calib::ParamBounds parse_bounds(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    fail(where, "bounds must be a [lo, hi] number pair");
  calib::ParamBounds b{j[0].get<double>(), j[1].get<double>()};
  if (!(b.lo <= b.hi)) fail(where, "bounds must satisfy lo <= hi");
  return b;
}

trajdata::UnitSystem parse_units(const std::string& s, const std::string& where) {
  if (s == "feet") return trajdata::UnitSystem::feet;
  if (s == "meters") return trajdata::UnitSystem::meters;
  fail(where, "unit_system must be feet or meters");
}

IngestConfig parse_ingest(const json& j) {
  const std::string where = "ingest";
  expect_keys(j, where,
              {"csv", "dataset_name", "unit_system", "delimiter",
               "min_episode_length", "columns"});
  IngestConfig cfg;
  if (!j.contains("csv")) fail(where, "missing csv path");
  cfg.csv = get_string(j, where, "csv", "");
  cfg.dataset_name = get_string(j, where, "dataset_name", cfg.dataset_name);
  cfg.units = parse_units(get_string(j, where, "unit_system", "feet"), where);
  const std::string delim = get_string(j, where, "delimiter", ",");
  if (delim.size() != 1) fail(where, "delimiter must be a single character");
  cfg.schema.delimiter = delim[0];
  cfg.min_episode_length = get_count(j, where, "min_episode_length", 50);
  if (cfg.min_episode_length < 2) fail(where, "min_episode_length must be >= 2");
  if (j.contains("columns")) {
    if (!j.at("columns").is_object()) fail(where, "columns must be an object");
    for (const auto& [field, name] : j.at("columns").items()) {
      if (!name.is_string()) fail(where, "column names must be strings");
      cfg.schema.columns[field] = name.get<std::string>();
    }
  }
  return cfg;
}

synth::PopulationSpec parse_synth(const json& j, std::uint64_t seed,
                                  const idm::Options& idm_opts) {
  const std::string where = "synth";
  expect_keys(j, where,
              {"archetypes", "action_noise_std", "leader_profile", "n_drivers",
               "frames_per_driver", "resample_midway", "dt"});
  synth::PopulationSpec spec;
  spec.seed = seed;
  spec.idm_options = idm_opts;

  if (!j.contains("archetypes") || !j.at("archetypes").is_array() ||
      j.at("archetypes").empty())
    fail(where, "archetypes must be a non-empty array");
  for (const auto& ja : j.at("archetypes")) {
    expect_keys(ja, where + ".archetypes[]", {"weight", "params"});
    synth::Archetype arch;
    arch.weight = get_number(ja, where, "weight", 1.0);
    if (!ja.contains("params")) fail(where, "archetype missing params");
    arch.params = parse_idm_params(ja.at("params"), where + ".archetypes[].params");
    spec.archetypes.push_back(arch);
  }

  spec.action_noise_std = get_number(j, where, "action_noise_std", 0.3);
  spec.n_drivers = get_count(j, where, "n_drivers", 1);
  spec.resample_midway = get_bool(j, where, "resample_midway", false);
  spec.dt = get_number(j, where, "dt", 0.1);

  if (j.contains("frames_per_driver")) {
    const auto& jf = j.at("frames_per_driver");
    if (!jf.is_array() || jf.empty())
      fail(where, "frames_per_driver must be a non-empty array");
    spec.frames_per_driver.clear();
    for (const auto& v : jf) {
      if (!v.is_number_unsigned()) fail(where, "frames_per_driver entries must be counts");
      spec.frames_per_driver.push_back(v.get<std::size_t>());
    }
  }

  if (j.contains("leader_profile")) {
    const auto& jl = j.at("leader_profile");
    const std::string lwhere = where + ".leader_profile";
    expect_keys(jl, lwhere, {"kind", "cruise", "amplitude", "period", "recorded"});
    const std::string kind = get_string(jl, lwhere, "kind", "stop_and_go");
    if (kind == "constant")
      spec.leader.kind = synth::LeaderKind::constant;
    else if (kind == "stop_and_go")
      spec.leader.kind = synth::LeaderKind::stop_and_go;
    else if (kind == "sawtooth")
      spec.leader.kind = synth::LeaderKind::sawtooth;
    else if (kind == "recorded")
      spec.leader.kind = synth::LeaderKind::recorded;
    else
      fail(lwhere, "unknown kind '" + kind + "'");
    spec.leader.cruise = get_number(jl, lwhere, "cruise", 20.0);
    spec.leader.amplitude = get_number(jl, lwhere, "amplitude", 4.0);
    spec.leader.period = get_count(jl, lwhere, "period", 200);
    if (jl.contains("recorded")) {
      if (!jl.at("recorded").is_array()) fail(lwhere, "recorded must be an array");
      for (const auto& v : jl.at("recorded"))
        spec.leader.recorded.push_back(v.get<double>());
    }
  }
  return spec;
}

}  // namespace

RunConfig load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError("malformed config file " + path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw SchemaError("config root must be an object");

  expect_keys(j, "top level",
              {"seed", "jobs", "out_dir", "formats", "ingest", "episodes",
               "synth", "search_space", "n_trials", "objective_weighting",
               "idm", "fit", "rollout", "boost", "analysis"});

  RunConfig cfg;
  if (!j.contains("seed")) throw ConfigError("config: missing required key 'seed'");
  if (!j.at("seed").is_number_unsigned())
    throw ConfigError("config: seed must be a nonnegative integer");
  cfg.seed = j.at("seed").get<std::uint64_t>();

  cfg.jobs = static_cast<unsigned>(get_count(j, "top level", "jobs", 1));
  if (cfg.jobs == 0) throw ConfigError("config: jobs must be >= 1");
  cfg.out_dir = get_string(j, "top level", "out_dir", "out");

  if (j.contains("formats")) {
    if (!j.at("formats").is_array()) throw ConfigError("config: formats must be an array");
    cfg.formats.clear();
    for (const auto& v : j.at("formats")) {
      const std::string f = v.get<std::string>();
      if (f != "json" && f != "csv" && f != "svg")
        throw ConfigError("config: unknown format '" + f + "'");
      cfg.formats.push_back(f);
    }
    if (cfg.formats.empty()) throw ConfigError("config: formats must not be empty");
  }

  if (j.contains("idm"))
    cfg.fit_options.idm = parse_idm_options(j.at("idm"), "idm");

  if (j.contains("search_space")) {
    const auto& js = j.at("search_space");
    expect_keys(js, "search_space", {"v0", "s0", "T", "a", "b"});
    if (js.contains("v0")) cfg.space.v0 = parse_bounds(js.at("v0"), "search_space.v0");
    if (js.contains("s0")) cfg.space.s0 = parse_bounds(js.at("s0"), "search_space.s0");
    if (js.contains("T")) cfg.space.T = parse_bounds(js.at("T"), "search_space.T");
    if (js.contains("a")) cfg.space.a = parse_bounds(js.at("a"), "search_space.a");
    if (js.contains("b")) cfg.space.b = parse_bounds(js.at("b"), "search_space.b");
    if (!cfg.space.valid())
      throw ConfigError("config: search_space out of the model's valid domain");
  }

  cfg.n_trials = get_count(j, "top level", "n_trials", 500);
  if (cfg.n_trials == 0) throw ConfigError("config: n_trials must be >= 1");

  const std::string weighting =
      get_string(j, "top level", "objective_weighting", "pooled_frames");
  if (weighting == "pooled_frames")
    cfg.fit_options.weighting = calib::ObjectiveWeighting::pooled_frames;
  else if (weighting == "per_episode_mean")
    cfg.fit_options.weighting = calib::ObjectiveWeighting::per_episode_mean;
  else
    throw ConfigError(
        "config: objective_weighting must be pooled_frames or per_episode_mean");

  if (j.contains("ingest")) cfg.ingest = parse_ingest(j.at("ingest"));
  if (j.contains("episodes"))
    cfg.episodes = std::filesystem::path(
        get_string(j, "top level", "episodes", ""));
  if (j.contains("synth"))
    cfg.synth = parse_synth(j.at("synth"), cfg.seed, cfg.fit_options.idm);

  if (j.contains("fit")) {
    const auto& jf = j.at("fit");
    expect_keys(jf, "fit", {"mode", "write_trials"});
    const std::string mode = get_string(jf, "fit", "mode", "per_driver");
    if (mode == "per_driver")
      cfg.fit.mode = FitMode::per_driver;
    else if (mode == "shared")
      cfg.fit.mode = FitMode::shared;
    else
      throw ConfigError("config: fit.mode must be per_driver or shared");
    cfg.fit.write_trials = get_bool(jf, "fit", "write_trials", false);
  }

  if (j.contains("rollout")) {
    const auto& jr = j.at("rollout");
    expect_keys(jr, "rollout", {"source", "episodes"});
    const std::string source = get_string(jr, "rollout", "source", "idm_per_driver");
    if (source == "idm_per_driver")
      cfg.rollout.source = RolloutSource::idm_per_driver;
    else if (source == "idm_shared")
      cfg.rollout.source = RolloutSource::idm_shared;
    else if (source == "boosted")
      cfg.rollout.source = RolloutSource::boosted;
    else
      throw ConfigError("config: rollout.source must be idm_per_driver, "
                        "idm_shared, or boosted");
    cfg.rollout.episodes = get_count(jr, "rollout", "episodes", 4);
    if (cfg.rollout.episodes == 0)
      throw ConfigError("config: rollout.episodes must be >= 1");
  }

  if (j.contains("boost")) {
    const auto& jb = j.at("boost");
    expect_keys(jb, "boost", {"rounds", "max_depth", "learning_rate",
                              "min_samples_leaf"});
    cfg.boost.train.rounds = get_count(jb, "boost", "rounds", 2000);
    cfg.boost.train.max_depth =
        static_cast<int>(get_count(jb, "boost", "max_depth", 4));
    cfg.boost.train.learning_rate = get_number(jb, "boost", "learning_rate", 0.1);
    cfg.boost.train.min_samples_leaf =
        get_count(jb, "boost", "min_samples_leaf", 1);
    if (cfg.boost.train.rounds == 0 || cfg.boost.train.max_depth < 1 ||
        !(cfg.boost.train.learning_rate > 0.0))
      throw ConfigError("config: invalid boost settings");
  }

  if (j.contains("analysis")) {
    const auto& ja = j.at("analysis");
    expect_keys(ja, "analysis",
                {"accel_threshold", "headway_cap", "accel_window",
                 "histogram_bins", "consistency_buckets", "cross_pairs",
                 "min_half_frames", "noise_repeats", "noise_drivers"});
    auto& an = cfg.analysis;
    an.diversity.accel_threshold =
        get_number(ja, "analysis", "accel_threshold", 2.0);
    an.diversity.headway_cap = get_number(ja, "analysis", "headway_cap", 5.0);
    const std::string window =
        get_string(ja, "analysis", "accel_window", "per_second");
    if (window == "per_second")
      an.diversity.window = analysis::AccelWindow::per_second;
    else if (window == "per_frame")
      an.diversity.window = analysis::AccelWindow::per_frame;
    else
      throw ConfigError("config: accel_window must be per_second or per_frame");
    an.histogram_bins = get_count(ja, "analysis", "histogram_bins", 30);
    an.diversity.histogram_bins = an.histogram_bins;
    if (ja.contains("consistency_buckets")) {
      const auto& jb = ja.at("consistency_buckets");
      if (!jb.is_array() || jb.empty())
        throw ConfigError("config: consistency_buckets must be a non-empty array");
      an.consistency_buckets.clear();
      for (const auto& pair : jb) {
        if (!pair.is_array() || pair.size() != 2)
          throw ConfigError("config: each consistency bucket must be [min, max)");
        const auto lo = pair[0].get<std::size_t>();
        const auto hi = pair[1].get<std::size_t>();
        if (lo >= hi)
          throw ConfigError("config: consistency bucket must have min < max");
        an.consistency_buckets.emplace_back(lo, hi);
      }
    }
    an.cross_pairs = get_count(ja, "analysis", "cross_pairs", 1000);
    an.min_half_frames = get_count(ja, "analysis", "min_half_frames", 50);
    an.noise_repeats = get_count(ja, "analysis", "noise_repeats", 5);
    an.noise_drivers = get_count(ja, "analysis", "noise_drivers", 8);
    if (an.cross_pairs == 0 || an.noise_repeats < 2 || an.noise_drivers == 0)
      throw ConfigError("config: invalid analysis settings");
  }

  return cfg;
}

}  // namespace drivercal::config
