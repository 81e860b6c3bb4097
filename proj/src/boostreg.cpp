#include "drivercal/boostreg.hpp"

#include "drivercal/errors.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace drivercal::boostreg {

using nlohmann::json;

double FeatureVector::operator[](std::size_t i) const {
  switch (i) {
    case 0: return velocity;
    case 1: return gap_m;
    case 2: return gap_s;
    case 3: return delta_v;
    default: throw std::out_of_range("feature index");
  }
}

const char* FeatureVector::name(std::size_t i) {
  switch (i) {
    case 0: return "velocity";
    case 1: return "gap_m";
    case 2: return "gap_s";
    case 3: return "delta_v";
    default: throw std::out_of_range("feature index");
  }
}

FeatureVector make_features(double velocity, double gap, double leader_velocity) {
  FeatureVector x;
  x.velocity = velocity;
  x.gap_m = gap;
  x.gap_s = gap / std::max(velocity, 0.1);
  x.delta_v = velocity - leader_velocity;
  return x;
}

std::vector<Sample> build_training_set(
    std::span<const trajdata::FollowEpisode> episodes) {
  std::vector<Sample> samples;
  for (const auto& ep : episodes) {
    for (std::size_t t = 0; t + 1 < ep.length(); ++t) {
      Sample s;
      s.x = make_features(ep.ego_velocity[t], ep.gap[t], ep.leader_velocity[t]);
      s.target = ep.ego_velocity[t + 1] - ep.ego_velocity[t];
      samples.push_back(s);
    }
  }
  return samples;
}

double Tree::predict(const FeatureVector& x) const {
  int i = 0;
  while (!nodes[static_cast<std::size_t>(i)].is_leaf()) {
    const TreeNode& nd = nodes[static_cast<std::size_t>(i)];
    i = x[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left
                                                                : nd.right;
  }
  return nodes[static_cast<std::size_t>(i)].value;
}

double Model::predict(const FeatureVector& x) const {
  double y = base_prediction;
  for (const auto& tree : trees) y += learning_rate * tree.predict(x);
  return y;
}

namespace {

struct TreeBuilder {
  std::span<const Sample> samples;
  const std::vector<double>& residuals;
  const TrainConfig& config;
  Tree tree;

  // Best axis-aligned split of `idx` by squared-error reduction.  Exact
  // greedy: every distinct feature value boundary is a candidate threshold.
  struct Split {
    bool found = false;
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
  };

  Split best_split(std::vector<std::size_t>& idx) const {
    const std::size_t n = idx.size();
    Split best;
    if (n < 2 * config.min_samples_leaf || n < 2) return best;

    double total = 0.0, total_sq = 0.0;
    for (std::size_t i : idx) {
      total += residuals[i];
      total_sq += residuals[i] * residuals[i];
    }
    const double parent_sse = total_sq - total * total / static_cast<double>(n);

    std::vector<std::size_t> sorted(idx);
    for (std::size_t f = 0; f < FeatureVector::kCount; ++f) {
      std::sort(sorted.begin(), sorted.end(), [&](std::size_t a, std::size_t b) {
        return samples[a].x[f] < samples[b].x[f];
      });
      double left_sum = 0.0, left_sq = 0.0;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        const double r = residuals[sorted[i]];
        left_sum += r;
        left_sq += r * r;
        const double xv = samples[sorted[i]].x[f];
        const double xn = samples[sorted[i + 1]].x[f];
        if (xn <= xv) continue;  // no boundary between equal values
        const std::size_t nl = i + 1;
        const std::size_t nr = n - nl;
        if (nl < config.min_samples_leaf || nr < config.min_samples_leaf)
          continue;
        const double right_sum = total - left_sum;
        const double right_sq = total_sq - left_sq;
        const double sse =
            (left_sq - left_sum * left_sum / static_cast<double>(nl)) +
            (right_sq - right_sum * right_sum / static_cast<double>(nr));
        const double gain = parent_sse - sse;
        if (gain <= 1e-12) continue;  // no real reduction
        // Ties keep the first candidate (lower feature index, lower
        // threshold), which makes tree construction fully deterministic.
        if (!best.found || gain > best.gain + 1e-12) {
          best.found = true;
          best.feature = static_cast<int>(f);
          best.threshold = 0.5 * (xv + xn);
          best.gain = gain;
        }
      }
    }
    return best;
  }

  int build(std::vector<std::size_t> idx, int depth) {
    const int node_id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();

    double mean = 0.0;
    for (std::size_t i : idx) mean += residuals[i];
    mean /= static_cast<double>(idx.size());

    Split split;
    if (depth < config.max_depth) split = best_split(idx);
    if (!split.found) {
      tree.nodes[static_cast<std::size_t>(node_id)].value = mean;
      return node_id;
    }

    std::vector<std::size_t> left_idx, right_idx;
    for (std::size_t i : idx) {
      if (samples[i].x[static_cast<std::size_t>(split.feature)] <= split.threshold)
        left_idx.push_back(i);
      else
        right_idx.push_back(i);
    }
    idx.clear();
    idx.shrink_to_fit();

    const int left = build(std::move(left_idx), depth + 1);
    const int right = build(std::move(right_idx), depth + 1);
    TreeNode& nd = tree.nodes[static_cast<std::size_t>(node_id)];
    nd.feature = split.feature;
    nd.threshold = split.threshold;
    nd.left = left;
    nd.right = right;
    return node_id;
  }
};

}  // namespace

Model train(std::span<const Sample> samples, const TrainConfig& config,
            TrainMetrics* metrics) {
  if (samples.empty()) throw NoDataError("boost: empty training set");
  if (config.rounds == 0) throw ConfigError("boost: rounds must be positive");
  if (config.max_depth < 1) throw ConfigError("boost: max_depth must be >= 1");
  if (!(config.learning_rate > 0.0))
    throw ConfigError("boost: learning_rate must be positive");
  if (config.min_samples_leaf < 1)
    throw ConfigError("boost: min_samples_leaf must be >= 1");

  Model model;
  model.learning_rate = config.learning_rate;
  {
    double sum = 0.0;
    for (const auto& s : samples) sum += s.target;
    model.base_prediction = sum / static_cast<double>(samples.size());
  }

  std::vector<double> residuals(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i)
    residuals[i] = samples[i].target - model.base_prediction;

  std::vector<std::size_t> all(samples.size());
  std::iota(all.begin(), all.end(), std::size_t{0});

  for (std::size_t round = 0; round < config.rounds; ++round) {
    TreeBuilder builder{samples, residuals, config, {}};
    builder.build(all, 0);
    Tree tree = std::move(builder.tree);

    double sse = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      residuals[i] -= config.learning_rate * tree.predict(samples[i].x);
      sse += residuals[i] * residuals[i];
    }
    model.trees.push_back(std::move(tree));
    if (metrics != nullptr)
      metrics->train_loss.push_back(sse / static_cast<double>(samples.size()));
  }
  return model;
}

double predict_step(const Model& model, const FeatureVector& x) {
  return model.predict(x);
}

idm::RolloutResult rollout(const Model& model, const idm::State& initial,
                           std::span<const double> leader_velocities, double dt,
                           const idm::Options& opts) {
  if (leader_velocities.empty())
    throw std::invalid_argument("boost rollout: empty leader velocity series");
  if (!(initial.gap > 0.0))
    throw std::domain_error("boost rollout: nonpositive gap");

  idm::RolloutResult out;
  out.velocities.reserve(leader_velocities.size());
  out.gaps.reserve(leader_velocities.size());
  out.velocities.push_back(initial.velocity);
  out.gaps.push_back(initial.gap);

  double v = initial.velocity;
  double gap = initial.gap;
  for (std::size_t t = 0; t + 1 < leader_velocities.size(); ++t) {
    if (out.collided) {
      out.velocities.push_back(out.velocities.back());
      out.gaps.push_back(out.gaps.back());
      continue;
    }
    const double dv = model.predict(make_features(v, gap, leader_velocities[t]));
    const double v_new = std::max(0.0, v + dv);
    const double v_for_gap =
        opts.gap_update == idm::GapUpdate::semi_implicit ? v_new : v;
    gap += (leader_velocities[t] - v_for_gap) * dt;
    v = v_new;
    out.velocities.push_back(v);
    out.gaps.push_back(gap);
    if (gap <= 0.0) {
      out.collided = true;
      out.collision_frame = t + 1;
    }
  }
  return out;
}

namespace {

json dump_tree(const Tree& tree) {
  json nodes = json::array();
  for (const auto& nd : tree.nodes)
    nodes.push_back(json{{"feature", nd.feature},
                         {"threshold", nd.threshold},
                         {"left", nd.left},
                         {"right", nd.right},
                         {"value", nd.value}});
  return nodes;
}

Tree load_tree(const json& jnodes) {
  Tree tree;
  for (const auto& jn : jnodes) {
    TreeNode nd;
    nd.feature = jn.at("feature").get<int>();
    nd.threshold = jn.at("threshold").get<double>();
    nd.left = jn.at("left").get<int>();
    nd.right = jn.at("right").get<int>();
    nd.value = jn.at("value").get<double>();
    tree.nodes.push_back(nd);
  }
  if (tree.nodes.empty()) throw SchemaError("model file: empty tree");
  return tree;
}

}  // namespace

void save_model(const std::filesystem::path& path, const Model& model) {
  json trees = json::array();
  for (const auto& tree : model.trees) trees.push_back(dump_tree(tree));
  json j{{"format_version", 1},
         {"model_type", "boosted_delta_v"},
         {"base_prediction", model.base_prediction},
         {"learning_rate", model.learning_rate},
         {"features", {"velocity", "gap_m", "gap_s", "delta_v"}},
         {"trees", std::move(trees)}};
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write model file: " + path.string());
  out << j.dump() << '\n';
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open model file: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError("malformed model file " + path.string() + ": " + e.what());
  }
  try {
    if (j.at("model_type").get<std::string>() != "boosted_delta_v")
      throw SchemaError("model file " + path.string() + ": unknown model_type");
    Model model;
    model.base_prediction = j.at("base_prediction").get<double>();
    model.learning_rate = j.at("learning_rate").get<double>();
    for (const auto& jt : j.at("trees")) model.trees.push_back(load_tree(jt));
    return model;
  } catch (const json::exception& e) {
    throw SchemaError("model file " + path.string() +
                      " does not match the expected layout: " + e.what());
  }
}

void write_loss_csv(const std::filesystem::path& path,
                    const TrainMetrics& metrics) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write loss file: " + path.string());
  out << "round,train_loss\n";
  char buf[64];
  for (std::size_t i = 0; i < metrics.train_loss.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", i + 1, metrics.train_loss[i]);
    out << buf;
  }
}

}  // namespace drivercal::boostreg
