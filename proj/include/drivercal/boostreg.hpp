#pragma once

#include "drivercal/idm.hpp"
#include "drivercal/trajdata.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace drivercal::boostreg {

// Per-frame predictor state.  gap_s is the time gap with the velocity floored
// at 0.1 m/s so standstill frames stay finite; delta_v = v_ego - v_leader.
struct FeatureVector {
  double velocity = 0.0;
  double gap_m = 0.0;
  double gap_s = 0.0;
  double delta_v = 0.0;

  static constexpr std::size_t kCount = 4;
  double operator[](std::size_t i) const;
  static const char* name(std::size_t i);
};

FeatureVector make_features(double velocity, double gap, double leader_velocity);

// Supervised pair: features at frame t, target = v(t+1) - v(t).
struct Sample {
  FeatureVector x;
  double target = 0.0;
};

// Consecutive-frame training pairs from every episode (one sample per frame
// pair, episodes never straddled).
std::vector<Sample> build_training_set(
    std::span<const trajdata::FollowEpisode> episodes);

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf prediction

  bool is_leaf() const { return feature < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  double predict(const FeatureVector& x) const;
};

struct Model {
  double base_prediction = 0.0;  // mean training target
  double learning_rate = 0.1;
  std::vector<Tree> trees;

  double predict(const FeatureVector& x) const;
};

struct TrainConfig {
  std::size_t rounds = 2000;
  int max_depth = 4;
  double learning_rate = 0.1;
  std::size_t min_samples_leaf = 1;
};

struct TrainMetrics {
  // Mean squared training error after each boosting round; non-increasing.
  std::vector<double> train_loss;
};

// Gradient boosting for squared loss: each round fits a regression tree to
// the current residuals by exact greedy variance-reduction splits and adds it
// with the learning rate.  Deterministic (no subsampling).  Throws
// ConfigError on a non-positive round count/depth/rate and NoDataError on an
// empty training set.
Model train(std::span<const Sample> samples, const TrainConfig& config,
            TrainMetrics* metrics = nullptr);

// Velocity delta predicted for one frame transition.
double predict_step(const Model& model, const FeatureVector& x);

// Closed-loop rollout of the learned one-step model along a leader series,
// with the same velocity clamp, gap update scheme, and collision freezing as
// the physics rollout.
idm::RolloutResult rollout(const Model& model, const idm::State& initial,
                           std::span<const double> leader_velocities, double dt,
                           const idm::Options& opts = {});

void save_model(const std::filesystem::path& path, const Model& model);
Model load_model(const std::filesystem::path& path);

void write_loss_csv(const std::filesystem::path& path,
                    const TrainMetrics& metrics);

}  // namespace drivercal::boostreg
