#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "avcl/autodiff.hpp"
#include "avcl/depth_map.hpp"
#include "avcl/geometry.hpp"
#include "avcl/losses.hpp"
#include "avcl/metrics.hpp"
#include "avcl/models.hpp"
#include "avcl/random.hpp"

namespace avcl {

enum class StrategyKind { baseline, fixed, random, adversarial };

/// How the warp pose is chosen each step.
struct PoseStrategy {
  StrategyKind kind = StrategyKind::baseline;
  Pose6 fixed_pose;  ///< used by `fixed`
  std::string label = "baseline";

  static PoseStrategy baseline();
  static PoseStrategy fixed(const Pose6& pose, std::string label = "fixed");
  static PoseStrategy random();
  static PoseStrategy adversarial();
};

/// Fixed-pose presets: 'A' small yaw, 'B' small forward translation, 'C' both.
Pose6 fixed_pose_preset(char which);

/// Accepts baseline, random, adversarial, fixed-a, fixed-b, fixed-c and
/// fixed:rx,ry,rz,tx,ty,tz.
PoseStrategy parse_strategy(const std::string& text);

/// Views used for held-out multi-view evaluation; the first is the identity.
std::vector<Pose6> default_eval_poses();

struct TrainConfig {
  LossConfig loss;
  PoseStrategy strategy;
  ModelConfig model;
  double lr = 0.02;
  double momentum = 0.0;
  int steps = 2000;
  std::uint64_t seed = 1;
  std::uint64_t train_scene_begin = 0;
  int train_scenes = 200;
  std::uint64_t eval_scene_begin = 100000;
  int eval_scenes = 16;
  int width = 64;
  int height = 64;
  /// Evaluate every this many steps; 0 evaluates only after the last step.
  int eval_every = 0;
  std::vector<Pose6> eval_poses = default_eval_poses();

  /// Throws std::invalid_argument; also checks the fixed pose lies inside the pose range.
  void validate() const;
};

struct Sample {
  ad::Tensor image;  ///< [3, H, W]
  DepthMap depth;
};

Sample make_sample(std::uint64_t scene_seed, int width, int height);
std::vector<Sample> make_dataset(std::uint64_t first_seed, int count, int width, int height);

struct StepReport {
  double l_dep = 0.0;
  std::optional<double> l_warp;
  std::optional<double> l_adv;
  std::optional<Pose6> pose;
  /// The warp branch had an empty mask and was skipped.
  bool warp_skipped = false;
};

/// Owns the model and one optimizer per parameter set.
class Trainer {
 public:
  Trainer(TrainConfig config, Model model);

  /// One joint forward/backward pass followed by an SGD step on every
  /// parameter set the strategy trains. `dep_scale` multiplies L_dep in the
  /// backward pass (1 in normal training).
  StepReport step(const Sample& sample, double dep_scale = 1.0);

  /// The warp objective seen by the pose branch, L_warp - sum lambda p^2, at
  /// the current parameters. Adversarial strategy only.
  double pose_objective(const Sample& sample) const;

  const Model& model() const { return model_; }
  Model& model() { return model_; }
  const TrainConfig& config() const { return config_; }
  const Intrinsics& intrinsics() const { return K_; }

 private:
  TrainConfig config_;
  Model model_;
  Intrinsics K_;
  ad::Sgd trunk_opt_;
  ad::Sgd depth_opt_;
  ad::Sgd pose_opt_;
  Rng pose_rng_;
};

/// Depth prediction from the trunk and depth head only.
DepthMap predict_depth(const Model& model, const ad::Tensor& image, const LossConfig& loss);

struct ViewSummary {
  std::optional<MetricsReport> mean;  ///< metrics averaged over scenes where the view exists
  int scenes = 0;
};

struct EvalSummary {
  std::vector<ViewSummary> views;
  /// Mean delta1 over every (scene, view) pair that produced a report.
  double mean_delta1 = 0.0;
};

EvalSummary evaluate_multiview(const Model& model, const std::vector<Sample>& scenes, const std::vector<Pose6>& poses,
                               const Intrinsics& K, const LossConfig& loss);

struct TrajectoryPoint {
  int step = 0;
  EvalSummary eval;
};

struct TrainResult {
  Model model;
  std::vector<TrajectoryPoint> trajectory;
  int warp_skips = 0;
};

using StepObserver = std::function<void(int step, const StepReport&)>;

TrainResult train_loop(const TrainConfig& config, const StepObserver& observer = {});

/// Tab-separated, one line per evaluation point: step, then the seven metrics
/// of each view in order ("nan" for an absent view). Starts with a '#' header.
std::string format_trajectory(const std::vector<TrajectoryPoint>& trajectory, std::size_t views);

struct BenchRow {
  std::string strategy;
  std::vector<double> trial_delta1;  ///< held-out multi-view mean delta1 per trial
  std::vector<double> mean_metrics;  ///< seven metrics averaged over views and trials
  double mean_delta1 = 0.0;
};

/// Trains every strategy once per trial; trial t uses seed base.seed + t for
/// all strategies so they see identical initializations and data orders.
std::vector<BenchRow> run_benchmark(const TrainConfig& base, const std::vector<PoseStrategy>& strategies, int trials,
                                    const std::function<void(const std::string&)>& progress = {});

std::string format_benchmark(const std::vector<BenchRow>& rows);

/// TrainConfig from key = value pairs. Required keys: loss, strategy, lr,
/// steps, seed. Throws std::invalid_argument naming every missing key.
TrainConfig train_config_from(const std::map<std::string, std::string>& kv);

}  // namespace avcl
