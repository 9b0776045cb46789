#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "avcl/autodiff.hpp"

namespace avcl {

/// Half-widths of the pose box: rotations in (-rot_max, rot_max) radians,
/// translations in (-trans_max, trans_max) meters.
struct PoseRange {
  double rot_max = 0.1;
  double trans_max = 0.2;

  void validate() const;
  double bound(std::size_t component) const { return component < 3 ? rot_max : trans_max; }
};

struct ModelConfig {
  int in_channels = 3;
  int trunk_channels = 8;
  int trunk_layers = 3;
  int head_channels = 8;
  /// 1 for metric depth regression, D for ordinal (DORN) logits.
  int depth_outputs = 1;
  PoseRange pose_range;

  void validate() const;
};

struct Conv {
  ad::Tensor weight;  ///< [O, C, k, k]
  ad::Tensor bias;    ///< [O]
};

/// Shared feature extractor: stacked 3x3 conv + relu.
struct Trunk {
  std::vector<Conv> layers;
};

/// 3x3 conv + relu, 1x1 conv + relu, then a per-pixel linear layer.
struct DepthHead {
  Conv conv3;
  Conv conv1;
  Conv linear;
};

/// 3x3 conv + relu, 2x2 average pool, 3x3 conv + relu, global mean,
/// fully-connected to 6, squashed into the pose range.
struct PoseHead {
  Conv conv_a;
  Conv conv_b;
  ad::Tensor fc_weight;  ///< [C, 6]
  ad::Tensor fc_bias;    ///< [1, 6]
};

class Model {
 public:
  /// He-uniform weights from `seed`, zero biases except the depth output bias.
  static Model init(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }

  Trunk trunk;
  DepthHead depth_head;
  PoseHead pose_head;

  std::vector<ad::Tensor> trunk_params() const;
  std::vector<ad::Tensor> depth_params() const;
  std::vector<ad::Tensor> pose_params() const;
  std::vector<std::pair<std::string, ad::Tensor>> named_parameters() const;

  /// Deep copy; the copy shares no buffers with this model.
  Model clone() const;

 private:
  ModelConfig config_;
};

/// image [C, H, W] -> features [trunk_channels, H, W].
ad::Tensor trunk_forward(ad::Tape& tape, const Trunk& trunk, const ad::Tensor& image);

/// Raw per-pixel head output [depth_outputs, H, W]. With `frozen_params` the
/// head's parameters are used as constants: gradients still reach `z` but
/// never the head.
ad::Tensor depth_head_raw(ad::Tape& tape, const DepthHead& head, const ad::Tensor& z, bool frozen_params = false);

/// Positive metric depth [H, W] = 0.1 + softplus(raw); requires depth_outputs == 1.
ad::Tensor depth_head_forward(ad::Tape& tape, const DepthHead& head, const ad::Tensor& z, bool frozen_params = false);

/// Unsquashed 6-vector [1, 6] from the pose branch.
ad::Tensor pose_head_raw(ad::Tape& tape, const PoseHead& head, const ad::Tensor& z);

/// range_i * (2 sigmoid(r_i) - 1), strictly inside the range for finite r.
ad::Tensor squash_pose(ad::Tape& tape, const ad::Tensor& raw, const PoseRange& range);

ad::Tensor pose_head_forward(ad::Tape& tape, const PoseHead& head, const ad::Tensor& z, const PoseRange& range);

}  // namespace avcl
