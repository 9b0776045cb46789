#pragma once

#include <array>
#include <span>
#include <vector>

#include "avcl/autodiff.hpp"
#include "avcl/depth_map.hpp"
#include "avcl/geometry.hpp"

namespace avcl {

inline constexpr int kNoSource = -1;

struct WarpResult {
  /// The warped map; a target pixel is valid iff some source point landed in it.
  DepthMap depth;
  /// Row-major index of the winning (nearest) source pixel per target pixel,
  /// kNoSource where nothing landed.
  std::vector<int> hit_source;
};

/// Forward-warps a depth map into the view reached by `pose`.
///
/// Every valid source pixel (j, i) is back-projected through its center
/// (j + 0.5, i + 0.5), mapped by pose_to_transform(pose), and re-projected.
/// Points with z <= 0 or landing outside the grid after flooring are dropped.
/// Each target pixel keeps the minimum z among the points landing in it; ties
/// go to the lowest source index. Throws std::invalid_argument for an invalid
/// map or intrinsics.
WarpResult warp_depth(const DepthMap& source, const Pose6& pose, const Intrinsics& K);

struct WarpGradient {
  std::vector<double> source;  ///< d/dD_s, same layout as the source map
  std::array<double, 6> pose{};
};

/// Pulls an upstream gradient on the warped depths back to the source depths
/// and the pose. Only winning points carry gradient; the floor assignment of
/// target pixels is treated as locally constant. Upstream entries at invalid
/// target pixels are ignored.
WarpGradient warp_depth_backward(const DepthMap& source, const Pose6& pose, const Intrinsics& K,
                                 const WarpResult& result, std::span<const double> upstream);

struct WarpedTensor {
  ad::Tensor depth;  ///< [H, W]; zero at invalid target pixels
  WarpResult result;
};

/// The warp as a tape op. `depth` is [H, W] with validity `source_valid`;
/// `pose` is a 6-vector tensor. Gradients reach `depth` and `pose` when they
/// require them.
WarpedTensor warp_tensor(ad::Tape& tape, const ad::Tensor& depth, const Mask& source_valid, const ad::Tensor& pose,
                         const Intrinsics& K);

}  // namespace avcl
