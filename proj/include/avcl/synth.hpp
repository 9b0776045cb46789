#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "avcl/autodiff.hpp"
#include "avcl/depth_map.hpp"
#include "avcl/geometry.hpp"

// Procedural box-and-plane scenes with exact analytic depth.
//
// Scenes live in the frame of the default camera: +z forward, +x right,
// +y down, camera at the origin. Rendering takes the camera *pose*, the
// camera-to-world transform, and internally uses its inverse as the point
// transform. Sign convention, worked through: pose_to_transform of
// p = (0, 0, 0, 0, 0, -0.5) maps every point 0.5 m closer (x' = x - 0.5 z^).
// That is the view of a camera which moved 0.5 m forward, whose pose is
// invert_transform(pose_to_transform(p)) = (I, (0, 0, +0.5)). A wall at
// z = 2 then renders at depth 1.5, matching warp_depth of the identity render.

namespace avcl {

/// Points x with dot(normal, x) == offset.
struct Plane {
  Vec3 normal;
  double offset = 0.0;
};

/// Axis-aligned box [lo, hi].
struct Box {
  Vec3 lo;
  Vec3 hi;
};

struct Primitive {
  std::variant<Plane, Box> shape;
  double albedo = 1.0;
};

struct Scene {
  std::uint64_t seed = 0;
  std::vector<Primitive> primitives;
};

/// Back wall at z in [4, 8] m, floor and ceiling planes, 3 to 8 boxes.
/// Deterministic per seed.
Scene generate_scene(std::uint64_t seed);

/// Intrinsics with a fixed field of view for a width x height grid.
Intrinsics default_intrinsics(int width, int height);

/// Pose of a camera whose view equals the point transform t.
RigidTransform camera_pose_for(const RigidTransform& point_transform);

struct RenderResult {
  DepthMap depth;
  /// Index into scene.primitives of the nearest hit, -1 where nothing was hit.
  std::vector<int> primitive;
  /// Absolute cosine between the viewing ray and the surface normal.
  std::vector<double> facing;
};

/// Casts one ray through each pixel center and keeps the nearest positive hit.
RenderResult render(const Scene& scene, const RigidTransform& camera_pose, const Intrinsics& K, int width,
                    int height);
DepthMap render_depth(const Scene& scene, const RigidTransform& camera_pose, const Intrinsics& K, int width,
                      int height);

/// Network input [3, H, W]: albedo-modulated headlight shading, the same
/// shading attenuated with depth, and the normalized image row.
ad::Tensor shade_image(const Scene& scene, const RenderResult& render);

/// One primitive per line: "plane nx ny nz offset albedo" or
/// "box lx ly lz hx hy hz albedo"; '#' starts a comment line.
std::string dump_scene(const Scene& scene);
Scene parse_scene(const std::string& text);

/// True where a pixel's 3x3 neighbourhood mixes primitives or touches an
/// unhit pixel (depth discontinuities and creases).
Mask boundary_mask(const std::vector<int>& primitive, int width, int height);

}  // namespace avcl
