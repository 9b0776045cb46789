#pragma once

#include <array>
#include <cstddef>

namespace avcl {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend Vec3 operator+(const Vec3& a, const Vec3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(const Vec3& a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator-(const Vec3& a) { return {-a.x, -a.y, -a.z}; }
  friend Vec3 operator*(double s, const Vec3& a) { return {s * a.x, s * a.y, s * a.z}; }
  friend bool operator==(const Vec3&, const Vec3&) = default;
};

double dot(const Vec3& a, const Vec3& b);

/// Row-major 3x3 matrix.
struct Mat3 {
  std::array<double, 9> m{};

  static Mat3 identity();

  double& operator()(std::size_t r, std::size_t c) { return m[r * 3 + c]; }
  double operator()(std::size_t r, std::size_t c) const { return m[r * 3 + c]; }

  Mat3 transpose() const;
  double determinant() const;

  friend Mat3 operator*(const Mat3& a, const Mat3& b);
  friend Vec3 operator*(const Mat3& a, const Vec3& v);
  friend bool operator==(const Mat3&, const Mat3&) = default;
};

/// Pinhole intrinsics in pixels. Pixel (u, v) addresses the continuous image
/// plane; integer pixel (j, i) covers [j, j+1) x [i, i+1).
struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;

  /// Throws std::invalid_argument unless fx, fy > 0 and all fields are finite.
  void validate() const;
  Mat3 matrix() const;
  Mat3 inverse() const;
};

/// 6-DoF pose vector: rotation parameters (rx, ry, rz) in radians followed by
/// translation (tx, ty, tz) in meters.
struct Pose6 {
  std::array<double, 6> v{};

  double rx() const { return v[0]; }
  double ry() const { return v[1]; }
  double rz() const { return v[2]; }
  double tx() const { return v[3]; }
  double ty() const { return v[4]; }
  double tz() const { return v[5]; }

  double& operator[](std::size_t i) { return v[i]; }
  double operator[](std::size_t i) const { return v[i]; }

  bool is_finite() const;
  friend bool operator==(const Pose6&, const Pose6&) = default;
};

/// Maps points from the source camera frame into the target camera frame:
/// x' = R x + T. This is a point transform, not the motion of the camera.
struct RigidTransform {
  Mat3 R = Mat3::identity();
  Vec3 T{};

  Vec3 apply(const Vec3& p) const { return R * p + T; }
};

/// R = Rz(rz) * Ry(ry) * Rx(rx), T = (tx, ty, tz).
RigidTransform pose_to_transform(const Pose6& p);

/// dR/drx, dR/dry, dR/drz at p. The translation Jacobian is the identity.
std::array<Mat3, 3> rotation_jacobian(const Pose6& p);

/// Recovers the pose whose pose_to_transform equals t (ry in (-pi/2, pi/2)).
Pose6 transform_to_pose(const RigidTransform& t);

RigidTransform invert_transform(const RigidTransform& t);

/// Returns the transform applying `second` after `first`.
RigidTransform compose(const RigidTransform& second, const RigidTransform& first);

/// depth * K^-1 * (u, v, 1). Throws std::invalid_argument for depth <= 0.
Vec3 backproject(double u, double v, double depth, const Intrinsics& K);

struct Projection {
  double u = 0.0;
  double v = 0.0;
  double z = 0.0;
  /// False when z <= 0; u and v are then meaningless and the point must be dropped.
  bool in_front = false;
};

Projection project(const Vec3& point, const Intrinsics& K);

}  // namespace avcl
