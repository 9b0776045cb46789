#include "avcl/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace avcl {

namespace {

Mat3 rot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  return Mat3{{1, 0, 0, 0, c, -s, 0, s, c}};
}

Mat3 rot_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  return Mat3{{c, 0, s, 0, 1, 0, -s, 0, c}};
}

Mat3 rot_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  return Mat3{{c, -s, 0, s, c, 0, 0, 0, 1}};
}

Mat3 d_rot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  return Mat3{{0, 0, 0, 0, -s, -c, 0, c, -s}};
}

Mat3 d_rot_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  return Mat3{{-s, 0, c, 0, 0, 0, -c, 0, -s}};
}

Mat3 d_rot_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  return Mat3{{-s, -c, 0, c, -s, 0, 0, 0, 0}};
}

}  // namespace

double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

Mat3 Mat3::identity() { return Mat3{{1, 0, 0, 0, 1, 0, 0, 0, 1}}; }

Mat3 Mat3::transpose() const {
  Mat3 t;
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 3; ++c) t(r, c) = (*this)(c, r);
  return t;
}

double Mat3::determinant() const {
  const auto& a = *this;
  return a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) -
         a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0)) +
         a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0));
}

Mat3 operator*(const Mat3& a, const Mat3& b) {
  Mat3 out;
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 3; ++c)
      out(r, c) = a(r, 0) * b(0, c) + a(r, 1) * b(1, c) + a(r, 2) * b(2, c);
  return out;
}

Vec3 operator*(const Mat3& a, const Vec3& v) {
  return {a(0, 0) * v.x + a(0, 1) * v.y + a(0, 2) * v.z,
          a(1, 0) * v.x + a(1, 1) * v.y + a(1, 2) * v.z,
          a(2, 0) * v.x + a(2, 1) * v.y + a(2, 2) * v.z};
}

void Intrinsics::validate() const {
  if (!std::isfinite(fx) || !std::isfinite(fy) || !std::isfinite(cx) || !std::isfinite(cy))
    throw std::invalid_argument("intrinsics must be finite");
  if (fx <= 0.0 || fy <= 0.0)
    throw std::invalid_argument("focal lengths must be positive");
}

Mat3 Intrinsics::matrix() const { return Mat3{{fx, 0, cx, 0, fy, cy, 0, 0, 1}}; }

Mat3 Intrinsics::inverse() const {
  return Mat3{{1.0 / fx, 0, -cx / fx, 0, 1.0 / fy, -cy / fy, 0, 0, 1}};
}

bool Pose6::is_finite() const {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

RigidTransform pose_to_transform(const Pose6& p) {
  if (!p.is_finite()) throw std::invalid_argument("pose has non-finite components");
  return RigidTransform{rot_z(p.rz()) * rot_y(p.ry()) * rot_x(p.rx()), Vec3{p.tx(), p.ty(), p.tz()}};
}

std::array<Mat3, 3> rotation_jacobian(const Pose6& p) {
  if (!p.is_finite()) throw std::invalid_argument("pose has non-finite components");
  const Mat3 rx = rot_x(p.rx()), ry = rot_y(p.ry()), rz = rot_z(p.rz());
  return {rz * ry * d_rot_x(p.rx()), rz * d_rot_y(p.ry()) * rx, d_rot_z(p.rz()) * ry * rx};
}

Pose6 transform_to_pose(const RigidTransform& t) {
  // R = Rz Ry Rx gives R20 = -sin(ry), R21 = cos(ry) sin(rx), R10 = sin(rz) cos(ry).
  const Mat3& R = t.R;
  const double ry = std::asin(std::clamp(-R(2, 0), -1.0, 1.0));
  const double rx = std::atan2(R(2, 1), R(2, 2));
  const double rz = std::atan2(R(1, 0), R(0, 0));
  return Pose6{{rx, ry, rz, t.T.x, t.T.y, t.T.z}};
}

RigidTransform invert_transform(const RigidTransform& t) {
  const Mat3 rt = t.R.transpose();
  return RigidTransform{rt, -(rt * t.T)};
}

RigidTransform compose(const RigidTransform& second, const RigidTransform& first) {
  return RigidTransform{second.R * first.R, second.R * first.T + second.T};
}

Vec3 backproject(double u, double v, double depth, const Intrinsics& K) {
  if (!(depth > 0.0) || !std::isfinite(depth))
    throw std::invalid_argument("backproject requires a finite positive depth");
  return {depth * (u - K.cx) / K.fx, depth * (v - K.cy) / K.fy, depth};
}

Projection project(const Vec3& point, const Intrinsics& K) {
  if (!(point.z > 0.0)) return Projection{0.0, 0.0, point.z, false};
  return Projection{K.fx * point.x / point.z + K.cx, K.fy * point.y / point.z + K.cy, point.z, true};
}

}  // namespace avcl
