#pragma once

// Independent reference computations used by the tests. Nothing here calls
// into the library's numerical code paths it is checking.

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

namespace oracle {

struct Quat {
  double w, x, y, z;
};

inline Quat qmul(const Quat& a, const Quat& b) {
  return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z, a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
          a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x, a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

inline Quat axis_angle(double ax, double ay, double az, double angle) {
  const double s = std::sin(angle / 2);
  return {std::cos(angle / 2), ax * s, ay * s, az * s};
}

// Rotation about z, then y, then x applied right to left: q = qz * qy * qx.
inline Quat zyx(double rx, double ry, double rz) {
  return qmul(axis_angle(0, 0, 1, rz), qmul(axis_angle(0, 1, 0, ry), axis_angle(1, 0, 0, rx)));
}

inline std::array<double, 3> rotate(const Quat& q, const std::array<double, 3>& v) {
  const Quat p{0, v[0], v[1], v[2]};
  const Quat c{q.w, -q.x, -q.y, -q.z};
  const Quat r = qmul(qmul(q, p), c);
  return {r.x, r.y, r.z};
}

struct Metrics {
  double d1 = 0, d2 = 0, d3 = 0, rel = 0, log10 = 0, rms = 0, rms_log = 0;
  std::size_t n = 0;
};

// Straight per-pixel loop over pixels valid in both maps (valid = value > 0).
inline Metrics metrics(const std::vector<double>& pred, const std::vector<double>& gt) {
  Metrics m;
  double sq = 0, sql = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = pred[i], g = gt[i];
    if (!(p > 0) || !(g > 0) || !std::isfinite(p) || !std::isfinite(g)) continue;
    ++m.n;
    const double ratio = p / g > g / p ? p / g : g / p;
    if (ratio < 1.25) m.d1 += 1;
    if (ratio < 1.25 * 1.25) m.d2 += 1;
    if (ratio < 1.25 * 1.25 * 1.25) m.d3 += 1;
    m.rel += std::fabs(p - g) / g;
    m.log10 += std::fabs(std::log10(p) - std::log10(g));
    sq += (p - g) * (p - g);
    sql += (std::log(p) - std::log(g)) * (std::log(p) - std::log(g));
  }
  const double n = static_cast<double>(m.n);
  m.d1 /= n;
  m.d2 /= n;
  m.d3 /= n;
  m.rel /= n;
  m.log10 /= n;
  m.rms = std::sqrt(sq / n);
  m.rms_log = std::sqrt(sql / n);
  return m;
}

// Zero-padded same-size convolution, one output at a time.
inline std::vector<double> conv2d(const std::vector<double>& x, std::size_t C, std::size_t H, std::size_t W,
                                  const std::vector<double>& w, std::size_t O, std::size_t k,
                                  const std::vector<double>& b) {
  std::vector<double> out(O * H * W);
  const long pad = static_cast<long>(k / 2);
  for (std::size_t o = 0; o < O; ++o)
    for (long y = 0; y < static_cast<long>(H); ++y)
      for (long xx = 0; xx < static_cast<long>(W); ++xx) {
        double s = b[o];
        for (std::size_t c = 0; c < C; ++c)
          for (long dy = 0; dy < static_cast<long>(k); ++dy)
            for (long dx = 0; dx < static_cast<long>(k); ++dx) {
              const long sy = y + dy - pad, sx = xx + dx - pad;
              if (sy < 0 || sx < 0 || sy >= static_cast<long>(H) || sx >= static_cast<long>(W)) continue;
              s += w[((o * C + c) * k + dy) * k + dx] * x[(c * H + sy) * W + sx];
            }
        out[(o * H + y) * W + xx] = s;
      }
  return out;
}

// Target pixel of source pixel (j, i) at depth d after a pure translation t,
// by the hand formulas u = fx X / Z + cx. Returns false if it leaves the grid.
inline bool translate_pixel(int j, int i, double d, double fx, double fy, double cx, double cy,
                            const std::array<double, 3>& t, int W, int H, int* tj, int* ti, double* z) {
  const double X = d * (j + 0.5 - cx) / fx + t[0];
  const double Y = d * (i + 0.5 - cy) / fy + t[1];
  const double Z = d + t[2];
  if (Z <= 0) return false;
  const double u = fx * X / Z + cx, v = fy * Y / Z + cy;
  *tj = static_cast<int>(std::floor(u));
  *ti = static_cast<int>(std::floor(v));
  *z = Z;
  return *tj >= 0 && *ti >= 0 && *tj < W && *ti < H;
}

}  // namespace oracle
