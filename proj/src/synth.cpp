#include "avcl/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

#include "avcl/random.hpp"

namespace avcl {

namespace {

constexpr double kHitEpsilon = 1e-9;

double intersect(const Plane& pl, const Vec3& o, const Vec3& d) {
  const double denom = dot(pl.normal, d);
  if (denom == 0.0) return -1.0;
  return (pl.offset - dot(pl.normal, o)) / denom;
}

// Slab test; returns the entry parameter (or exit when starting inside).
double intersect(const Box& b, const Vec3& o, const Vec3& d, Vec3* normal) {
  double tmin = -std::numeric_limits<double>::infinity(), tmax = std::numeric_limits<double>::infinity();
  int axis_min = -1;
  const double os[3] = {o.x, o.y, o.z}, ds[3] = {d.x, d.y, d.z};
  const double lo[3] = {b.lo.x, b.lo.y, b.lo.z}, hi[3] = {b.hi.x, b.hi.y, b.hi.z};
  for (int a = 0; a < 3; ++a) {
    if (ds[a] == 0.0) {
      if (os[a] < lo[a] || os[a] > hi[a]) return -1.0;
      continue;
    }
    double t0 = (lo[a] - os[a]) / ds[a], t1 = (hi[a] - os[a]) / ds[a];
    if (t0 > t1) std::swap(t0, t1);
    if (t0 > tmin) {
      tmin = t0;
      axis_min = a;
    }
    tmax = std::min(tmax, t1);
  }
  if (tmin > tmax || tmax <= kHitEpsilon) return -1.0;
  if (normal && axis_min >= 0) {
    double n[3] = {0, 0, 0};
    n[axis_min] = 1.0;
    *normal = Vec3{n[0], n[1], n[2]};
  }
  return tmin > kHitEpsilon ? tmin : tmax;
}

}  // namespace

Intrinsics default_intrinsics(int width, int height) {
  const double f = 0.8 * static_cast<double>(width);
  return Intrinsics{f, f, 0.5 * width, 0.5 * height};
}

RigidTransform camera_pose_for(const RigidTransform& point_transform) { return invert_transform(point_transform); }

Scene generate_scene(std::uint64_t seed) {
  Rng rng(seed);
  Scene scene;
  scene.seed = seed;
  const double back = rng.uniform(4.0, 8.0);
  const double floor_y = rng.uniform(1.0, 1.6);
  const double ceil_y = -rng.uniform(1.0, 1.6);
  scene.primitives.push_back({Plane{{0, 0, 1}, back}, rng.uniform(0.4, 0.9)});
  scene.primitives.push_back({Plane{{0, 1, 0}, floor_y}, rng.uniform(0.4, 0.9)});
  scene.primitives.push_back({Plane{{0, 1, 0}, ceil_y}, rng.uniform(0.4, 0.9)});

  // Horizontal half field of view of default_intrinsics is atan(0.625).
  constexpr double half_fov_slope = 0.625;
  const int boxes = 3 + static_cast<int>(rng.below(6));
  for (int k = 0; k < boxes; ++k) {
    const double sx = rng.uniform(0.3, 1.0), sy = rng.uniform(0.3, 1.2), sz = rng.uniform(0.3, 1.0);
    const double zc = rng.uniform(1.5 + 0.5 * sz, back - 0.1 - 0.5 * sz);
    const double xr = 0.8 * half_fov_slope * zc;
    const double xc = rng.uniform(-xr, xr);
    double y_hi = floor_y;
    if (rng.uniform(0.0, 1.0) < 0.35) y_hi = rng.uniform(ceil_y + sy, floor_y);
    const Box b{{xc - 0.5 * sx, y_hi - sy, zc - 0.5 * sz}, {xc + 0.5 * sx, y_hi, zc + 0.5 * sz}};
    scene.primitives.push_back({b, rng.uniform(0.2, 1.0)});
  }
  return scene;
}

RenderResult render(const Scene& scene, const RigidTransform& camera_pose, const Intrinsics& K, int width,
                    int height) {
  K.validate();
  RenderResult out{DepthMap(width, height), std::vector<int>(static_cast<std::size_t>(width) * height, -1),
                   std::vector<double>(static_cast<std::size_t>(width) * height, 0.0)};
  const Vec3 origin = camera_pose.T;
  for (int i = 0; i < height; ++i) {
    for (int j = 0; j < width; ++j) {
      // Camera-frame direction with unit z, so the ray parameter is the depth.
      const Vec3 dc{(j + 0.5 - K.cx) / K.fx, (i + 0.5 - K.cy) / K.fy, 1.0};
      const Vec3 d = camera_pose.R * dc;
      double best = std::numeric_limits<double>::infinity();
      int best_id = -1;
      Vec3 best_normal;
      for (std::size_t p = 0; p < scene.primitives.size(); ++p) {
        Vec3 n;
        double t = -1.0;
        if (const auto* pl = std::get_if<Plane>(&scene.primitives[p].shape)) {
          t = intersect(*pl, origin, d);
          n = pl->normal;
        } else {
          t = intersect(std::get<Box>(scene.primitives[p].shape), origin, d, &n);
        }
        if (t > kHitEpsilon && t < best) {
          best = t;
          best_id = static_cast<int>(p);
          best_normal = n;
        }
      }
      if (best_id < 0) continue;
      const std::size_t idx = out.depth.index(j, i);
      out.depth.set(idx, best);
      out.primitive[idx] = best_id;
      out.facing[idx] = std::abs(dot(best_normal, d)) / std::sqrt(dot(d, d));
    }
  }
  return out;
}

DepthMap render_depth(const Scene& scene, const RigidTransform& camera_pose, const Intrinsics& K, int width,
                      int height) {
  return render(scene, camera_pose, K, width, height).depth;
}

ad::Tensor shade_image(const Scene& scene, const RenderResult& r) {
  const int W = r.depth.width(), H = r.depth.height();
  const std::size_t plane = r.depth.size();
  std::vector<double> img(3 * plane, 0.0);
  for (int i = 0; i < H; ++i) {
    for (int j = 0; j < W; ++j) {
      const std::size_t idx = r.depth.index(j, i);
      img[2 * plane + idx] = (i + 0.5) / H - 0.5;
      if (r.primitive[idx] < 0) continue;
      const double albedo = scene.primitives[static_cast<std::size_t>(r.primitive[idx])].albedo;
      const double shade = 0.3 + 0.7 * r.facing[idx];
      img[idx] = albedo * shade;
      img[plane + idx] = shade * std::exp(-r.depth[idx] / 6.0);
    }
  }
  return ad::Tensor::from({3, static_cast<std::size_t>(H), static_cast<std::size_t>(W)}, std::move(img));
}

std::string dump_scene(const Scene& scene) {
  std::ostringstream os;
  char buf[512];
  os << "# avcl scene seed " << scene.seed << '\n';
  for (const Primitive& p : scene.primitives) {
    if (const auto* pl = std::get_if<Plane>(&p.shape)) {
      std::snprintf(buf, sizeof buf, "plane %.17g %.17g %.17g %.17g %.17g\n", pl->normal.x, pl->normal.y,
                    pl->normal.z, pl->offset, p.albedo);
    } else {
      const Box& b = std::get<Box>(p.shape);
      std::snprintf(buf, sizeof buf, "box %.17g %.17g %.17g %.17g %.17g %.17g %.17g\n", b.lo.x, b.lo.y, b.lo.z,
                    b.hi.x, b.hi.y, b.hi.z, p.albedo);
    }
    os << buf;
  }
  return os.str();
}

Scene parse_scene(const std::string& text) {
  Scene scene;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream hs(line);
      std::string hash, avcl, scene_kw, kw;
      std::uint64_t seed = 0;
      if (hs >> hash >> avcl >> scene_kw >> kw >> seed && kw == "seed") scene.seed = seed;
      continue;
    }
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    Primitive p;
    if (kind == "plane") {
      Plane pl;
      ls >> pl.normal.x >> pl.normal.y >> pl.normal.z >> pl.offset >> p.albedo;
      p.shape = pl;
    } else if (kind == "box") {
      Box b;
      ls >> b.lo.x >> b.lo.y >> b.lo.z >> b.hi.x >> b.hi.y >> b.hi.z >> p.albedo;
      p.shape = b;
    } else {
      throw std::invalid_argument("scene line " + std::to_string(lineno) + ": unknown primitive '" + kind + "'");
    }
    if (ls.fail()) throw std::invalid_argument("scene line " + std::to_string(lineno) + ": malformed numbers");
    scene.primitives.push_back(p);
  }
  return scene;
}

Mask boundary_mask(const std::vector<int>& primitive, int width, int height) {
  Mask out(primitive.size(), 0);
  for (int i = 0; i < height; ++i) {
    for (int j = 0; j < width; ++j) {
      const int id = primitive[static_cast<std::size_t>(i) * width + j];
      bool edge = id < 0;
      for (int di = -1; di <= 1 && !edge; ++di)
        for (int dj = -1; dj <= 1 && !edge; ++dj) {
          const int y = i + di, x = j + dj;
          if (y < 0 || y >= height || x < 0 || x >= width) continue;
          if (primitive[static_cast<std::size_t>(y) * width + x] != id) edge = true;
        }
      out[static_cast<std::size_t>(i) * width + j] = edge ? 1 : 0;
    }
  }
  return out;
}

}  // namespace avcl
