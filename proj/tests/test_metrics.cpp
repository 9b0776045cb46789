#include <doctest.h>

#include <cmath>

#include "avcl/metrics.hpp"
#include "avcl/random.hpp"
#include "avcl/synth.hpp"
#include "avcl/warp.hpp"
#include "oracles.hpp"

using namespace avcl;

namespace {

void check_against_oracle(const MetricsReport& r, const oracle::Metrics& o, double tol) {
  CHECK(r.pixels == o.n);
  CHECK(std::abs(r.delta1 - o.d1) <= tol);
  CHECK(std::abs(r.delta2 - o.d2) <= tol);
  CHECK(std::abs(r.delta3 - o.d3) <= tol);
  CHECK(std::abs(r.rel - o.rel) <= tol);
  CHECK(std::abs(r.log10 - o.log10) <= tol);
  CHECK(std::abs(r.rms - o.rms) <= tol);
  CHECK(std::abs(r.rms_log - o.rms_log) <= tol);
}

std::vector<double> masked_values(const DepthMap& d) {
  std::vector<double> v(d.size(), 0.0);
  for (std::size_t i = 0; i < v.size(); ++i)
    if (d.valid(i)) v[i] = d[i];
  return v;
}

}  // namespace

TEST_CASE("perfect prediction") {
  const DepthMap gt = DepthMap::from_values(3, 2, {1, 2, 3, 4, 5, 6});
  const MetricsReport r = evaluate(gt, gt);
  CHECK(r.delta1 == 1.0);
  CHECK(r.delta2 == 1.0);
  CHECK(r.delta3 == 1.0);
  CHECK(r.rel == 0.0);
  CHECK(r.log10 == 0.0);
  CHECK(r.rms == 0.0);
  CHECK(r.rms_log == 0.0);
  CHECK(r.pixels == 6);
}

TEST_CASE("ratio of exactly 1.25 fails delta1 and passes delta2") {
  // Powers of two keep 1.25 * g exact in binary.
  const std::vector<double> g{0.5, 1, 2, 4, 8, 0.25};
  std::vector<double> p(g);
  for (double& x : p) x *= 1.25;
  const MetricsReport r = evaluate(DepthMap::from_values(3, 2, p), DepthMap::from_values(3, 2, g));
  CHECK(r.delta1 == 0.0);
  CHECK(r.delta2 == 1.0);
  CHECK(r.delta3 == 1.0);
  CHECK(r.rel == 0.25);
}

TEST_CASE("agrees with a per-pixel recomputation") {
  Rng rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> p(20 * 15), g(20 * 15);
    for (std::size_t i = 0; i < p.size(); ++i) {
      g[i] = rng.unit() < 0.1 ? 0.0 : rng.uniform(0.2, 10);
      p[i] = rng.unit() < 0.1 ? -1.0 : g[i] * std::exp(rng.uniform(-0.6, 0.6)) + (g[i] == 0 ? 1 : 0);
    }
    const MetricsReport r = evaluate(DepthMap::from_values(20, 15, p), DepthMap::from_values(20, 15, g));
    check_against_oracle(r, oracle::metrics(p, g), 1e-12);
  }
}

TEST_CASE("evaluation errors") {
  const DepthMap a = DepthMap::from_values(2, 1, {1, 0}), b = DepthMap::from_values(2, 1, {0, 1});
  CHECK_THROWS_AS(evaluate(a, b), DegenerateInputError);
  CHECK_THROWS_AS(evaluate(a, DepthMap::from_values(1, 2, {1, 1})), std::invalid_argument);
}

TEST_CASE("multi-view report") {
  const int W = 32, H = 24;
  const Intrinsics K = default_intrinsics(W, H);
  const DepthMap gt = render_depth(generate_scene(5), RigidTransform{}, K, W, H);
  std::vector<double> pv = masked_values(gt);
  Rng rng(3);
  for (double& x : pv) x *= std::exp(rng.uniform(-0.3, 0.3));
  const DepthMap pred = DepthMap::from_values(W, H, pv);

  SUBCASE("identity view equals direct evaluation") {
    const auto views = multiview_report(pred, gt, {Pose6{}}, K);
    REQUIRE(views.size() == 1);
    REQUIRE(views[0].has_value());
    CHECK(*views[0] == evaluate(pred, gt));
  }
  SUBCASE("perfect prediction stays perfect in every view") {
    const std::vector<Pose6> poses{Pose6{}, Pose6{{0, 0.05, 0, 0, 0, 0}}, Pose6{{0, 0, 0, 0.1, 0, -0.1}}};
    for (const auto& v : multiview_report(gt, gt, poses, K)) {
      REQUIRE(v.has_value());
      CHECK(v->delta1 == 1.0);
      CHECK(v->delta2 == 1.0);
      CHECK(v->delta3 == 1.0);
    }
  }
  SUBCASE("matches brute-force per-view evaluation") {
    const std::vector<Pose6> poses{Pose6{}, Pose6{{0, 0.08, 0, 0, 0, 0}}, Pose6{{-0.06, 0, 0, 0.1, 0, 0}},
                                   Pose6{{0, 0, 0.05, 0, 0, -0.15}}};
    const auto views = multiview_report(pred, gt, poses, K);
    REQUIRE(views.size() == 4);
    for (std::size_t k = 0; k < 4; ++k) {
      const DepthMap wp = warp_depth(pred, poses[k], K).depth, wg = warp_depth(gt, poses[k], K).depth;
      std::vector<double> a = masked_values(wp), b = masked_values(wg);
      for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] <= 0 || b[i] <= 0) a[i] = b[i] = 0;
      REQUIRE(views[k].has_value());
      check_against_oracle(*views[k], oracle::metrics(a, b), 1e-12);
    }
  }
  SUBCASE("a view with no overlap is absent") {
    const auto views = multiview_report(pred, gt, {Pose6{{0, 0, 0, 0, 0, -50}}}, K);
    CHECK_FALSE(views[0].has_value());
  }
}

TEST_CASE("text formats") {
  const DepthMap gt = DepthMap::from_values(2, 1, {1, 2});
  const MetricsReport r = evaluate(gt, gt);
  const std::string lines = to_line_protocol(r);
  CHECK(lines.rfind("delta1\t1.0\n", 0) == 0);
  CHECK(lines.find("rms_log\t0.0\n") != std::string::npos);
  CHECK(to_kv_block(r).rfind("delta1 = 1.000000\n", 0) == 0);
  CHECK(metric_names().size() == 7);
}
