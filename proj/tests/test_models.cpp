#include <doctest.h>

#include <cmath>
#include <set>

#include "avcl/models.hpp"
#include "avcl/random.hpp"

using namespace avcl;

namespace {

ad::Tensor random_image(std::uint64_t seed, std::size_t H = 8, std::size_t W = 10) {
  Rng rng(seed);
  std::vector<double> v(3 * H * W);
  for (double& x : v) x = rng.uniform(-1, 1);
  return ad::Tensor::from({3, H, W}, v);
}

}  // namespace

TEST_CASE("trunk keeps the spatial shape and maps zero to zero") {
  const Model m = Model::init(ModelConfig{}, 1);
  ad::Tape tape;
  const ad::Tensor z = trunk_forward(tape, m.trunk, ad::Tensor::zeros({3, 7, 9}));
  CHECK(z.shape() == ad::Shape{8, 7, 9});
  for (double v : z.data()) CHECK(v == 0.0);
  CHECK_THROWS_AS(trunk_forward(tape, m.trunk, ad::Tensor::zeros({2, 7, 9})), std::invalid_argument);
}

TEST_CASE("initialization and forward passes are deterministic") {
  const Model a = Model::init(ModelConfig{}, 7), b = Model::init(ModelConfig{}, 7), c = Model::init(ModelConfig{}, 8);
  const auto pa = a.named_parameters(), pb = b.named_parameters(), pc = c.named_parameters();
  bool differs = false;
  for (std::size_t k = 0; k < pa.size(); ++k) {
    CHECK(pa[k].first == pb[k].first);
    for (std::size_t i = 0; i < pa[k].second.size(); ++i) {
      CHECK(pa[k].second.data()[i] == pb[k].second.data()[i]);
      differs = differs || pa[k].second.data()[i] != pc[k].second.data()[i];
    }
  }
  CHECK(differs);
  const ad::Tensor img = random_image(3);
  ad::Tape t1, t2;
  const ad::Tensor d1 = depth_head_forward(t1, a.depth_head, trunk_forward(t1, a.trunk, img));
  const ad::Tensor d2 = depth_head_forward(t2, a.depth_head, trunk_forward(t2, a.trunk, img));
  for (std::size_t i = 0; i < d1.size(); ++i) CHECK(d1.data()[i] == d2.data()[i]);
}

TEST_CASE("parameter sets are disjoint and cover the model") {
  const Model m = Model::init(ModelConfig{}, 2);
  std::set<const void*> ids;
  std::size_t total = 0;
  for (const auto& set : {m.trunk_params(), m.depth_params(), m.pose_params()})
    for (const auto& t : set) {
      ids.insert(t.id());
      ++total;
    }
  CHECK(ids.size() == total);
  CHECK(total == m.named_parameters().size());
}

TEST_CASE("depth head output is positive with the input's spatial shape") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Model m = Model::init(ModelConfig{}, seed);
    // Push the output bias far negative: the activation still keeps depth above 0.1.
    m.depth_head.linear.bias.data()[0] = -50.0 * static_cast<double>(seed);
    ad::Tape tape;
    const ad::Tensor d = depth_head_forward(tape, m.depth_head, trunk_forward(tape, m.trunk, random_image(seed)));
    CHECK(d.shape() == ad::Shape{8, 10});
    for (double v : d.data()) CHECK(v >= 0.1);
  }
}

TEST_CASE("frozen depth head passes gradient to features only") {
  ad::Tensor z = random_image(5, 6, 6);
  z = ad::Tensor::from({3, 6, 6}, std::vector<double>(z.data().begin(), z.data().end()), true);
  ModelConfig cfg;
  cfg.trunk_channels = 3;
  const Model small = Model::init(cfg, 4);
  ad::Tape tape;
  for (const auto& p : small.depth_params()) p.drop_grad();
  tape.backward(ad::sum(tape, depth_head_forward(tape, small.depth_head, z, true)));
  bool nonzero = false;
  for (double g : z.grad()) nonzero = nonzero || g != 0.0;
  CHECK(nonzero);
  for (const auto& p : small.depth_params()) CHECK_FALSE(p.has_grad());
}

TEST_CASE("pose squashing") {
  const PoseRange range{0.1, 0.2};
  ad::Tape tape;
  SUBCASE("zero maps to zero") {
    const ad::Tensor p = squash_pose(tape, ad::Tensor::zeros({1, 6}), range);
    for (double v : p.data()) CHECK(v == 0.0);
  }
  SUBCASE("saturation approaches the bound and never reaches it") {
    const ad::Tensor p = squash_pose(tape, ad::Tensor::from({1, 6}, {1e6, -1e6, 40, 60, -1e300, 1e300}), range);
    for (std::size_t k = 0; k < 6; ++k) {
      CHECK(std::abs(p.data()[k]) < range.bound(k));
      CHECK(std::abs(p.data()[k]) == doctest::Approx(range.bound(k)).epsilon(1e-12));
    }
    CHECK(p.data()[1] < 0);
  }
  SUBCASE("matches the scaled shifted sigmoid") {
    Rng rng(6);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<double> r(6);
      for (double& x : r) x = rng.uniform(-8, 8);
      const ad::Tensor p = squash_pose(tape, ad::Tensor::from({1, 6}, r), range);
      for (std::size_t k = 0; k < 6; ++k) {
        const double expected = range.bound(k) * (2.0 / (1.0 + std::exp(-r[k])) - 1.0);
        CHECK(std::abs(p.data()[k] - expected) < 1e-15);
      }
    }
  }
}

TEST_CASE("pose head produces an in-range 6-vector") {
  const Model m = Model::init(ModelConfig{}, 9);
  ad::Tape tape;
  const ad::Tensor z = trunk_forward(tape, m.trunk, random_image(10));
  const ad::Tensor p = pose_head_forward(tape, m.pose_head, z, m.config().pose_range);
  CHECK(p.shape() == ad::Shape{1, 6});
  for (std::size_t k = 0; k < 6; ++k) CHECK(std::abs(p.data()[k]) < m.config().pose_range.bound(k));
}

TEST_CASE("clone shares no buffers") {
  const Model m = Model::init(ModelConfig{}, 1);
  const Model c = m.clone();
  const auto a = m.named_parameters(), b = c.named_parameters();
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k].second.id() != b[k].second.id());
    CHECK(a[k].second.data()[0] == b[k].second.data()[0]);
  }
}

TEST_CASE("configuration validation") {
  ModelConfig c;
  c.trunk_layers = 0;
  CHECK_THROWS_AS(Model::init(c, 1), std::invalid_argument);
  c = ModelConfig{};
  c.pose_range.rot_max = 0;
  CHECK_THROWS_AS(Model::init(c, 1), std::invalid_argument);
}
