#include <doctest.h>

#include <cstring>
#include <filesystem>

#include "avcl/io.hpp"
#include "avcl/random.hpp"
#include "avcl/training.hpp"

using namespace avcl;
namespace fs = std::filesystem;

namespace {

DepthMap random_float_map(Rng& rng, int W, int H) {
  std::vector<double> v(static_cast<std::size_t>(W * H));
  for (double& x : v) x = rng.unit() < 0.15 ? 0.0 : static_cast<float>(rng.uniform(0.05, 80.0));
  return DepthMap::from_values(W, H, v);
}

fs::path temp_path(const std::string& name) { return fs::temp_directory_path() / ("avcl_test_" + name); }

}  // namespace

TEST_CASE("PFM round trip is exact") {
  Rng rng(101);
  for (int trial = 0; trial < 50; ++trial) {
    const int W = 1 + static_cast<int>(rng.below(40)), H = 1 + static_cast<int>(rng.below(40));
    const DepthMap d = random_float_map(rng, W, H);
    const std::string bytes = encode_pfm(d);
    const DepthMap back = decode_pfm(bytes);
    CHECK(back == d);
    CHECK(encode_pfm(back) == bytes);
  }
  const fs::path p = temp_path("roundtrip.pfm");
  const DepthMap d = random_float_map(rng, 7, 5);
  write_pfm(p, d);
  CHECK(read_pfm(p) == d);
  fs::remove(p);
}

TEST_CASE("PFM layout") {
  const DepthMap d = DepthMap::from_values(2, 2, {1.0, 2.0, 3.0, 0.0});
  const std::string bytes = encode_pfm(d);
  const std::string header = "Pf\n2 2\n-1.0\n";
  REQUIRE(bytes.size() == header.size() + 16);
  CHECK(bytes.substr(0, header.size()) == header);
  float first;
  std::memcpy(&first, bytes.data() + header.size(), 4);
  CHECK(first == 3.0f);  // bottom row first
}

TEST_CASE("big-endian PFM and invalid encodings") {
  std::string be = "Pf\n1 2\n1.0\n";
  for (float f : {2.5f, -1.0f}) {
    unsigned char b[4];
    std::memcpy(b, &f, 4);
    for (int k = 3; k >= 0; --k) be += static_cast<char>(b[k]);
  }
  const DepthMap d = decode_pfm(be);
  CHECK(d.width() == 1);
  CHECK_FALSE(d.valid(0));  // stored -1 in the bottom row
  CHECK(d.at(0, 1) == 2.5);
  CHECK(d.valid(0, 1));
}

TEST_CASE("malformed PFM is rejected") {
  CHECK_THROWS_AS(decode_pfm(""), FormatError);
  CHECK_THROWS_AS(decode_pfm("P5\n1 1\n255\nx"), FormatError);
  CHECK_THROWS_AS(decode_pfm("PF\n1 1\n-1.0\n123456789012"), FormatError);
  CHECK_THROWS_AS(decode_pfm("Pf\n2 2\n-1.0\n1234"), FormatError);
  CHECK_THROWS_AS(decode_pfm("Pf\n0 2\n-1.0\n"), FormatError);
  CHECK_THROWS_AS(decode_pfm("Pf\n1 1\n0\n1234"), FormatError);
  CHECK_THROWS(read_pfm(temp_path("does_not_exist.pfm")));
}

TEST_CASE("checkpoint round trip reproduces inference bit for bit") {
  ModelConfig cfg;
  cfg.trunk_channels = 6;
  cfg.head_channels = 5;
  const Model m = Model::init(cfg, 44);
  const fs::path p = temp_path("model.ckpt");
  save_checkpoint(p, m);
  const Model back = load_checkpoint(p);
  const auto a = m.named_parameters(), b = back.named_parameters();
  REQUIRE(a.size() == b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k].first == b[k].first);
    CHECK(std::memcmp(a[k].second.data().data(), b[k].second.data().data(), a[k].second.size() * 8) == 0);
  }
  const Sample s = make_sample(3, 24, 20);
  const DepthMap da = predict_depth(m, s.image, LossConfig{}), db = predict_depth(back, s.image, LossConfig{});
  CHECK(da == db);

  std::string bytes = read_file(p);
  write_file(p, bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(load_checkpoint(p), FormatError);
  bytes[0] = 'X';
  write_file(p, bytes);
  CHECK_THROWS_AS(load_checkpoint(p), FormatError);
  fs::remove(p);
}

TEST_CASE("key-value files") {
  const KeyValues kv = parse_key_values("# comment\nloss = l1\n\n  lr=0.5  # trailing\n");
  CHECK(kv.size() == 2);
  CHECK(kv.at("loss") == "l1");
  CHECK(kv.at("lr") == "0.5");
  CHECK_THROWS_AS(parse_key_values("a = 1\na = 2\n"), FormatError);
  CHECK_THROWS_AS(parse_key_values("just words\n"), FormatError);
  CHECK_THROWS_AS(parse_key_values(" = 3\n"), FormatError);
}
