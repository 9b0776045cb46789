// Command-line front end: warp, train, eval, synth, gradcheck and bench.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "avcl/gradcheck.hpp"
#include "avcl/io.hpp"
#include "avcl/metrics.hpp"
#include "avcl/synth.hpp"
#include "avcl/training.hpp"
#include "avcl/warp.hpp"

namespace fs = std::filesystem;
using namespace avcl;

namespace {

std::vector<double> parse_list(const std::string& text, std::size_t n, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size() || !std::isfinite(v))
      throw std::invalid_argument("malformed " + what + " '" + text + "'");
    out.push_back(v);
  }
  if (out.size() != n)
    throw std::invalid_argument(what + " needs " + std::to_string(n) + " comma-separated numbers, got '" + text + "'");
  return out;
}

Pose6 parse_pose_arg(const std::string& text) {
  const auto v = parse_list(text, 6, "pose");
  Pose6 p;
  for (std::size_t k = 0; k < 6; ++k) p[k] = v[k];
  return p;
}

Intrinsics parse_intrinsics_arg(const std::string& text) {
  const auto v = parse_list(text, 4, "intrinsics");
  Intrinsics K{v[0], v[1], v[2], v[3]};
  K.validate();
  return K;
}

// One pose per line; blank lines and '#' comments are skipped.
std::vector<Pose6> read_poses(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::vector<Pose6> poses;
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::string compact;
    for (char c : line)
      if (!std::isspace(static_cast<unsigned char>(c))) compact += c;
    if (!compact.empty()) poses.push_back(parse_pose_arg(compact));
  }
  if (poses.empty()) throw std::invalid_argument("no poses in " + path.string());
  return poses;
}

int cmd_warp(const std::string& depth_path, const std::string& pose_text, const std::string& k_text,
             const std::string& out_path) {
  const Pose6 pose = parse_pose_arg(pose_text);
  const Intrinsics K = parse_intrinsics_arg(k_text);
  const DepthMap depth = read_pfm(depth_path);
  const WarpResult r = warp_depth(depth, pose, K);
  write_pfm(out_path, r.depth);
  const double fraction = static_cast<double>(r.depth.valid_count()) / static_cast<double>(r.depth.size());
  std::printf("valid_fraction\t%.6f\n", fraction);
  if (r.depth.valid_count() == 0) std::printf("warning: warped map has no valid pixels\n");
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& checkpoint, const std::string& trajectory_path,
              bool verbose) {
  const TrainConfig config = train_config_from(read_key_values(config_path));
  StepObserver observer;
  if (verbose) {
    observer = [](int step, const StepReport& r) {
      if (step % 100 != 0) return;
      std::fprintf(stderr, "step %d l_dep %.5f", step, r.l_dep);
      if (r.l_warp) std::fprintf(stderr, " l_warp %.5f", *r.l_warp);
      if (r.l_adv) std::fprintf(stderr, " l_adv %.5f", *r.l_adv);
      std::fprintf(stderr, "\n");
    };
  }
  const TrainResult result = train_loop(config, observer);
  const std::string table = format_trajectory(result.trajectory, config.eval_poses.size());
  if (trajectory_path.empty())
    std::fputs(table.c_str(), stdout);
  else
    write_file(trajectory_path, table);
  std::printf("mean_multiview_delta1\t%.6f\n", result.trajectory.back().eval.mean_delta1);
  if (result.warp_skips > 0) std::printf("warp_skipped_steps\t%d\n", result.warp_skips);
  if (!checkpoint.empty()) save_checkpoint(checkpoint, result.model);
  return 0;
}

int cmd_eval(const std::string& pred_path, const std::string& gt_path, const std::string& poses_path,
             const std::string& k_text) {
  const DepthMap pred = read_pfm(pred_path);
  const DepthMap gt = read_pfm(gt_path);
  std::fputs(to_line_protocol(evaluate(pred, gt)).c_str(), stdout);
  if (poses_path.empty()) return 0;
  const Intrinsics K = k_text.empty() ? default_intrinsics(gt.width(), gt.height()) : parse_intrinsics_arg(k_text);
  const auto poses = read_poses(poses_path);
  const auto views = multiview_report(pred, gt, poses, K);
  for (std::size_t v = 0; v < views.size(); ++v) {
    std::printf("\n[view %zu]\n", v);
    if (views[v])
      std::fputs(to_kv_block(*views[v]).c_str(), stdout);
    else
      std::printf("# no mutually valid pixels\n");
  }
  return 0;
}

int cmd_synth(std::uint64_t seed, const std::string& out_dir, int width, int height) {
  const Scene scene = generate_scene(seed);
  const Intrinsics K = default_intrinsics(width, height);
  const RenderResult r = render(scene, RigidTransform{}, K, width, height);
  fs::create_directories(out_dir);
  write_pfm(fs::path(out_dir) / "depth.pfm", r.depth);
  write_file(fs::path(out_dir) / "image.pfm", encode_pfm_image(shade_image(scene, r)));
  write_file(fs::path(out_dir) / "scene.txt", dump_scene(scene));
  std::printf("intrinsics\t%.17g,%.17g,%.17g,%.17g\n", K.fx, K.fy, K.cx, K.cy);
  return 0;
}

int cmd_gradcheck(int seeds, bool verbose) {
  GradCheckOptions opt;
  opt.seeds = seeds;
  const auto results = run_gradcheck_suite(opt);
  int failed = 0;
  double worst = 0.0;
  for (const auto& r : results) {
    if (!r.passed) ++failed;
    worst = std::max(worst, r.rel_error / r.tolerance);
    if (verbose || !r.passed)
      std::printf("%s\t%s\trel_error %.3e\ttol %.0e\n", r.passed ? "ok" : "FAIL", r.name.c_str(), r.rel_error,
                  r.tolerance);
  }
  std::printf("gradcheck: %zu checks, %d failed, worst error/tolerance %.3g\n", results.size(), failed, worst);
  return failed == 0 ? 0 : 1;
}

int cmd_bench(const std::string& strategies_text, int trials, const std::string& config_path, int steps,
              std::uint64_t seed) {
  TrainConfig base;
  if (!config_path.empty()) {
    KeyValues kv = read_key_values(config_path);
    kv.emplace("strategy", "baseline");
    base = train_config_from(kv);
  }
  if (steps > 0) base.steps = steps;
  base.seed = seed;
  std::vector<PoseStrategy> strategies;
  if (strategies_text == "all") {
    for (const char* s : {"baseline", "fixed-a", "fixed-b", "fixed-c", "random", "adversarial"})
      strategies.push_back(parse_strategy(s));
  } else {
    std::stringstream ss(strategies_text);
    std::string item;
    while (std::getline(ss, item, ',')) strategies.push_back(parse_strategy(item));
  }
  const auto rows = run_benchmark(base, strategies, trials,
                                  [](const std::string& line) { std::fprintf(stderr, "%s\n", line.c_str()); });
  std::fputs(format_benchmark(rows).c_str(), stdout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial view-consistent depth learning toolkit"};
  app.require_subcommand(1);

  std::string depth, pose, intrinsics, out;
  auto* warp = app.add_subcommand("warp", "Forward-warp a depth map to another view");
  warp->add_option("--depth", depth, "Input depth PFM")->required();
  warp->add_option("--pose", pose, "rx,ry,rz,tx,ty,tz (radians, meters)")->required();
  warp->add_option("--intrinsics", intrinsics, "fx,fy,cx,cy")->required();
  warp->add_option("--out", out, "Output depth PFM")->required();

  std::string config, checkpoint, trajectory;
  bool verbose = false;
  auto* train = app.add_subcommand("train", "Train a model from a key = value config");
  train->add_option("--config", config, "Configuration file")->required()->check(CLI::ExistingFile);
  train->add_option("--checkpoint", checkpoint, "Write the trained model here");
  train->add_option("--trajectory", trajectory, "Write the evaluation trajectory here instead of stdout");
  train->add_flag("-v,--verbose", verbose, "Log losses every 100 steps");

  std::string pred, gt, poses;
  auto* eval = app.add_subcommand("eval", "Depth metrics of a prediction against ground truth");
  eval->add_option("--pred", pred, "Predicted depth PFM")->required();
  eval->add_option("--gt", gt, "Ground-truth depth PFM")->required();
  eval->add_option("--poses", poses, "File of poses for multi-view evaluation, one per line");
  eval->add_option("--intrinsics", intrinsics, "fx,fy,cx,cy for multi-view evaluation");

  std::uint64_t seed = 0;
  int width = 64, height = 64;
  auto* synth = app.add_subcommand("synth", "Render a synthetic scene");
  synth->add_option("--seed", seed, "Scene seed")->required();
  synth->add_option("--out", out, "Output directory")->required();
  synth->add_option("--width", width, "Image width")->check(CLI::Range(4, 4096));
  synth->add_option("--height", height, "Image height")->check(CLI::Range(4, 4096));

  int seeds = 20;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  gradcheck->add_option("--seeds", seeds, "Seeds per check")->check(CLI::PositiveNumber);
  gradcheck->add_flag("-v,--verbose", verbose, "Print every check");

  std::string strategies = "all";
  int trials = 3, steps = 0;
  std::uint64_t bench_seed = 1;
  auto* bench = app.add_subcommand("bench", "Compare pose strategies on identical seeds");
  bench->add_option("--strategies", strategies, "'all' or a comma-separated list");
  bench->add_option("--trials", trials, "Trials per strategy")->check(CLI::PositiveNumber);
  bench->add_option("--config", config, "Base configuration file")->check(CLI::ExistingFile);
  bench->add_option("--steps", steps, "Override the step count");
  bench->add_option("--seed", bench_seed, "Seed of the first trial");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*warp) return cmd_warp(depth, pose, intrinsics, out);
    if (*train) return cmd_train(config, checkpoint, trajectory, verbose);
    if (*eval) return cmd_eval(pred, gt, poses, intrinsics);
    if (*synth) return cmd_synth(seed, out, width, height);
    if (*gradcheck) return cmd_gradcheck(seeds, verbose);
    if (*bench) return cmd_bench(strategies, trials, config, steps, bench_seed);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 1;
}
