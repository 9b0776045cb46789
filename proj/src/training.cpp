#include "avcl/training.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "avcl/synth.hpp"
#include "avcl/warp.hpp"

namespace avcl {

namespace {

ad::Tensor depth_tensor(const DepthMap& d) {
  std::vector<double> v(d.size(), 0.0);
  for (std::size_t i = 0; i < v.size(); ++i)
    if (d.valid(i)) v[i] = d[i];
  return ad::Tensor::from({static_cast<std::size_t>(d.height()), static_cast<std::size_t>(d.width())}, std::move(v));
}

ad::Tensor pose_tensor(const Pose6& p) { return ad::Tensor::from({1, 6}, std::vector<double>(p.v.begin(), p.v.end())); }

Pose6 to_pose(const ad::Tensor& t) {
  Pose6 p;
  for (std::size_t k = 0; k < 6; ++k) p[k] = t.data()[k];
  return p;
}

ad::Tensor base_loss(ad::Tape& tape, LossKind kind, const ad::Tensor& pred, const ad::Tensor& target, const Mask& mask) {
  // The ordinal loss has no continuous warped counterpart; its warp branch uses L1.
  if (kind == LossKind::berhu) return masked_berhu(tape, pred, target, mask);
  return masked_l1(tape, pred, target, mask);
}

// Depth prediction used by the warp branch: the head runs with frozen
// parameters, so gradients reach the trunk only.
ad::Tensor warp_branch_depth(ad::Tape& tape, const Model& model, const ad::Tensor& z, const LossConfig& loss) {
  if (loss.kind == LossKind::dorn) {
    const ad::Tensor probs = ad::sigmoid(tape, depth_head_raw(tape, model.depth_head, z, true));
    return dorn_soft_decode(tape, probs, loss);
  }
  return depth_head_forward(tape, model.depth_head, z, true);
}

std::vector<double> parse_numbers(const std::string& text, std::size_t expected, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      throw std::invalid_argument(what + ": cannot parse '" + item + "'");
    }
    while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
    if (used != item.size() || !std::isfinite(v)) throw std::invalid_argument(what + ": cannot parse '" + item + "'");
    out.push_back(v);
  }
  if (expected != 0 && out.size() != expected)
    throw std::invalid_argument(what + ": expected " + std::to_string(expected) + " comma-separated numbers");
  return out;
}

Pose6 parse_pose(const std::string& text) {
  const auto v = parse_numbers(text, 6, "pose");
  Pose6 p;
  for (std::size_t k = 0; k < 6; ++k) p[k] = v[k];
  return p;
}

}  // namespace

PoseStrategy PoseStrategy::baseline() { return PoseStrategy{StrategyKind::baseline, {}, "baseline"}; }

PoseStrategy PoseStrategy::fixed(const Pose6& pose, std::string label) {
  return PoseStrategy{StrategyKind::fixed, pose, std::move(label)};
}

PoseStrategy PoseStrategy::random() { return PoseStrategy{StrategyKind::random, {}, "random"}; }

PoseStrategy PoseStrategy::adversarial() { return PoseStrategy{StrategyKind::adversarial, {}, "adversarial"}; }

Pose6 fixed_pose_preset(char which) {
  switch (which) {
    case 'A': case 'a': return Pose6{{0.0, 0.05, 0.0, 0.0, 0.0, 0.0}};
    case 'B': case 'b': return Pose6{{0.0, 0.0, 0.0, 0.0, 0.0, -0.1}};
    case 'C': case 'c': return Pose6{{0.0, 0.05, 0.0, 0.0, 0.0, -0.1}};
  }
  throw std::invalid_argument(std::string("unknown fixed pose preset '") + which + "'");
}

PoseStrategy parse_strategy(const std::string& text) {
  if (text == "baseline") return PoseStrategy::baseline();
  if (text == "random") return PoseStrategy::random();
  if (text == "adversarial") return PoseStrategy::adversarial();
  if (text.size() == 7 && text.rfind("fixed-", 0) == 0)
    return PoseStrategy::fixed(fixed_pose_preset(text[6]), "fixed-" + std::string(1, static_cast<char>(std::tolower(text[6]))));
  if (text.rfind("fixed:", 0) == 0) return PoseStrategy::fixed(parse_pose(text.substr(6)), text);
  throw std::invalid_argument("unknown pose strategy '" + text + "'");
}

std::vector<Pose6> default_eval_poses() {
  return {Pose6{}, Pose6{{0.0, 0.08, 0.0, 0.0, 0.0, 0.0}}, Pose6{{-0.06, 0.0, 0.0, 0.1, 0.0, 0.0}},
          Pose6{{0.0, 0.0, 0.05, 0.0, 0.0, -0.15}}};
}

void TrainConfig::validate() const {
  loss.validate();
  model.validate();
  if (!(lr > 0.0)) throw std::invalid_argument("lr must be positive");
  if (steps < 0) throw std::invalid_argument("steps must be nonnegative");
  if (train_scenes <= 0 || eval_scenes <= 0) throw std::invalid_argument("scene counts must be positive");
  if (width < 4 || height < 4) throw std::invalid_argument("image size must be at least 4x4");
  if (eval_every < 0) throw std::invalid_argument("eval_every must be nonnegative");
  if (eval_poses.empty()) throw std::invalid_argument("at least one evaluation pose is required");
  const int outputs = loss.kind == LossKind::dorn ? loss.dorn_bins : 1;
  if (model.depth_outputs != outputs) throw std::invalid_argument("depth head outputs do not match the loss kind");
  if (strategy.kind == StrategyKind::fixed) {
    for (std::size_t k = 0; k < 6; ++k)
      if (!(std::abs(strategy.fixed_pose[k]) < model.pose_range.bound(k)))
        throw std::invalid_argument("fixed pose lies outside the pose range");
  }
}

Sample make_sample(std::uint64_t scene_seed, int width, int height) {
  const Scene scene = generate_scene(scene_seed);
  const RenderResult r = render(scene, RigidTransform{}, default_intrinsics(width, height), width, height);
  return Sample{shade_image(scene, r), r.depth};
}

std::vector<Sample> make_dataset(std::uint64_t first_seed, int count, int width, int height) {
  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) out.push_back(make_sample(first_seed + static_cast<std::uint64_t>(k), width, height));
  return out;
}

Trainer::Trainer(TrainConfig config, Model model)
    : config_(std::move(config)),
      model_(std::move(model)),
      K_(default_intrinsics(config_.width, config_.height)),
      trunk_opt_(model_.trunk_params(), config_.lr, config_.momentum),
      depth_opt_(model_.depth_params(), config_.lr, config_.momentum),
      pose_opt_(model_.pose_params(), config_.lr, config_.momentum),
      pose_rng_(config_.seed ^ 0x9e3779b97f4a7c15ULL) {
  config_.validate();
}

StepReport Trainer::step(const Sample& sample, double dep_scale) {
  const LossConfig& loss = config_.loss;
  const Mask all(sample.depth.size(), 1);
  StepReport report;

  for (auto& p : model_.trunk_params()) p.zero_grad();
  for (auto& p : model_.depth_params()) p.zero_grad();
  for (auto& p : model_.pose_params()) p.zero_grad();

  ad::Tape tape;
  const ad::Tensor z = trunk_forward(tape, model_.trunk, sample.image);

  ad::Tensor l_dep;
  if (loss.kind == LossKind::dorn) {
    l_dep = dorn_loss(tape, depth_head_raw(tape, model_.depth_head, z), sample.depth, all, loss);
  } else {
    const ad::Tensor pred = depth_head_forward(tape, model_.depth_head, z);
    l_dep = base_loss(tape, loss.kind, pred, depth_tensor(sample.depth), sample.depth.mask());
  }
  report.l_dep = l_dep.item();
  ad::Tensor total = ad::mul_scalar(tape, l_dep, dep_scale);

  const StrategyKind kind = config_.strategy.kind;
  if (kind != StrategyKind::baseline) {
    ad::Tensor pose, pose_for_warp;
    const PoseRange& range = model_.config().pose_range;
    switch (kind) {
      case StrategyKind::fixed:
        pose = pose_tensor(config_.strategy.fixed_pose);
        pose_for_warp = pose;
        break;
      case StrategyKind::random: {
        Pose6 p;
        for (std::size_t k = 0; k < 6; ++k) p[k] = pose_rng_.uniform(-range.bound(k), range.bound(k));
        pose = pose_tensor(p);
        pose_for_warp = pose;
        break;
      }
      default:
        // The pose branch reads the trunk features as constants and sees the
        // warp loss through a gradient reversal.
        pose = pose_head_forward(tape, model_.pose_head, z.detach(), range);
        pose_for_warp = ad::gradient_reversal(tape, pose);
        break;
    }
    report.pose = to_pose(pose);

    const ad::Tensor pred_w = warp_branch_depth(tape, model_, z, loss);
    const WarpedTensor wp = warp_tensor(tape, pred_w, all, pose_for_warp, K_);
    const WarpedTensor wg = warp_tensor(tape, depth_tensor(sample.depth), sample.depth.mask(), pose_for_warp, K_);
    const Mask both = mask_and(wp.result.depth.mask(), wg.result.depth.mask());
    try {
      const ad::Tensor l_warp = base_loss(tape, loss.kind, wp.depth, wg.depth, both);
      report.l_warp = l_warp.item();
      total = ad::add(tape, total, l_warp);
      if (kind == StrategyKind::adversarial) {
        const ad::Tensor penalty = pose_penalty(tape, pose, loss.lambda);
        report.l_adv = -l_warp.item() + penalty.item();
        total = ad::add(tape, total, penalty);
      }
    } catch (const DegenerateMaskError&) {
      report.warp_skipped = true;
    }
  }

  tape.backward(total);
  trunk_opt_.step();
  depth_opt_.step();
  if (kind == StrategyKind::adversarial && !report.warp_skipped) pose_opt_.step();
  return report;
}

double Trainer::pose_objective(const Sample& sample) const {
  if (config_.strategy.kind != StrategyKind::adversarial)
    throw std::logic_error("pose_objective is defined for the adversarial strategy only");
  const LossConfig& loss = config_.loss;
  const Mask all(sample.depth.size(), 1);
  ad::Tape tape;
  const Model frozen = model_.clone();
  for (auto& [name, t] : frozen.named_parameters()) t.set_requires_grad(false);
  const ad::Tensor z = trunk_forward(tape, frozen.trunk, sample.image);
  const ad::Tensor pose = pose_head_forward(tape, frozen.pose_head, z, frozen.config().pose_range);
  const ad::Tensor pred_w = warp_branch_depth(tape, frozen, z, loss);
  const WarpedTensor wp = warp_tensor(tape, pred_w, all, pose, K_);
  const WarpedTensor wg = warp_tensor(tape, depth_tensor(sample.depth), sample.depth.mask(), pose, K_);
  const Mask both = mask_and(wp.result.depth.mask(), wg.result.depth.mask());
  const double l_warp = base_loss(tape, loss.kind, wp.depth, wg.depth, both).item();
  return l_warp - pose_penalty(tape, pose, loss.lambda).item();
}

DepthMap predict_depth(const Model& model, const ad::Tensor& image, const LossConfig& loss) {
  ad::Tape tape;
  const ad::Tensor z = trunk_forward(tape, model.trunk, image.detach());
  ad::Tensor d;
  if (loss.kind == LossKind::dorn)
    d = dorn_soft_decode(tape, ad::sigmoid(tape, depth_head_raw(tape, model.depth_head, z, true)), loss);
  else
    d = depth_head_forward(tape, model.depth_head, z, true);
  tape.clear();
  const int H = static_cast<int>(d.dim(0)), W = static_cast<int>(d.dim(1));
  return DepthMap::from_values(W, H, std::vector<double>(d.data().begin(), d.data().end()));
}

EvalSummary evaluate_multiview(const Model& model, const std::vector<Sample>& scenes, const std::vector<Pose6>& poses,
                               const Intrinsics& K, const LossConfig& loss) {
  const std::size_t nm = metric_names().size();
  std::vector<std::vector<double>> sums(poses.size(), std::vector<double>(nm, 0.0));
  std::vector<int> counts(poses.size(), 0);
  double delta1_sum = 0.0;
  int pairs = 0;
  for (const Sample& s : scenes) {
    const DepthMap pred = predict_depth(model, s.image, loss);
    const auto views = multiview_report(pred, s.depth, poses, K);
    for (std::size_t v = 0; v < views.size(); ++v) {
      if (!views[v]) continue;
      const auto vals = metric_values(*views[v]);
      for (std::size_t m = 0; m < nm; ++m) sums[v][m] += vals[m];
      ++counts[v];
      delta1_sum += views[v]->delta1;
      ++pairs;
    }
  }
  EvalSummary out;
  for (std::size_t v = 0; v < poses.size(); ++v) {
    ViewSummary vs;
    vs.scenes = counts[v];
    if (counts[v] > 0) {
      const double inv = 1.0 / counts[v];
      MetricsReport r;
      r.delta1 = sums[v][0] * inv;
      r.delta2 = sums[v][1] * inv;
      r.delta3 = sums[v][2] * inv;
      r.rel = sums[v][3] * inv;
      r.log10 = sums[v][4] * inv;
      r.rms = sums[v][5] * inv;
      r.rms_log = sums[v][6] * inv;
      vs.mean = r;
    }
    out.views.push_back(vs);
  }
  out.mean_delta1 = pairs > 0 ? delta1_sum / pairs : 0.0;
  return out;
}

TrainResult train_loop(const TrainConfig& config, const StepObserver& observer) {
  config.validate();
  ModelConfig mc = config.model;
  Trainer trainer(config, Model::init(mc, config.seed));
  const std::vector<Sample> train = make_dataset(config.train_scene_begin, config.train_scenes, config.width,
                                                 config.height);
  const std::vector<Sample> held_out = make_dataset(config.eval_scene_begin, config.eval_scenes, config.width,
                                                    config.height);
  Rng data_rng(config.seed * 2 + 1);
  TrainResult result{trainer.model(), {}, 0};

  auto evaluate_at = [&](int step) {
    result.trajectory.push_back(
        {step, evaluate_multiview(trainer.model(), held_out, config.eval_poses, trainer.intrinsics(), config.loss)});
  };
  for (int step = 1; step <= config.steps; ++step) {
    const Sample& s = train[data_rng.below(train.size())];
    const StepReport rep = trainer.step(s);
    if (rep.warp_skipped) ++result.warp_skips;
    if (observer) observer(step, rep);
    if (config.eval_every > 0 && step % config.eval_every == 0 && step != config.steps) evaluate_at(step);
  }
  evaluate_at(config.steps);
  result.model = trainer.model();
  return result;
}

std::string format_trajectory(const std::vector<TrajectoryPoint>& trajectory, std::size_t views) {
  std::string out = "# step";
  for (std::size_t v = 0; v < views; ++v)
    for (const auto& name : metric_names()) out += "\tv" + std::to_string(v) + "." + name;
  out += '\n';
  char buf[64];
  for (const TrajectoryPoint& t : trajectory) {
    out += std::to_string(t.step);
    for (std::size_t v = 0; v < views; ++v) {
      const bool present = v < t.eval.views.size() && t.eval.views[v].mean.has_value();
      const auto vals = present ? metric_values(*t.eval.views[v].mean) : std::vector<double>(7, NAN);
      for (double x : vals) {
        std::snprintf(buf, sizeof buf, "\t%.9g", x);
        out += buf;
      }
    }
    out += '\n';
  }
  return out;
}

std::vector<BenchRow> run_benchmark(const TrainConfig& base, const std::vector<PoseStrategy>& strategies, int trials,
                                    const std::function<void(const std::string&)>& progress) {
  if (trials <= 0) throw std::invalid_argument("trials must be positive");
  std::vector<BenchRow> rows;
  for (const PoseStrategy& strategy : strategies) {
    BenchRow row;
    row.strategy = strategy.label;
    row.mean_metrics.assign(7, 0.0);
    int present = 0;
    for (int t = 0; t < trials; ++t) {
      TrainConfig cfg = base;
      cfg.strategy = strategy;
      cfg.seed = base.seed + static_cast<std::uint64_t>(t);
      cfg.eval_every = 0;
      const TrainResult r = train_loop(cfg);
      const EvalSummary& e = r.trajectory.back().eval;
      row.trial_delta1.push_back(e.mean_delta1);
      for (const ViewSummary& v : e.views) {
        if (!v.mean) continue;
        const auto vals = metric_values(*v.mean);
        for (std::size_t m = 0; m < 7; ++m) row.mean_metrics[m] += vals[m];
        ++present;
      }
      if (progress) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "%s trial %d: mean multi-view delta1 %.4f", strategy.label.c_str(), t,
                      e.mean_delta1);
        progress(buf);
      }
    }
    for (double& m : row.mean_metrics) m = present > 0 ? m / present : NAN;
    double s = 0.0;
    for (double d : row.trial_delta1) s += d;
    row.mean_delta1 = s / static_cast<double>(row.trial_delta1.size());
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_benchmark(const std::vector<BenchRow>& rows) {
  std::string out = "method";
  for (const auto& name : metric_names()) out += '\t' + name;
  out += "\tmean_delta1\n";
  char buf[64];
  for (const BenchRow& r : rows) {
    out += r.strategy;
    for (double m : r.mean_metrics) {
      std::snprintf(buf, sizeof buf, "\t%.4f", m);
      out += buf;
    }
    std::snprintf(buf, sizeof buf, "\t%.4f\n", r.mean_delta1);
    out += buf;
  }
  return out;
}

TrainConfig train_config_from(const std::map<std::string, std::string>& kv) {
  static const char* required[] = {"loss", "strategy", "lr", "steps", "seed"};
  std::string missing;
  for (const char* key : required)
    if (!kv.count(key)) missing += std::string(missing.empty() ? "" : ", ") + key;
  if (!missing.empty()) throw std::invalid_argument("missing required keys: " + missing);

  static const char* known[] = {"loss",          "strategy",      "lr",           "momentum",   "steps",
                                "seed",          "train_scenes",  "train_begin",  "eval_scenes", "eval_begin",
                                "width",         "height",        "eval_every",   "rot_max",    "trans_max",
                                "lambda",        "dorn_bins",     "dorn_sharpness", "channels", "eval_poses"};
  for (const auto& [key, value] : kv) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw std::invalid_argument("unknown configuration key '" + key + "'");
  }

  auto number = [&](const std::string& key) { return parse_numbers(kv.at(key), 1, key)[0]; };
  auto integer = [&](const std::string& key) {
    const double v = number(key);
    if (v != std::floor(v) || v < 0 || v > 1e15) throw std::invalid_argument(key + " must be a nonnegative integer");
    return static_cast<std::int64_t>(v);
  };

  TrainConfig c;
  c.loss.kind = parse_loss_kind(kv.at("loss"));
  c.strategy = parse_strategy(kv.at("strategy"));
  c.lr = number("lr");
  c.steps = static_cast<int>(integer("steps"));
  c.seed = static_cast<std::uint64_t>(integer("seed"));
  if (kv.count("momentum")) c.momentum = number("momentum");
  if (kv.count("train_scenes")) c.train_scenes = static_cast<int>(integer("train_scenes"));
  if (kv.count("train_begin")) c.train_scene_begin = static_cast<std::uint64_t>(integer("train_begin"));
  if (kv.count("eval_scenes")) c.eval_scenes = static_cast<int>(integer("eval_scenes"));
  if (kv.count("eval_begin")) c.eval_scene_begin = static_cast<std::uint64_t>(integer("eval_begin"));
  if (kv.count("width")) c.width = static_cast<int>(integer("width"));
  if (kv.count("height")) c.height = static_cast<int>(integer("height"));
  if (kv.count("eval_every")) c.eval_every = static_cast<int>(integer("eval_every"));
  if (kv.count("rot_max")) c.model.pose_range.rot_max = number("rot_max");
  if (kv.count("trans_max")) c.model.pose_range.trans_max = number("trans_max");
  if (kv.count("channels")) {
    c.model.trunk_channels = static_cast<int>(integer("channels"));
    c.model.head_channels = c.model.trunk_channels;
  }
  if (kv.count("lambda")) {
    const auto l = parse_numbers(kv.at("lambda"), 6, "lambda");
    std::copy(l.begin(), l.end(), c.loss.lambda.begin());
  }
  if (kv.count("dorn_bins")) c.loss.dorn_bins = static_cast<int>(integer("dorn_bins"));
  if (kv.count("dorn_sharpness")) c.loss.dorn_sharpness = number("dorn_sharpness");
  if (kv.count("eval_poses")) {
    // Poses separated by ';', each six comma-separated numbers.
    c.eval_poses.clear();
    std::stringstream ss(kv.at("eval_poses"));
    std::string item;
    while (std::getline(ss, item, ';')) c.eval_poses.push_back(parse_pose(item));
  }
  c.model.depth_outputs = c.loss.kind == LossKind::dorn ? c.loss.dorn_bins : 1;
  c.validate();
  return c;
}

}  // namespace avcl
