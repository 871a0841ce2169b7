// sscpc - toy training harness.
//
// Full-pipeline training on one synthetic scene at desk scale: the input
// is a single infrastructure view in the world frame, the target the
// generator's complete labeled cloud. AdamW, fixed step count, per-step
// loss breakdown. Deterministic per seed.

#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "sscpc/model/checkpoint.hpp"
#include "sscpc/model/network.hpp"
#include "sscpc/pipeline/synthetic.hpp"

namespace sscpc {

struct TrainStep {
  int step = 0;
  double l_cd = 0.0;
  double l_ce = 0.0;
  double total = 0.0;
};

struct TrainResult {
  std::vector<TrainStep> curve;
  double initial_total() const { return curve.front().total; }
  double final_total() const { return curve.back().total; }
};

/// Runs `steps` optimizer steps of the full pipeline on one (input, gt)
/// pair. Aborts with the step number if the loss leaves the reals.
inline TrainResult train_toy(SscModel& model, const LabeledCloud& input_world,
                             const LabeledCloud& gt_world, int steps,
                             const ClassMap& class_map) {
  if (steps < 1) throw std::runtime_error("train-toy: steps must be >= 1");
  const ModelConfig& cfg = model.config();
  SscLoss loss(gt_world, cfg.lambda_ce, class_map);
  AdamW optimizer(cfg.lr, cfg.weight_decay);

  TrainResult result;
  result.curve.reserve(steps);
  for (int step = 0; step < steps; ++step) {
    const SscOutput out = model.forward(input_world);
    LossBreakdown lb;
    try {
      lb = loss.forward(out);
    } catch (const std::exception&) {
      throw std::runtime_error("train-toy: loss diverged at step " + std::to_string(step));
    }
    model.zero_grad();
    Mat d_points, d_logits;
    loss.backward(&d_points, &d_logits);
    model.backward(d_points, d_logits);
    optimizer.step(model);
    result.curve.push_back({step, lb.l_cd, lb.l_ce, lb.total});
  }
  return result;
}

/// The (input, ground truth, class map) triple for toy training, produced
/// from a small synthetic scene. The scene is written under `scratch_dir`.
struct ToyScene {
  LabeledCloud input_world;
  LabeledCloud ground_truth;
  ClassMap class_map;
  int class_count = 0;
};

inline ToyScene make_toy_scene(std::uint64_t seed, const std::filesystem::path& scratch_dir) {
  SynthParams params;
  params.seed = seed;
  params.frames = 3;
  params.objects = 1;
  params.buildings = 1;
  params.extent_x = 16.0;
  params.extent_y = 12.0;
  params.road_half_width = 4.5;
  params.gt_spacing = 0.4;
  params.object_spacing = 0.25;
  params.mask_width = 192;
  params.mask_height = 144;
  params.scene_id = "toy";
  const SynthResult synth = gen_synthetic_scene(params, scratch_dir);

  ToyScene scene;
  // First infrastructure view, expressed in the world frame.
  const FrameEntry& frame = synth.manifest.scenes[0].frames[0];
  const LabeledCloud sensor = read_ply(frame.cloud_path);
  scene.input_world = apply_transform(sensor, frame.pose);
  scene.ground_truth = synth.ground_truth;
  scene.class_map = ClassMap::compact_from(*synth.ground_truth.labels);
  scene.class_count = scene.class_map.count();
  return scene;
}

inline void write_loss_csv(const TrainResult& result, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("train-toy: cannot open for writing: " + path.string());
  out << "step,l_cd,l_ce,total\n";
  char buf[160];
  for (const TrainStep& s : result.curve) {
    std::snprintf(buf, sizeof(buf), "%d,%.9f,%.9f,%.9f\n", s.step, s.l_cd, s.l_ce, s.total);
    out << buf;
  }
}

}  // namespace sscpc
