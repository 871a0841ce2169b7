// sscpc - model configuration and the proxy/point shape chain.

#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "sscpc/core/types.hpp"

namespace sscpc {

/// Which features the transformer block fuses (the ablation axis).
enum class BlockMode { global_only, local_only, local_and_global };

inline std::string_view to_string(BlockMode m) {
  switch (m) {
    case BlockMode::global_only: return "global-only";
    case BlockMode::local_only: return "local-only";
    default: return "local+global";
  }
}

struct ModelConfig {
  RangeCrop crop = RangeCrop::sensor_default();
  int n_input = 26624;
  std::array<int, 3> downsample{4, 4, 2};
  std::array<int, 2> upsample{16, 16};
  int feature_dim = 384;
  int knn = 16;
  int class_count = 17;  // 16 classes + unlabeled
  BlockMode mode = BlockMode::local_and_global;

  double lambda_ce = 1.0;
  double lr = 1e-4;
  double weight_decay = 5e-4;
  // Offsets are scale * tanh(head), so children stay within these bounds of
  // their parent coordinate.
  double offset_scale_coarse = 2.0;
  double offset_scale_fine = 1.0;
  // Chamfer supervision of the coarse proxies in addition to the final
  // points (0 disables the extra term).
  double coarse_chamfer_weight = 0.0;
  // Position-embedding inputs are coords * pe_input_scale; keeps the MLP in
  // a sane numeric range for scene-sized coordinates.
  double pe_input_scale = 1.0 / 125.0;
  double init_gain = 1.0;
  std::uint64_t seed = 1;

  int proxy_count() const { return n_input / (downsample[0] * downsample[1] * downsample[2]); }
  long coarse_count() const { return static_cast<long>(proxy_count()) * upsample[0]; }
  long output_count() const { return coarse_count() * upsample[1]; }

  void validate() const {
    crop.validate();
    if (n_input < 1) throw std::runtime_error("model config: n_input must be >= 1");
    for (int r : downsample) {
      if (r < 1) throw std::runtime_error("model config: downsample ratios must be >= 1");
    }
    for (int s : upsample) {
      if (s < 1) throw std::runtime_error("model config: upsample factors must be >= 1");
    }
    if (n_input % (downsample[0] * downsample[1] * downsample[2]) != 0) {
      throw std::runtime_error("model config: n_input must divide by the downsample ratios");
    }
    const int after0 = n_input / downsample[0];
    if (after0 % downsample[1] != 0 || (after0 / downsample[1]) % downsample[2] != 0) {
      throw std::runtime_error("model config: stage sizes must divide exactly");
    }
    if (feature_dim < 1) throw std::runtime_error("model config: feature_dim must be >= 1");
    if (knn < 1) throw std::runtime_error("model config: knn must be >= 1");
    if (class_count < 2) throw std::runtime_error("model config: class_count must be >= 2");
    if (!(lambda_ce >= 0)) throw std::runtime_error("model config: lambda must be >= 0");
  }

  /// Reference configuration: 26,624 input points, [4,4,2] downsampling to
  /// 832 proxies, [16,16] upsampling to 13,312 coarse and 212,992 final
  /// points, lambda = 1.
  static ModelConfig reference_defaults() { return ModelConfig{}; }

  /// Desk-scale configuration used by the toy trainer and gradient checks.
  static ModelConfig toy_defaults() {
    ModelConfig cfg;
    cfg.crop = RangeCrop{{-100.0, 100.0}, {-100.0, 100.0}, {-100.0, 100.0}};
    cfg.n_input = 512;
    cfg.downsample = {4, 4, 2};
    cfg.upsample = {4, 4};
    cfg.feature_dim = 16;
    cfg.knn = 8;
    cfg.class_count = 17;
    cfg.pe_input_scale = 1.0 / 10.0;
    cfg.offset_scale_coarse = 2.0;
    cfg.offset_scale_fine = 1.0;
    cfg.init_gain = 1.0;
    return cfg;
  }
};

struct ShapeChain {
  long n_input = 0;
  long proxies = 0;
  long coarse = 0;
  long final_points = 0;
};

/// The proxy/point counts implied by a configuration; arithmetic only, no
/// tensor is ever allocated.
inline ShapeChain forward_shapes(const ModelConfig& cfg) {
  cfg.validate();
  return {cfg.n_input, cfg.proxy_count(), cfg.coarse_count(), cfg.output_count()};
}

}  // namespace sscpc
