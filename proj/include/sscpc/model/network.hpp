// sscpc - full completion/segmentation model.
//
// extract proxies -> spatial-aware encoder -> proxy generator (coarse
// upsample) -> spatial-aware decoder -> CSCM (final points + logits).
// Forward and backward are hand-chained; AdamW with decoupled weight decay
// drives training.

#pragma once

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "sscpc/model/blocks.hpp"
#include "sscpc/model/config.hpp"
#include "sscpc/model/heads.hpp"
#include "sscpc/model/layers.hpp"
#include "sscpc/model/loss.hpp"
#include "sscpc/model/pointnet.hpp"

namespace sscpc {

class SscModel {
 public:
  explicit SscModel(const ModelConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(derive_seed(cfg_.seed, 7));
    extractor_ = ProxyExtractor(cfg_, rng);
    encoder_ = SpatialAwareBlock(cfg_.feature_dim, cfg_.mode, cfg_.pe_input_scale, rng,
                                 cfg_.init_gain);
    generator_ = ProxyGenerator(cfg_.feature_dim, cfg_.upsample[0], cfg_.offset_scale_coarse,
                                rng, cfg_.init_gain);
    decoder_ = SpatialAwareBlock(cfg_.feature_dim, cfg_.mode, cfg_.pe_input_scale, rng,
                                 cfg_.init_gain);
    cscm_ = Cscm(cfg_.feature_dim, cfg_.upsample[1], cfg_.class_count, cfg_.offset_scale_fine,
                 rng, cfg_.init_gain);
  }

  const ModelConfig& config() const { return cfg_; }

  ProxySet extract_proxies(const LabeledCloud& cloud) { return extractor_.extract(cloud); }

  /// Full forward pass from a raw cloud.
  SscOutput forward(const LabeledCloud& cloud) {
    proxies_ = extractor_.extract(cloud);
    return forward_from_proxies(proxies_);
  }

  /// Forward pass from precomputed proxies (gradient checks enter here).
  SscOutput forward_from_proxies(const ProxySet& proxies) {
    proxies_ = proxies;
    encoded_ = proxies_;
    encoded_.features = encoder_.forward(proxies_);
    coarse_ = generator_.forward(encoded_);
    decoded_ = coarse_;
    decoded_.features = decoder_.forward(coarse_);
    return cscm_.forward(decoded_);
  }

  const ProxySet& last_proxies() const { return proxies_; }
  const ProxySet& last_coarse() const { return coarse_; }

  /// Backward through the whole chain; parameter gradients accumulate in
  /// the layers. When `through_extractor` is set the set-abstraction
  /// feature maps receive gradients too.
  void backward(const Mat& d_points, const Mat& d_logits, bool through_extractor = true) {
    Mat d_decoded_features;
    Mat d_coarse_coords_from_cscm;
    d_decoded_features = cscm_.backward(d_points, d_logits, &d_coarse_coords_from_cscm);

    Mat d_coarse_features, d_coarse_coords_from_decoder;
    decoder_.backward(d_decoded_features, &d_coarse_features, &d_coarse_coords_from_decoder);
    const Mat d_coarse_coords = d_coarse_coords_from_cscm + d_coarse_coords_from_decoder;

    Mat d_proxy_coords_unused;
    const Mat d_encoded_features =
        generator_.backward(d_coarse_coords, d_coarse_features, &d_proxy_coords_unused);

    Mat d_proxy_features, d_proxy_coords2_unused;
    encoder_.backward(d_encoded_features, &d_proxy_features, &d_proxy_coords2_unused);
    // Proxy coordinates are selected input points (data, not parameters).
    if (through_extractor) extractor_.backward(d_proxy_features);
  }

  void visit(const ParamVisitor& fn) {
    extractor_.visit("extractor", fn);
    encoder_.visit("encoder", fn);
    generator_.visit("generator", fn);
    decoder_.visit("decoder", fn);
    cscm_.visit("cscm", fn);
  }

  void zero_grad() {
    visit([](const std::string&, Param& p) { p.grad.setZero(); });
  }

  void set_mode(BlockMode mode) {
    encoder_.set_mode(mode);
    decoder_.set_mode(mode);
    cfg_.mode = mode;
  }

  SpatialAwareBlock& encoder() { return encoder_; }
  SpatialAwareBlock& decoder() { return decoder_; }
  ProxyGenerator& generator() { return generator_; }
  Cscm& cscm() { return cscm_; }

 private:
  ModelConfig cfg_;
  ProxyExtractor extractor_;
  SpatialAwareBlock encoder_;
  ProxyGenerator generator_;
  SpatialAwareBlock decoder_;
  Cscm cscm_;

  // forward caches
  ProxySet proxies_, encoded_, coarse_, decoded_;
};

// ---------------------------------------------------------------------------
// AdamW
// ---------------------------------------------------------------------------

class AdamW {
 public:
  AdamW(double lr, double weight_decay, double beta1 = 0.9, double beta2 = 0.999,
        double eps = 1e-8)
      : lr_(lr), wd_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(SscModel& model) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    model.visit([&](const std::string& name, Param& p) {
      State& s = state_[name];
      if (s.m.size() == 0) {
        s.m = Mat::Zero(p.value.rows(), p.value.cols());
        s.v = Mat::Zero(p.value.rows(), p.value.cols());
      }
      s.m = beta1_ * s.m + (1.0 - beta1_) * p.grad;
      s.v = beta2_ * s.v + (1.0 - beta2_) * p.grad.cwiseProduct(p.grad);
      const Mat m_hat = s.m / bc1;
      const Mat v_hat = s.v / bc2;
      // Decoupled weight decay: shrink parameters directly, not through the
      // adaptive step.
      p.value -= lr_ * wd_ * p.value;
      const Mat denom =
          v_hat.cwiseSqrt() + Mat::Constant(p.value.rows(), p.value.cols(), eps_);
      p.value -= lr_ * m_hat.cwiseQuotient(denom);
    });
  }

 private:
  struct State {
    Mat m, v;
  };
  double lr_, wd_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::map<std::string, State> state_;
};

}  // namespace sscpc
