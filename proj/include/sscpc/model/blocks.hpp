// sscpc - spatial-aware transformer block.
//
// One attention block that fuses per-proxy (local) features with a
// max-pooled scene (global) feature:
//
//   Q,K,V  = W_{Q,K,V}(F + pe(coords))
//   Attn   = softmax(Q K^T / sqrt(d_k)) V
//   g      = column-wise max over Attn rows, broadcast to every row
//   out    = FFN2(FFN1([Attn, g]) + Attn)
//
// The mode flag zeroes one half of the concatenation: local-only drops g,
// global-only drops the Attn half and the skip connection. Permutation
// equivariant; attention rows are convex combinations of V rows.

#pragma once

#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "sscpc/model/config.hpp"
#include "sscpc/model/layers.hpp"

namespace sscpc {

/// Proxy tokens: one coordinate plus one feature row per proxy.
struct ProxySet {
  Mat coords;    // M x 3, meters
  Mat features;  // M x C

  void validate() const {
    if (coords.rows() < 1) throw std::runtime_error("proxy set: empty");
    if (coords.cols() != 3) throw std::runtime_error("proxy set: coords must be M x 3");
    if (features.rows() != coords.rows()) {
      throw std::runtime_error("proxy set: feature rows != coord rows");
    }
    if (!coords.allFinite() || !features.allFinite()) {
      throw std::runtime_error("proxy set: non-finite entries");
    }
  }
};

class SpatialAwareBlock {
 public:
  SpatialAwareBlock() = default;

  SpatialAwareBlock(int dim, BlockMode mode, double pe_input_scale, Rng& rng, double gain = 1.0)
      : dim_(dim),
        mode_(mode),
        pe_scale_(pe_input_scale),
        pe_(3, dim, dim, rng, gain),
        wq_(dim, dim, false, rng, gain),
        wk_(dim, dim, false, rng, gain),
        wv_(dim, dim, false, rng, gain),
        fusion_(2 * dim, 2 * dim, dim, rng, gain),
        post_(dim, 2 * dim, dim, rng, gain) {}

  int dim() const { return dim_; }
  BlockMode mode() const { return mode_; }
  void set_mode(BlockMode mode) { mode_ = mode; }

  /// Updated features, M x C. Coordinates pass through unchanged.
  Mat forward(const ProxySet& proxies) {
    proxies.validate();
    if (proxies.features.cols() != dim_) {
      throw std::runtime_error("spatial aware block: feature dim mismatch");
    }
    const Eigen::Index m = proxies.features.rows();

    pe_out_ = pe_.forward(proxies.coords * pe_scale_);
    h_ = proxies.features + pe_out_;
    q_ = wq_.forward(h_);
    k_ = wk_.forward(h_);
    v_ = wv_.forward(h_);

    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dim_));
    attn_weights_ = softmax_rows(q_ * k_.transpose() * inv_sqrt_dk);
    attn_ = attn_weights_ * v_;

    // Column-wise max over rows; remember the winners for backward.
    argmax_.resize(dim_);
    Eigen::RowVectorXd g(dim_);
    for (int c = 0; c < dim_; ++c) {
      Eigen::Index row = 0;
      g(c) = attn_.col(c).maxCoeff(&row);
      argmax_[c] = row;
    }

    Mat concat = Mat::Zero(m, 2 * dim_);
    if (mode_ != BlockMode::global_only) concat.leftCols(dim_) = attn_;
    if (mode_ != BlockMode::local_only) concat.rightCols(dim_).rowwise() = g;

    Mat inner = fusion_.forward(concat);
    if (mode_ != BlockMode::global_only) inner += attn_;  // skip connection
    return post_.forward(inner);
  }

  /// Gradients w.r.t. the input features and coordinates; parameter
  /// gradients accumulate inside the layers.
  void backward(const Mat& d_out, Mat* d_features, Mat* d_coords) {
    const Eigen::Index m = attn_.rows();
    const Mat d_inner = post_.backward(d_out);
    const Mat d_concat = fusion_.backward(d_inner);

    Mat d_attn = Mat::Zero(m, dim_);
    if (mode_ != BlockMode::global_only) {
      d_attn = d_concat.leftCols(dim_);
      d_attn += d_inner;  // skip connection
    }
    if (mode_ != BlockMode::local_only) {
      // Broadcast g: every row received the same pooled vector.
      const Eigen::RowVectorXd dg = d_concat.rightCols(dim_).colwise().sum();
      for (int c = 0; c < dim_; ++c) d_attn(argmax_[c], c) += dg(c);
    }

    // Attn = P V.
    const Mat d_v = attn_weights_.transpose() * d_attn;
    const Mat d_weights = d_attn * v_.transpose();
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dim_));
    const Mat d_scores = softmax_rows_backward(attn_weights_, d_weights) * inv_sqrt_dk;
    const Mat d_q = d_scores * k_;
    const Mat d_k = d_scores.transpose() * q_;

    Mat d_h = wq_.backward(d_q);
    d_h += wk_.backward(d_k);
    d_h += wv_.backward(d_v);

    if (d_features) *d_features = d_h;
    const Mat d_pe_in = pe_.backward(d_h);
    if (d_coords) *d_coords = d_pe_in * pe_scale_;
  }

  /// Attention caches of the last forward (test hooks for the attention
  /// algebra: single-token identity, convex-hull bounds, frozen-softmax
  /// linearity).
  const Mat& last_attention() const { return attn_; }
  const Mat& last_attention_weights() const { return attn_weights_; }
  const Mat& last_values() const { return v_; }

  void visit(const std::string& prefix, const ParamVisitor& fn) {
    pe_.visit(prefix + ".pe", fn);
    wq_.visit(prefix + ".wq", fn);
    wk_.visit(prefix + ".wk", fn);
    wv_.visit(prefix + ".wv", fn);
    fusion_.visit(prefix + ".fusion", fn);
    post_.visit(prefix + ".post", fn);
  }

 private:
  int dim_ = 0;
  BlockMode mode_ = BlockMode::local_and_global;
  double pe_scale_ = 1.0;
  Mlp pe_;
  Linear wq_, wk_, wv_;
  Mlp fusion_;
  Mlp post_;

  // forward caches
  Mat pe_out_, h_, q_, k_, v_, attn_weights_, attn_;
  std::vector<Eigen::Index> argmax_;
};

}  // namespace sscpc
