// sscpc - coarse-to-fine generation heads.
//
// ProxyGenerator: per-proxy feature expansion C -> S*C (a stride-S
// transposed convolution over a single element, realized as a linear map
// reshaped to S rows) plus a bounded offset head; children start at the
// repeated parent coordinate. Cscm adds the segmentation head and emits
// the final points and per-point class logits in one pass.

#pragma once

#include <stdexcept>
#include <string>

#include "sscpc/model/blocks.hpp"
#include "sscpc/model/layers.hpp"

namespace sscpc {

/// Expands each parent row into `factor` child rows.
class FeatureExpansion {
 public:
  FeatureExpansion() = default;
  FeatureExpansion(int dim, int factor, Rng& rng, double gain = 1.0)
      : dim_(dim), factor_(factor), expand_(dim, factor * dim, true, rng, gain) {}

  Mat forward(const Mat& parent_features) {
    const Eigen::Index m = parent_features.rows();
    const Mat wide = expand_.forward(parent_features);  // M x (S*C)
    Mat child(m * factor_, dim_);
    for (Eigen::Index p = 0; p < m; ++p) {
      for (int s = 0; s < factor_; ++s) {
        child.row(p * factor_ + s) = wide.row(p).segment(s * dim_, dim_);
      }
    }
    return child;
  }

  Mat backward(const Mat& d_child) {
    const Eigen::Index m = d_child.rows() / factor_;
    Mat d_wide(m, factor_ * dim_);
    for (Eigen::Index p = 0; p < m; ++p) {
      for (int s = 0; s < factor_; ++s) {
        d_wide.row(p).segment(s * dim_, dim_) = d_child.row(p * factor_ + s);
      }
    }
    return expand_.backward(d_wide);
  }

  int factor() const { return factor_; }
  void visit(const std::string& prefix, const ParamVisitor& fn) { expand_.visit(prefix, fn); }

 private:
  int dim_ = 0;
  int factor_ = 1;
  Linear expand_;
};

class ProxyGenerator {
 public:
  ProxyGenerator() = default;
  ProxyGenerator(int dim, int factor, double offset_scale, Rng& rng, double gain = 1.0)
      : expansion_(dim, factor, rng, gain),
        offset_mlp_(dim, dim, 3, rng, gain),
        offset_bound_(offset_scale) {}

  ProxySet forward(const ProxySet& parents) {
    parents.validate();
    const int factor = expansion_.factor();
    ProxySet out;
    out.features = expansion_.forward(parents.features);
    offsets_ = offset_bound_.forward(offset_mlp_.forward(out.features));
    out.coords.resize(parents.coords.rows() * factor, 3);
    for (Eigen::Index p = 0; p < parents.coords.rows(); ++p) {
      for (int s = 0; s < factor; ++s) {
        out.coords.row(p * factor + s) = parents.coords.row(p) + offsets_.row(p * factor + s);
      }
    }
    return out;
  }

  /// d_child_coords/d_child_features -> gradients w.r.t. the parent
  /// features; the repeated-parent coordinate gradient is returned in
  /// d_parent_coords (summed over each parent's children).
  Mat backward(const Mat& d_child_coords, const Mat& d_child_features, Mat* d_parent_coords) {
    const int factor = expansion_.factor();
    const Eigen::Index m = d_child_coords.rows() / factor;
    if (d_parent_coords) {
      d_parent_coords->setZero(m, 3);
      for (Eigen::Index p = 0; p < m; ++p) {
        for (int s = 0; s < factor; ++s) {
          d_parent_coords->row(p) += d_child_coords.row(p * factor + s);
        }
      }
    }
    Mat d_features = d_child_features;
    d_features += offset_mlp_.backward(offset_bound_.backward(d_child_coords));
    return expansion_.backward(d_features);
  }

  const Mat& last_offsets() const { return offsets_; }
  double offset_bound() const { return offset_bound_.scale(); }

  void visit(const std::string& prefix, const ParamVisitor& fn) {
    expansion_.visit(prefix + ".expand", fn);
    offset_mlp_.visit(prefix + ".offset", fn);
  }

 private:
  FeatureExpansion expansion_;
  Mlp offset_mlp_;
  ScaledTanh offset_bound_;
  Mat offsets_;
};

/// Final rebuild: expanded features -> per-point offsets O (added to the
/// repeated parent coordinate) and K-class logits.
struct SscOutput {
  Mat points;  // (M*S) x 3
  Mat logits;  // (M*S) x K

  void validate() const {
    if (points.rows() != logits.rows()) throw std::runtime_error("ssc output: row mismatch");
    if (!points.allFinite() || !logits.allFinite()) {
      throw std::runtime_error("ssc output: non-finite entries");
    }
  }
};

class Cscm {
 public:
  Cscm() = default;
  Cscm(int dim, int factor, int classes, double offset_scale, Rng& rng, double gain = 1.0)
      : expansion_(dim, factor, rng, gain),
        rebuild_mlp_(dim, dim, 3, rng, gain),
        offset_bound_(offset_scale),
        seg_mlp_(dim, 2 * dim, classes, rng, gain) {}

  SscOutput forward(const ProxySet& parents) {
    parents.validate();
    const int factor = expansion_.factor();
    expanded_ = expansion_.forward(parents.features);
    offsets_ = offset_bound_.forward(rebuild_mlp_.forward(expanded_));

    SscOutput out;
    out.points.resize(parents.coords.rows() * factor, 3);
    for (Eigen::Index p = 0; p < parents.coords.rows(); ++p) {
      for (int s = 0; s < factor; ++s) {
        out.points.row(p * factor + s) = parents.coords.row(p) + offsets_.row(p * factor + s);
      }
    }
    out.logits = seg_mlp_.forward(expanded_);
    return out;
  }

  Mat backward(const Mat& d_points, const Mat& d_logits, Mat* d_parent_coords) {
    const int factor = expansion_.factor();
    const Eigen::Index m = d_points.rows() / factor;
    if (d_parent_coords) {
      d_parent_coords->setZero(m, 3);
      for (Eigen::Index p = 0; p < m; ++p) {
        for (int s = 0; s < factor; ++s) {
          d_parent_coords->row(p) += d_points.row(p * factor + s);
        }
      }
    }
    Mat d_expanded = seg_mlp_.backward(d_logits);
    d_expanded += rebuild_mlp_.backward(offset_bound_.backward(d_points));
    return expansion_.backward(d_expanded);
  }

  const Mat& last_offsets() const { return offsets_; }

  void visit(const std::string& prefix, const ParamVisitor& fn) {
    expansion_.visit(prefix + ".expand", fn);
    rebuild_mlp_.visit(prefix + ".rebuild", fn);
    seg_mlp_.visit(prefix + ".seg", fn);
  }

 private:
  FeatureExpansion expansion_;
  Mlp rebuild_mlp_;
  ScaledTanh offset_bound_;
  Mlp seg_mlp_;

  Mat expanded_, offsets_;
};

}  // namespace sscpc
