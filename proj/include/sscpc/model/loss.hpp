// sscpc - joint completion/segmentation loss.
//
//   L = CD_L1(points, gt) + lambda * CE(logits, labels of nearest gt)
//
// Chamfer is the raw (unscaled) metrics convention: mean nearest-neighbor
// distance summed over both directions. Cross-entropy targets come from
// nearest-neighbor label transfer onto the predicted coordinates, so the
// targets move with the prediction; the assignment is treated as constant
// in the backward pass (it changes on a measure-zero set).

#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "sscpc/core/nn_index.hpp"
#include "sscpc/core/types.hpp"
#include "sscpc/model/heads.hpp"

namespace sscpc {

struct LossBreakdown {
  double total = 0.0;
  double l_cd = 0.0;
  double l_ce = 0.0;
};

/// Maps semantic class ids onto logit columns. Identity-ish default: class
/// k -> k, unlabeled -> 16 (requires >= 17 logit columns). Toy setups remap
/// onto a compact range.
struct ClassMap {
  std::array<int, 256> to_compact{};

  ClassMap() {
    to_compact.fill(-1);
    for (int k = 0; k < kNumClasses; ++k) to_compact[k] = k;
    to_compact[255] = kNumClasses;
  }

  static ClassMap compact_from(const std::vector<SemanticClass>& labels) {
    std::array<bool, 256> seen{};
    for (const SemanticClass c : labels) seen[static_cast<std::uint8_t>(c)] = true;
    ClassMap map;
    map.to_compact.fill(-1);
    int next = 0;
    for (int id = 0; id < 256; ++id) {
      if (seen[id]) map.to_compact[id] = next++;
    }
    return map;
  }

  int count() const {
    int n = 0;
    for (int v : to_compact) n = std::max(n, v + 1);
    return n;
  }

  int operator()(SemanticClass c) const { return to_compact[static_cast<std::uint8_t>(c)]; }
};

class SscLoss {
 public:
  SscLoss(const LabeledCloud& gt, double lambda, ClassMap class_map = {})
      : gt_(gt), lambda_(lambda), class_map_(class_map), gt_index_(gt.points) {
    if (!gt_.has_labels()) throw std::runtime_error("loss: ground truth must be labeled");
  }

  LossBreakdown forward(const SscOutput& out) {
    out.validate();
    const Eigen::Index n = out.points.rows();
    const std::size_t m = gt_.size();

    // Pred -> GT direction; record the assignment for CE targets.
    nn_gt_.resize(n);
    nn_dist_.resize(n);
    double cd_pg = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const Point3 p(out.points(i, 0), out.points(i, 1), out.points(i, 2));
      const auto [j, d2] = gt_index_.nearest_squared(p);
      nn_gt_[i] = j;
      nn_dist_[i] = std::sqrt(d2);
      cd_pg += nn_dist_[i];
    }
    cd_pg /= static_cast<double>(n);

    // GT -> pred direction via a fresh index over the prediction.
    std::vector<Point3> pred_pts(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      pred_pts[i] = Point3(out.points(i, 0), out.points(i, 1), out.points(i, 2));
    }
    pred_index_.emplace(std::move(pred_pts));
    nn_pred_of_gt_.resize(m);
    double cd_gp = 0.0;
    for (std::size_t q = 0; q < m; ++q) {
      const auto [i, d2] = pred_index_->nearest_squared(gt_.points[q]);
      nn_pred_of_gt_[q] = i;
      cd_gp += std::sqrt(d2);
    }
    cd_gp /= static_cast<double>(m);

    // Cross-entropy against transferred labels.
    targets_.resize(n);
    softmax_ = Mat(n, out.logits.cols());
    double ce = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const int target = class_map_((*gt_.labels)[nn_gt_[i]]);
      if (target < 0 || target >= out.logits.cols()) {
        throw std::runtime_error("loss: ground-truth class not representable by the logits");
      }
      targets_[i] = target;
      const double mx = out.logits.row(i).maxCoeff();
      Eigen::RowVectorXd e = (out.logits.row(i).array() - mx).exp();
      const double z = e.sum();
      softmax_.row(i) = e / z;
      ce -= std::log(std::max(softmax_(i, target), 1e-300));
    }
    ce /= static_cast<double>(n);

    points_ = out.points;
    LossBreakdown loss;
    loss.l_cd = cd_pg + cd_gp;
    loss.l_ce = ce;
    loss.total = loss.l_cd + lambda_ * loss.l_ce;
    if (!std::isfinite(loss.total)) throw std::runtime_error("loss: non-finite value");
    return loss;
  }

  /// Gradients of the total loss w.r.t. points and logits.
  void backward(Mat* d_points, Mat* d_logits) const {
    const Eigen::Index n = points_.rows();
    const std::size_t m = gt_.size();
    d_points->setZero(n, 3);
    // Pred -> GT: d mean|p - q*| / dp = (p - q*) / (|.| * n).
    for (Eigen::Index i = 0; i < n; ++i) {
      if (nn_dist_[i] <= 0.0) continue;
      const Point3& q = gt_.points[nn_gt_[i]];
      for (int c = 0; c < 3; ++c) {
        (*d_points)(i, c) += (points_(i, c) - q[c]) / (nn_dist_[i] * n);
      }
    }
    // GT -> pred: gradient lands on each gt point's nearest prediction.
    for (std::size_t qi = 0; qi < m; ++qi) {
      const std::size_t i = nn_pred_of_gt_[qi];
      const Point3& q = gt_.points[qi];
      double d = 0.0;
      for (int c = 0; c < 3; ++c) {
        const double diff = points_(static_cast<Eigen::Index>(i), c) - q[c];
        d += diff * diff;
      }
      d = std::sqrt(d);
      if (d <= 0.0) continue;
      for (int c = 0; c < 3; ++c) {
        (*d_points)(static_cast<Eigen::Index>(i), c) +=
            (points_(static_cast<Eigen::Index>(i), c) - q[c]) / (d * static_cast<double>(m));
      }
    }

    // CE: softmax minus one-hot, averaged; scaled by lambda.
    *d_logits = softmax_;
    for (Eigen::Index i = 0; i < n; ++i) (*d_logits)(i, targets_[i]) -= 1.0;
    *d_logits *= lambda_ / static_cast<double>(n);
  }

  const std::vector<int>& last_targets() const { return targets_; }

 private:
  LabeledCloud gt_;
  double lambda_;
  ClassMap class_map_;
  NNIndex gt_index_;

  // forward caches
  Mat points_, softmax_;
  std::vector<std::size_t> nn_gt_;
  std::vector<double> nn_dist_;
  std::vector<std::size_t> nn_pred_of_gt_;
  std::optional<NNIndex> pred_index_;
  std::vector<int> targets_;
};

/// One-call form of the loss (no gradients).
inline LossBreakdown loss_ssc(const SscOutput& out, const LabeledCloud& gt, double lambda,
                              ClassMap class_map = {}) {
  SscLoss loss(gt, lambda, class_map);
  return loss.forward(out);
}

}  // namespace sscpc
