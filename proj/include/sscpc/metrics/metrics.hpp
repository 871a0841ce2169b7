// sscpc - evaluation metrics.
//
// Chamfer distance (L1/L2), F1@tau, nearest-neighbor label transfer,
// per-class IoU and mIoU. All nearest-neighbor work runs over immutable
// KD-trees; per-point results are written into index slots and reduced
// sequentially, so values do not depend on the thread count.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sscpc/core/nn_index.hpp"
#include "sscpc/core/parallel.hpp"
#include "sscpc/core/types.hpp"

namespace sscpc {

/// Reporting convention: Chamfer values are multiplied by 1000 and
/// precision/recall-style values by 100 when they enter a MetricsReport.
/// Everything below the report boundary is raw meters.
inline constexpr double kChamferReportScale = 1000.0;

struct ChamferResult {
  double cd_l1 = 0.0;  // raw: mean NN distance, summed over both directions
  double cd_l2 = 0.0;  // raw: same with squared distances
};

struct MetricsReport {
  double cd_l1 = 0.0;   // x1000
  double cd_l2 = 0.0;   // x1000
  double f1 = 0.0;      // percent
  double threshold = 0.3;
  std::array<std::optional<double>, kNumClasses> per_class_iou{};  // percent; nullopt = absent
  double miou = 0.0;    // percent, mean over present classes
  std::uint64_t n_pred = 0;
  std::uint64_t n_gt = 0;
};

namespace detail {

/// Distance (and optionally source index) from every point of `from` to its
/// nearest neighbor in `index`.
inline void nn_distances(const std::vector<Point3>& from, const NNIndex& index,
                         std::vector<double>* dist, std::vector<std::size_t>* idx) {
  dist->assign(from.size(), 0.0);
  if (idx) idx->assign(from.size(), 0);
  parallel_for(from.size(), [&](std::size_t i) {
    const auto [j, d2] = index.nearest_squared(from[i]);
    (*dist)[i] = std::sqrt(d2);
    if (idx) (*idx)[i] = j;
  });
}

inline double mean(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc / static_cast<double>(v.size());
}

inline double mean_sq(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return acc / static_cast<double>(v.size());
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Chamfer distance
// ---------------------------------------------------------------------------

/// CD-L1 = mean_p d(p, GT) + mean_q d(q, Pred); CD-L2 uses squared
/// distances. Directional terms are summed, not halved.
inline ChamferResult chamfer(const LabeledCloud& pred, const LabeledCloud& gt) {
  if (pred.empty() || gt.empty()) throw std::runtime_error("undefined Chamfer: empty point set");
  const NNIndex pred_index(pred.points);
  const NNIndex gt_index(gt.points);
  std::vector<double> d_pg, d_gp;
  detail::nn_distances(pred.points, gt_index, &d_pg, nullptr);
  detail::nn_distances(gt.points, pred_index, &d_gp, nullptr);
  ChamferResult out;
  out.cd_l1 = detail::mean(d_pg) + detail::mean(d_gp);
  out.cd_l2 = detail::mean_sq(d_pg) + detail::mean_sq(d_gp);
  return out;
}

// ---------------------------------------------------------------------------
// F1 score at a distance threshold
// ---------------------------------------------------------------------------

/// Percentage F1: precision = fraction of predicted points within tau of
/// GT, recall the converse; F1 = 2PR/(P+R), 0 when both vanish.
inline double f1_at(const LabeledCloud& pred, const LabeledCloud& gt, double tau) {
  if (pred.empty() || gt.empty()) throw std::runtime_error("undefined F1: empty point set");
  if (!(tau > 0)) throw std::runtime_error("f1_at: threshold must be > 0");
  const NNIndex pred_index(pred.points);
  const NNIndex gt_index(gt.points);
  std::vector<double> d_pg, d_gp;
  detail::nn_distances(pred.points, gt_index, &d_pg, nullptr);
  detail::nn_distances(gt.points, pred_index, &d_gp, nullptr);
  std::size_t hit_p = 0, hit_g = 0;
  for (double d : d_pg) hit_p += d <= tau;
  for (double d : d_gp) hit_g += d <= tau;
  const double precision = static_cast<double>(hit_p) / static_cast<double>(d_pg.size());
  const double recall = static_cast<double>(hit_g) / static_cast<double>(d_gp.size());
  if (precision + recall == 0.0) return 0.0;
  return 100.0 * 2.0 * precision * recall / (precision + recall);
}

// ---------------------------------------------------------------------------
// Label transfer and IoU
// ---------------------------------------------------------------------------

/// Each predicted point receives the class of its nearest ground-truth
/// point (exact NN, lowest index on ties).
inline std::vector<SemanticClass> transfer_labels(const LabeledCloud& pred,
                                                  const LabeledCloud& gt) {
  if (!gt.has_labels()) throw std::runtime_error("transfer_labels: ground truth has no labels");
  if (gt.empty()) throw std::runtime_error("transfer_labels: empty ground truth");
  const NNIndex gt_index(gt.points);
  std::vector<double> dist;
  std::vector<std::size_t> idx;
  detail::nn_distances(pred.points, gt_index, &dist, &idx);
  std::vector<SemanticClass> out(pred.points.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out[i] = (*gt.labels)[idx[i]];
  return out;
}

struct ConfusionCounts {
  std::array<std::uint64_t, kNumClasses> tp{}, fp{}, fn{};
};

inline ConfusionCounts count_confusion(const std::vector<SemanticClass>& pred,
                                       const std::vector<SemanticClass>& gt) {
  if (pred.size() != gt.size()) {
    throw std::runtime_error("confusion: label sequences differ in length (" +
                             std::to_string(pred.size()) + " vs " + std::to_string(gt.size()) + ")");
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const auto p = pred[i], g = gt[i];
    if (p != SemanticClass::unlabeled) {
      const auto pi = static_cast<std::size_t>(p);
      if (p == g) ++c.tp[pi];
      else ++c.fp[pi];
    }
    if (g != SemanticClass::unlabeled && p != g) ++c.fn[static_cast<std::size_t>(g)];
  }
  return c;
}

struct IouResult {
  std::array<std::optional<double>, kNumClasses> per_class{};  // percent
  double miou = 0.0;                                           // percent
};

/// Per-class IoU = 100*TP/(TP+FP+FN); classes with an empty denominator are
/// excluded from the mean. `unlabeled` never participates.
inline IouResult iou(const std::vector<SemanticClass>& pred,
                     const std::vector<SemanticClass>& gt) {
  const ConfusionCounts c = count_confusion(pred, gt);
  IouResult out;
  double sum = 0.0;
  int present = 0;
  for (int k = 0; k < kNumClasses; ++k) {
    const std::uint64_t denom = c.tp[k] + c.fp[k] + c.fn[k];
    if (denom == 0) continue;
    const double v = 100.0 * static_cast<double>(c.tp[k]) / static_cast<double>(denom);
    out.per_class[k] = v;
    sum += v;
    ++present;
  }
  out.miou = present == 0 ? 0.0 : sum / present;
  return out;
}

// ---------------------------------------------------------------------------
// Full evaluation
// ---------------------------------------------------------------------------

/// Runs the whole metric suite on a labeled prediction against labeled
/// ground truth and assembles the report (Chamfer x1000, percentages).
inline MetricsReport evaluate(const LabeledCloud& pred, const LabeledCloud& gt, double tau) {
  if (pred.empty() || gt.empty()) throw std::runtime_error("evaluate: empty point set");
  if (!pred.has_labels() || !gt.has_labels()) {
    throw std::runtime_error("evaluate: both clouds must carry labels");
  }
  if (!(tau > 0)) throw std::runtime_error("evaluate: threshold must be > 0");

  const NNIndex pred_index(pred.points);
  const NNIndex gt_index(gt.points);
  std::vector<double> d_pg, d_gp;
  std::vector<std::size_t> nn_gt;
  detail::nn_distances(pred.points, gt_index, &d_pg, &nn_gt);
  detail::nn_distances(gt.points, pred_index, &d_gp, nullptr);

  MetricsReport report;
  report.cd_l1 = (detail::mean(d_pg) + detail::mean(d_gp)) * kChamferReportScale;
  report.cd_l2 = (detail::mean_sq(d_pg) + detail::mean_sq(d_gp)) * kChamferReportScale;

  std::size_t hit_p = 0, hit_g = 0;
  for (double d : d_pg) hit_p += d <= tau;
  for (double d : d_gp) hit_g += d <= tau;
  const double precision = static_cast<double>(hit_p) / static_cast<double>(d_pg.size());
  const double recall = static_cast<double>(hit_g) / static_cast<double>(d_gp.size());
  report.f1 = (precision + recall == 0.0)
                  ? 0.0
                  : 100.0 * 2.0 * precision * recall / (precision + recall);
  report.threshold = tau;

  std::vector<SemanticClass> transferred(pred.points.size());
  for (std::size_t i = 0; i < nn_gt.size(); ++i) transferred[i] = (*gt.labels)[nn_gt[i]];
  const IouResult r = iou(*pred.labels, transferred);
  report.per_class_iou = r.per_class;
  report.miou = r.miou;
  report.n_pred = pred.size();
  report.n_gt = gt.size();
  return report;
}

}  // namespace sscpc
