#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "sscpc/core/rng.hpp"
#include "sscpc/metrics/metrics.hpp"

using namespace sscpc;

namespace {

LabeledCloud random_cloud(Rng& rng, std::size_t n, double extent = 5.0, bool labeled = false) {
  LabeledCloud cloud;
  if (labeled) cloud.labels.emplace();
  for (std::size_t i = 0; i < n; ++i) {
    cloud.points.emplace_back(rng.uniform(-extent, extent), rng.uniform(-extent, extent),
                              rng.uniform(-extent, extent));
    if (labeled) cloud.labels->push_back(static_cast<SemanticClass>(rng.index(kNumClasses)));
  }
  return cloud;
}

// O(N*M) reference implementations, kept independent of NNIndex.
double brute_min_dist(const Point3& p, const std::vector<Point3>& set) {
  double best = std::numeric_limits<double>::infinity();
  for (const Point3& q : set) best = std::min(best, (p - q).norm());
  return best;
}

ChamferResult brute_chamfer(const LabeledCloud& a, const LabeledCloud& b) {
  double l1 = 0, l2 = 0;
  for (const Point3& p : a.points) {
    const double d = brute_min_dist(p, b.points);
    l1 += d;
    l2 += d * d;
  }
  double r1 = 0, r2 = 0;
  for (const Point3& q : b.points) {
    const double d = brute_min_dist(q, a.points);
    r1 += d;
    r2 += d * d;
  }
  return {l1 / a.size() + r1 / b.size(), l2 / a.size() + r2 / b.size()};
}

double brute_f1(const LabeledCloud& pred, const LabeledCloud& gt, double tau) {
  std::size_t hp = 0, hg = 0;
  for (const Point3& p : pred.points) hp += brute_min_dist(p, gt.points) <= tau;
  for (const Point3& q : gt.points) hg += brute_min_dist(q, pred.points) <= tau;
  const double precision = double(hp) / pred.size();
  const double recall = double(hg) / gt.size();
  return precision + recall == 0 ? 0.0 : 100.0 * 2 * precision * recall / (precision + recall);
}

std::vector<SemanticClass> brute_transfer(const LabeledCloud& pred, const LabeledCloud& gt) {
  std::vector<SemanticClass> out;
  for (const Point3& p : pred.points) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < gt.size(); ++j) {
      const double d = (p - gt.points[j]).norm();
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    out.push_back((*gt.labels)[best]);
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Chamfer
// ---------------------------------------------------------------------------

TEST_CASE("chamfer: identical clouds are zero", "[metrics][chamfer]") {
  Rng rng(1);
  const LabeledCloud c = random_cloud(rng, 64);
  const ChamferResult r = chamfer(c, c);
  CHECK(r.cd_l1 == 0.0);
  CHECK(r.cd_l2 == 0.0);
}

TEST_CASE("chamfer: 3-4-5 analytic case", "[metrics][chamfer]") {
  LabeledCloud p{{Point3(0, 0, 0)}, std::nullopt};
  LabeledCloud q{{Point3(3, 4, 0)}, std::nullopt};
  const ChamferResult r = chamfer(p, q);
  CHECK(r.cd_l1 == Catch::Approx(10.0).epsilon(1e-12));
  CHECK(r.cd_l2 == Catch::Approx(50.0).epsilon(1e-12));
}

TEST_CASE("chamfer: empty input rejected", "[metrics][chamfer]") {
  LabeledCloud ok{{Point3(0, 0, 0)}, std::nullopt};
  CHECK_THROWS_WITH(chamfer(ok, LabeledCloud{}),
                    Catch::Matchers::ContainsSubstring("undefined Chamfer"));
}

TEST_CASE("chamfer: matches brute force and is symmetric", "[metrics][chamfer][oracle]") {
  Rng rng(2024);
  for (int trial = 0; trial < 10; ++trial) {
    const auto a = random_cloud(rng, 1 + rng.index(500));
    const auto b = random_cloud(rng, 1 + rng.index(500));
    const ChamferResult fast = chamfer(a, b);
    const ChamferResult ref = brute_chamfer(a, b);
    CHECK(fast.cd_l1 == Catch::Approx(ref.cd_l1).epsilon(1e-9));
    CHECK(fast.cd_l2 == Catch::Approx(ref.cd_l2).epsilon(1e-9));
    const ChamferResult swapped = chamfer(b, a);
    CHECK(swapped.cd_l1 == fast.cd_l1);
    CHECK(swapped.cd_l2 == fast.cd_l2);
  }
}

// ---------------------------------------------------------------------------
// F1
// ---------------------------------------------------------------------------

TEST_CASE("f1: identical clouds give 100", "[metrics][f1]") {
  Rng rng(5);
  const LabeledCloud c = random_cloud(rng, 40);
  CHECK(f1_at(c, c, 0.3) == 100.0);
  CHECK(f1_at(c, c, 1e-9) == 100.0);
}

TEST_CASE("f1: threshold analytic case", "[metrics][f1]") {
  LabeledCloud gt{{Point3(0, 0, 0)}, std::nullopt};
  LabeledCloud pred{{Point3(0.2, 0, 0)}, std::nullopt};
  CHECK(f1_at(pred, gt, 0.3) == 100.0);
  CHECK(f1_at(pred, gt, 0.1) == 0.0);
}

TEST_CASE("f1: monotone in tau and matches brute force", "[metrics][f1][oracle]") {
  Rng rng(6);
  const LabeledCloud pred = random_cloud(rng, 150);
  const LabeledCloud gt = random_cloud(rng, 120);
  double prev = -1.0;
  for (double tau : {0.05, 0.1, 0.25, 0.5, 1.0, 2.0, 5.0, 10.0}) {
    const double f = f1_at(pred, gt, tau);
    CHECK(f >= prev);
    CHECK(f == Catch::Approx(brute_f1(pred, gt, tau)).margin(1e-12));
    prev = f;
  }
}

// ---------------------------------------------------------------------------
// Label transfer
// ---------------------------------------------------------------------------

TEST_CASE("transfer_labels: exact coordinates copy labels", "[metrics][transfer]") {
  Rng rng(7);
  const LabeledCloud gt = random_cloud(rng, 50, 5.0, true);
  LabeledCloud pred{gt.points, std::nullopt};
  CHECK(transfer_labels(pred, gt) == *gt.labels);
}

TEST_CASE("transfer_labels: picks the closer class", "[metrics][transfer]") {
  LabeledCloud gt;
  gt.points = {Point3(1, 0, 0), Point3(-2, 0, 0)};
  gt.labels = std::vector<SemanticClass>{SemanticClass::road, SemanticClass::car};
  LabeledCloud pred{{Point3(0, 0, 0)}, std::nullopt};
  const auto labels = transfer_labels(pred, gt);
  REQUIRE(labels.size() == 1);
  CHECK(labels[0] == SemanticClass::road);
}

TEST_CASE("transfer_labels: unlabeled ground truth rejected", "[metrics][transfer]") {
  LabeledCloud gt{{Point3(0, 0, 0)}, std::nullopt};
  LabeledCloud pred{{Point3(0, 0, 0)}, std::nullopt};
  CHECK_THROWS(transfer_labels(pred, gt));
}

TEST_CASE("transfer_labels: matches brute force", "[metrics][transfer][oracle]") {
  Rng rng(8);
  for (int trial = 0; trial < 8; ++trial) {
    const LabeledCloud gt = random_cloud(rng, 1 + rng.index(400), 5.0, true);
    const LabeledCloud pred = random_cloud(rng, 1 + rng.index(400));
    CHECK(transfer_labels(pred, gt) == brute_transfer(pred, gt));
  }
}

// ---------------------------------------------------------------------------
// IoU
// ---------------------------------------------------------------------------

TEST_CASE("iou: perfect agreement", "[metrics][iou]") {
  Rng rng(9);
  std::vector<SemanticClass> labels;
  for (int i = 0; i < 100; ++i) labels.push_back(static_cast<SemanticClass>(rng.index(5)));
  const IouResult r = iou(labels, labels);
  CHECK(r.miou == 100.0);
  for (int k = 0; k < 5; ++k) {
    REQUIRE(r.per_class[k].has_value());
    CHECK(*r.per_class[k] == 100.0);
  }
  for (int k = 5; k < kNumClasses; ++k) CHECK_FALSE(r.per_class[k].has_value());
}

TEST_CASE("iou: two-point hand count", "[metrics][iou]") {
  const std::vector<SemanticClass> pred{SemanticClass::road, SemanticClass::road};
  const std::vector<SemanticClass> gt{SemanticClass::road, SemanticClass::car};
  const IouResult r = iou(pred, gt);
  // road: TP=1 FP=1 FN=0 -> 50; car: TP=0 FP=0 FN=1 -> 0.
  CHECK(*r.per_class[static_cast<int>(SemanticClass::road)] == 50.0);
  CHECK(*r.per_class[static_cast<int>(SemanticClass::car)] == 0.0);
  CHECK(r.miou == 25.0);
}

TEST_CASE("iou: permutation invariant, bounded, unlabeled excluded", "[metrics][iou]") {
  Rng rng(10);
  std::vector<SemanticClass> pred, gt;
  for (int i = 0; i < 300; ++i) {
    pred.push_back(rng.index(10) < 1 ? SemanticClass::unlabeled
                                     : static_cast<SemanticClass>(rng.index(6)));
    gt.push_back(static_cast<SemanticClass>(rng.index(6)));
  }
  const IouResult r = iou(pred, gt);
  double max_class = 0.0;
  for (int k = 0; k < kNumClasses; ++k) {
    if (!r.per_class[k]) continue;
    CHECK(*r.per_class[k] >= 0.0);
    CHECK(*r.per_class[k] <= 100.0);
    max_class = std::max(max_class, *r.per_class[k]);
  }
  CHECK(r.miou <= max_class);

  std::vector<std::size_t> perm(pred.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.index(i)]);
  std::vector<SemanticClass> pred_p, gt_p;
  for (auto i : perm) {
    pred_p.push_back(pred[i]);
    gt_p.push_back(gt[i]);
  }
  const IouResult rp = iou(pred_p, gt_p);
  CHECK(rp.miou == r.miou);
  for (int k = 0; k < kNumClasses; ++k) CHECK(rp.per_class[k] == r.per_class[k]);
}

TEST_CASE("iou: length mismatch rejected", "[metrics][iou]") {
  CHECK_THROWS(iou({SemanticClass::road}, {}));
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

TEST_CASE("evaluate: perfect prediction", "[metrics][evaluate]") {
  Rng rng(11);
  const LabeledCloud gt = random_cloud(rng, 80, 5.0, true);
  const MetricsReport r = evaluate(gt, gt, 0.3);
  CHECK(r.cd_l1 == 0.0);
  CHECK(r.cd_l2 == 0.0);
  CHECK(r.f1 == 100.0);
  CHECK(r.miou == 100.0);
  CHECK(r.n_pred == 80);
  CHECK(r.n_gt == 80);
}

TEST_CASE("evaluate: degraded prediction matches reference pipeline", "[metrics][evaluate][oracle]") {
  Rng rng(12);
  const LabeledCloud gt = random_cloud(rng, 300, 5.0, true);
  LabeledCloud pred = gt;
  for (auto& p : pred.points) {
    p += Point3(rng.normal(0, 0.1), rng.normal(0, 0.1), rng.normal(0, 0.1));
  }
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (rng.uniform() < 0.1) {
      (*pred.labels)[i] = static_cast<SemanticClass>(rng.index(kNumClasses));
    }
  }
  const MetricsReport r = evaluate(pred, gt, 0.3);
  CHECK(r.cd_l1 > 0.0);
  CHECK(r.miou < 100.0);

  // Reference values assembled from the brute-force pieces.
  const ChamferResult cd = brute_chamfer(pred, gt);
  CHECK(r.cd_l1 == Catch::Approx(cd.cd_l1 * 1000.0).epsilon(1e-9));
  CHECK(r.cd_l2 == Catch::Approx(cd.cd_l2 * 1000.0).epsilon(1e-9));
  CHECK(r.f1 == Catch::Approx(brute_f1(pred, gt, 0.3)).epsilon(1e-9));
  const IouResult ref = iou(*pred.labels, brute_transfer(pred, gt));
  CHECK(r.miou == Catch::Approx(ref.miou).epsilon(1e-9));
}

TEST_CASE("evaluate: scale x1000 is presentation only", "[metrics][evaluate]") {
  Rng rng(13);
  const LabeledCloud a = random_cloud(rng, 100, 5.0, true);
  const LabeledCloud b = random_cloud(rng, 90, 5.0, true);
  const ChamferResult raw = chamfer(a, b);
  const MetricsReport r = evaluate(a, b, 0.3);
  CHECK(r.cd_l1 == raw.cd_l1 * 1000.0);
  CHECK(r.cd_l2 == raw.cd_l2 * 1000.0);
}

TEST_CASE("evaluate: rigid invariance", "[metrics][evaluate]") {
  Rng rng(14);
  const LabeledCloud a = random_cloud(rng, 200, 5.0, true);
  const LabeledCloud b = random_cloud(rng, 180, 5.0, true);
  const MetricsReport before = evaluate(a, b, 0.3);

  RigidTransform t;
  t.rotation = Eigen::AngleAxisd(0.9, Eigen::Vector3d(1, 2, 3).normalized()).toRotationMatrix();
  t.translation = Eigen::Vector3d(4, -5, 6);
  const MetricsReport after = evaluate(apply_transform(a, t), apply_transform(b, t), 0.3);
  CHECK(after.cd_l1 == Catch::Approx(before.cd_l1).epsilon(1e-6));
  CHECK(after.cd_l2 == Catch::Approx(before.cd_l2).epsilon(1e-6));
  CHECK(after.f1 == Catch::Approx(before.f1).margin(1e-6));
  CHECK(after.miou == Catch::Approx(before.miou).margin(1e-6));
}

TEST_CASE("evaluate: unlabeled inputs rejected", "[metrics][evaluate]") {
  Rng rng(15);
  const LabeledCloud labeled = random_cloud(rng, 10, 5.0, true);
  const LabeledCloud bare = random_cloud(rng, 10);
  CHECK_THROWS(evaluate(bare, labeled, 0.3));
  CHECK_THROWS(evaluate(labeled, bare, 0.3));
}
