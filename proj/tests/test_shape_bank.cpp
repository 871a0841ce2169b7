#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "sscpc/bank/shape_bank.hpp"
#include "sscpc/core/rng.hpp"
#include "sscpc/metrics/metrics.hpp"

using namespace sscpc;

namespace {

// Jittered shell of a box with half-extents h, in the box frame.
std::vector<Point3> box_shell(const Eigen::Vector3d& h, Rng& rng, std::size_t per_face = 60) {
  std::vector<Point3> out;
  for (int axis = 0; axis < 3; ++axis) {
    for (double sign : {-1.0, 1.0}) {
      for (std::size_t i = 0; i < per_face; ++i) {
        Point3 p(rng.uniform(-h.x(), h.x()), rng.uniform(-h.y(), h.y()),
                 rng.uniform(-h.z(), h.z()));
        p[axis] = sign * h[axis];
        out.push_back(p);
      }
    }
  }
  return out;
}

BankObject make_object(std::string id, BankSide side, const Eigen::Vector3d& size,
                       std::vector<Point3> canonical,
                       SemanticClass cls = SemanticClass::car) {
  BankObject obj;
  obj.track_id = std::move(id);
  obj.side = side;
  obj.cls = cls;
  obj.box_size = size;
  obj.canonical = std::move(canonical);
  return obj;
}

double chamfer_to(const std::vector<Point3>& a, const std::vector<Point3>& b) {
  return chamfer(LabeledCloud{a, std::nullopt}, LabeledCloud{b, std::nullopt}).cd_l1;
}

}  // namespace

// ---------------------------------------------------------------------------
// canonicalize
// ---------------------------------------------------------------------------

TEST_CASE("canonicalize: center and corner", "[bank][canonical]") {
  const OrientedBox box = OrientedBox::make(Point3(4, -2, 1), {4, 2, 2}, 0.6,
                                            SemanticClass::car, "t");
  const auto at_center = canonicalize({box.center}, box);
  CHECK(at_center[0].cwiseAbs().maxCoeff() < 1e-12);

  // A corner in sensor coordinates.
  const double c = std::cos(box.yaw), s = std::sin(box.yaw);
  const Point3 local(2, 1, 1);
  const Point3 corner(c * local.x() - s * local.y() + 4, s * local.x() + c * local.y() - 2,
                      local.z() + 1);
  const auto at_corner = canonicalize({corner}, box);
  CHECK((at_corner[0] - Point3(1, 1, 1)).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("canonicalize: round trip and degenerate box", "[bank][canonical]") {
  Rng rng(31);
  const OrientedBox box = OrientedBox::make(Point3(1, 2, 3), {3.5, 1.5, 2.0}, -1.1,
                                            SemanticClass::bus, "t");
  std::vector<Point3> pts;
  for (int i = 0; i < 100; ++i) {
    pts.emplace_back(rng.uniform(-2, 4), rng.uniform(0, 4), rng.uniform(2, 4));
  }
  const auto back = decanonicalize(canonicalize(pts, box), box);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    CHECK((back[i] - pts[i]).cwiseAbs().maxCoeff() < 1e-9);
  }
  OrientedBox bad = box;
  bad.size.y() = 0.0;
  CHECK_THROWS(canonicalize(pts, bad));
}

// ---------------------------------------------------------------------------
// disparity
// ---------------------------------------------------------------------------

TEST_CASE("disparity: zero on identical shapes, symmetric", "[bank][disparity]") {
  Rng rng(32);
  const auto shell = box_shell({2, 1, 0.8}, rng);
  const auto a = make_object("a", BankSide::infrastructure, {4, 2, 1.6}, shell);
  const auto b = make_object("b", BankSide::infrastructure, {4, 2, 1.6}, shell);
  CHECK(disparity(a, a) == 0.0);
  CHECK(disparity(a, b) == 0.0);

  Rng rng2(33);
  const auto other = make_object("c", BankSide::infrastructure, {4, 2, 1.6},
                                 box_shell({2, 1, 0.8}, rng2));
  CHECK(disparity(a, other) == disparity(other, a));
  CHECK(disparity(a, other) > 0.0);
}

TEST_CASE("disparity: offset corner clouds", "[bank][disparity][oracle]") {
  // Two 8-corner clouds inside a unit [-1,1]^3 box, one shifted by 0.1 on X
  // in normalized space. Each corner's nearest neighbor is the shifted twin,
  // so the symmetric Chamfer-L1 is 0.1 + 0.1 = 0.2.
  std::vector<Point3> corners, shifted;
  for (double x : {-0.8, 0.8})
    for (double y : {-0.8, 0.8})
      for (double z : {-0.8, 0.8}) {
        corners.emplace_back(x, y, z);
        shifted.emplace_back(x + 0.1, y, z);
      }
  const auto a = make_object("a", BankSide::infrastructure, {2, 2, 2}, corners);
  const auto b = make_object("b", BankSide::infrastructure, {2, 2, 2}, shifted);
  CHECK(disparity(a, b) == Catch::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("disparity: cross-class comparison is an error", "[bank][disparity]") {
  Rng rng(34);
  const auto shell = box_shell({1, 1, 1}, rng, 10);
  const auto car = make_object("a", BankSide::infrastructure, {2, 2, 2}, shell, SemanticClass::car);
  const auto bus = make_object("b", BankSide::infrastructure, {2, 2, 2}, shell, SemanticClass::bus);
  CHECK_THROWS_WITH(disparity(car, bus), Catch::Matchers::ContainsSubstring("incomparable"));
}

// ---------------------------------------------------------------------------
// complete_from_bank
// ---------------------------------------------------------------------------

TEST_CASE("complete: exact duplicate doubles the points", "[bank][complete]") {
  Rng rng(35);
  const auto shell = box_shell({2, 1, 0.8}, rng);
  const auto source = make_object("a", BankSide::infrastructure, {4, 2, 1.6}, shell);
  const auto dupe = make_object("b", BankSide::infrastructure, {4, 2, 1.6}, shell);
  const BankObject out = complete_from_bank(source, {source, dupe});
  CHECK(out.canonical.size() == 2 * shell.size());
  CHECK(disparity(source, dupe) == 0.0);
}

TEST_CASE("complete: no same-class candidate leaves source unchanged", "[bank][complete]") {
  Rng rng(36);
  const auto source = make_object("a", BankSide::infrastructure, {4, 2, 1.6},
                                  box_shell({2, 1, 0.8}, rng));
  const auto bus = make_object("b", BankSide::infrastructure, {6, 3, 3},
                               box_shell({3, 1.5, 1.5}, rng), SemanticClass::bus);
  const BankObject out = complete_from_bank(source, {bus});
  CHECK(out.canonical.size() == source.canonical.size());
}

TEST_CASE("complete: source is never shrunk (superset invariant)", "[bank][complete][property]") {
  Rng rng(37);
  const auto source = make_object("a", BankSide::infrastructure, {4, 2, 1.6},
                                  box_shell({2, 1, 0.8}, rng, 20));
  std::vector<BankObject> bank;
  for (int i = 0; i < 4; ++i) {
    bank.push_back(make_object("b" + std::to_string(i), BankSide::infrastructure,
                               {4.4, 2.1, 1.5}, box_shell({2.2, 1.05, 0.75}, rng, 25)));
  }
  const BankObject out = complete_from_bank(source, bank);
  REQUIRE(out.canonical.size() >= source.canonical.size());
  for (std::size_t i = 0; i < source.canonical.size(); ++i) {
    CHECK(out.canonical[i] == source.canonical[i]);
  }
}

TEST_CASE("complete: front half from rear half of an identical car", "[bank][complete][oracle]") {
  Rng rng(38);
  const Eigen::Vector3d half(2, 1, 0.8);
  const auto full = box_shell(half, rng);
  std::vector<Point3> front, rear;
  for (const Point3& p : full) (p.x() >= 0 ? front : rear).push_back(p);

  const auto source = make_object("a", BankSide::infrastructure, 2 * half, front);
  const auto donor = make_object("b", BankSide::infrastructure, 2 * half, rear);
  const BankObject out = complete_from_bank(source, {donor});

  const double completed_cd = chamfer_to(out.canonical, full);
  CHECK(completed_cd <= chamfer_to(front, full));
  CHECK(completed_cd <= chamfer_to(rear, full));
  CHECK(completed_cd < 0.5 * chamfer_to(front, full));
}

TEST_CASE("complete: donor rescaled to the source box size", "[bank][complete]") {
  Rng rng(39);
  const auto small_shell = box_shell({1, 0.5, 0.4}, rng, 20);
  const auto source = make_object("a", BankSide::infrastructure, {4, 2, 1.6},
                                  box_shell({2, 1, 0.8}, rng, 20));
  const auto donor = make_object("b", BankSide::infrastructure, {2, 1, 0.8}, small_shell);
  const BankObject out = complete_from_bank(source, {donor});
  // Donor points double in every axis; all must lie inside the source box.
  REQUIRE_NOTHROW(out.validate());
  CHECK(out.canonical.size() == source.canonical.size() + donor.canonical.size());
}

// ---------------------------------------------------------------------------
// mutual_complete
// ---------------------------------------------------------------------------

TEST_CASE("mutual: empty vehicle side equals stage-1 only", "[bank][mutual]") {
  Rng rng(40);
  const auto a = make_object("a", BankSide::infrastructure, {4, 2, 1.6},
                             box_shell({2, 1, 0.8}, rng, 20));
  const auto b = make_object("b", BankSide::infrastructure, {4, 2, 1.6},
                             box_shell({2, 1, 0.8}, rng, 20));
  const auto merged = mutual_complete({a, b}, {});
  const auto stage1_a = complete_from_bank(a, {a, b});
  REQUIRE(merged.size() == 2);
  CHECK(merged[0].canonical.size() == stage1_a.canonical.size());
}

TEST_CASE("mutual: single identical object on each side unions", "[bank][mutual]") {
  Rng rng(41);
  const auto shell = box_shell({2, 1, 0.8}, rng);
  const auto infra = make_object("a", BankSide::infrastructure, {4, 2, 1.6}, shell);
  const auto vehicle = make_object("a", BankSide::vehicle, {4, 2, 1.6}, shell);
  const auto merged = mutual_complete({infra}, {vehicle});
  REQUIRE(merged.size() == 1);
  CHECK(merged[0].canonical.size() == 2 * shell.size());
}

TEST_CASE("mutual: complementary halves merge across views", "[bank][mutual][oracle]") {
  Rng rng(42);
  const Eigen::Vector3d half(2, 1, 0.8);
  const auto full = box_shell(half, rng);
  std::vector<Point3> front, rear;
  for (const Point3& p : full) (p.x() >= 0 ? front : rear).push_back(p);

  const auto infra = make_object("car_0", BankSide::infrastructure, 2 * half, front);
  const auto vehicle = make_object("car_0", BankSide::vehicle, 2 * half, rear);
  const auto merged = mutual_complete({infra}, {vehicle});
  REQUIRE(merged.size() == 1);

  const double merged_cd = chamfer_to(merged[0].canonical, full);
  CHECK(merged_cd < chamfer_to(front, full));   // strictly better than infra alone
  CHECK(merged_cd < chamfer_to(rear, full));    // and than the vehicle partial
  // Stage 1 alone cannot help a single-object side; stage 2 must.
  const auto stage1_only = mutual_complete({infra}, {});
  CHECK(merged_cd < chamfer_to(stage1_only[0].canonical, full));
  // Superset of the stage-1 result.
  CHECK(merged[0].canonical.size() >= stage1_only[0].canonical.size());
}

TEST_CASE("mutual: deterministic tie-break by track id", "[bank][mutual]") {
  Rng rng(43);
  const auto shell = box_shell({2, 1, 0.8}, rng, 15);
  const auto source = make_object("src", BankSide::infrastructure, {4, 2, 1.6}, shell);
  // Two identical candidates: identical disparity, lower id must win.
  const auto cand1 = make_object("z_cand", BankSide::infrastructure, {4, 2, 1.6}, shell);
  const auto cand2 = make_object("a_cand", BankSide::infrastructure, {4, 2, 1.6}, shell);
  const BankObject out1 = complete_from_bank(source, {cand1, cand2});
  const BankObject out2 = complete_from_bank(source, {cand2, cand1});
  CHECK(out1.canonical == out2.canonical);
}
