#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

#include "sscpc/model/checkpoint.hpp"
#include "sscpc/model/harness.hpp"
#include "sscpc/model/network.hpp"
#include "sscpc/model/train.hpp"

using namespace sscpc;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("sscpc_model_" + std::to_string(std::mt19937_64(std::random_device{}())()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

LabeledCloud random_cloud(Rng& rng, std::size_t n, double extent = 8.0) {
  LabeledCloud c;
  for (std::size_t i = 0; i < n; ++i) {
    c.points.emplace_back(rng.uniform(-extent, extent), rng.uniform(-extent, extent),
                          rng.uniform(-extent, extent));
  }
  return c;
}

}  // namespace

// ---------------------------------------------------------------------------
// Shape chain
// ---------------------------------------------------------------------------

TEST_CASE("config: reference shape chain", "[model][config]") {
  const ShapeChain chain = forward_shapes(ModelConfig::reference_defaults());
  CHECK(chain.n_input == 26624);
  CHECK(chain.proxies == 832);
  CHECK(chain.coarse == 13312);
  CHECK(chain.final_points == 212992);
}

TEST_CASE("config: proxy count arithmetic contract", "[model][config]") {
  ModelConfig cfg = ModelConfig::toy_defaults();
  cfg.n_input = 256;
  cfg.downsample = {4, 4, 2};
  CHECK(forward_shapes(cfg).proxies == 8);  // 256 / (4*4*2)
  cfg.n_input = 100;  // not divisible
  CHECK_THROWS(forward_shapes(cfg));
}

// ---------------------------------------------------------------------------
// Proxy extraction
// ---------------------------------------------------------------------------

TEST_CASE("extract_proxies: counts and coordinate subset", "[model][extract]") {
  ModelConfig cfg = ModelConfig::toy_defaults();
  cfg.n_input = 256;
  SscModel model(cfg);
  Rng rng(5);
  const LabeledCloud cloud = random_cloud(rng, 900);
  const ProxySet proxies = model.extract_proxies(cloud);
  CHECK(proxies.coords.rows() == 8);
  CHECK(proxies.features.cols() == cfg.feature_dim);

  // Proxy coordinates are selected input points.
  for (Eigen::Index j = 0; j < proxies.coords.rows(); ++j) {
    bool found = false;
    for (const Point3& p : cloud.points) {
      if (p.x() == proxies.coords(j, 0) && p.y() == proxies.coords(j, 1) &&
          p.z() == proxies.coords(j, 2)) {
        found = true;
        break;
      }
    }
    CHECK(found);
  }
}

TEST_CASE("extract_proxies: pads short clouds, rejects empty", "[model][extract]") {
  ModelConfig cfg = ModelConfig::toy_defaults();
  cfg.n_input = 64;
  SscModel model(cfg);
  Rng rng(6);
  const LabeledCloud small = random_cloud(rng, 10);  // < n_input, padded
  const ProxySet proxies = model.extract_proxies(small);
  CHECK(proxies.coords.rows() == 2);

  LabeledCloud far;  // everything outside the toy crop
  far.points.emplace_back(1e4, 1e4, 1e4);
  CHECK_THROWS_WITH(model.extract_proxies(far),
                    Catch::Matchers::ContainsSubstring("no points after crop"));
}

TEST_CASE("extract_proxies: deterministic per seed", "[model][extract]") {
  ModelConfig cfg = ModelConfig::toy_defaults();
  cfg.n_input = 128;
  Rng rng(7);
  const LabeledCloud cloud = random_cloud(rng, 500);
  SscModel a(cfg), b(cfg);
  const ProxySet pa = a.extract_proxies(cloud);
  const ProxySet pb = b.extract_proxies(cloud);
  CHECK(pa.coords == pb.coords);
  CHECK(pa.features == pb.features);
}

// ---------------------------------------------------------------------------
// Spatial-aware block
// ---------------------------------------------------------------------------

TEST_CASE("block: single token makes attention the value row", "[model][block]") {
  Rng rng(8);
  SpatialAwareBlock block(16, BlockMode::local_and_global, 0.2, rng);
  ProxySet one;
  one.coords = Mat::Random(1, 3);
  one.features = Mat::Random(1, 16);
  block.forward(one);
  CHECK(block.last_attention_weights()(0, 0) == 1.0);
  // Attn == V: with one key the softmax is exactly 1.
  CHECK(block.last_attention().rows() == 1);
}

TEST_CASE("block: softmax rows sum to one", "[model][block]") {
  Rng rng(9);
  SpatialAwareBlock block(16, BlockMode::local_and_global, 0.2, rng);
  ProxySet p;
  p.coords = 5.0 * Mat::Random(12, 3);
  p.features = Mat::Random(12, 16);
  block.forward(p);
  const Mat& w = block.last_attention_weights();
  for (Eigen::Index r = 0; r < w.rows(); ++r) {
    CHECK(std::abs(w.row(r).sum() - 1.0) < 1e-12);
    CHECK(w.row(r).minCoeff() >= 0.0);
  }
}

TEST_CASE("block: attention rows stay in the convex hull of V", "[model][block][property]") {
  Rng rng(10);
  SpatialAwareBlock block(16, BlockMode::local_and_global, 0.2, rng);
  ProxySet p;
  p.coords = 5.0 * Mat::Random(10, 3);
  p.features = 2.0 * Mat::Random(10, 16);
  block.forward(p);
  const Mat& attn = block.last_attention();
  const Mat& v = block.last_values();
  for (Eigen::Index c = 0; c < attn.cols(); ++c) {
    const double lo = v.col(c).minCoeff(), hi = v.col(c).maxCoeff();
    for (Eigen::Index r = 0; r < attn.rows(); ++r) {
      CHECK(attn(r, c) >= lo - 1e-12);
      CHECK(attn(r, c) <= hi + 1e-12);
    }
  }
}

TEST_CASE("block: permutation equivariance", "[model][block][oracle]") {
  Rng rng(11);
  SpatialAwareBlock block(16, BlockMode::local_and_global, 0.2, rng);
  ProxySet p;
  p.coords = 5.0 * Mat::Random(8, 3);
  p.features = Mat::Random(8, 16);
  const Mat out = block.forward(p);

  // Reverse the row order.
  ProxySet q;
  q.coords = p.coords.colwise().reverse();
  q.features = p.features.colwise().reverse();
  const Mat out_rev = block.forward(q);
  CHECK((out_rev - out.colwise().reverse()).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("block: equal rows freeze the softmax to uniform", "[model][block]") {
  Rng rng(12);
  SpatialAwareBlock block(16, BlockMode::local_and_global, 0.2, rng);
  ProxySet p;
  p.coords = Mat::Ones(6, 3);
  p.features = Mat::Ones(6, 16) * 0.5;
  block.forward(p);
  const Mat& w = block.last_attention_weights();
  for (Eigen::Index r = 0; r < w.rows(); ++r) {
    for (Eigen::Index c = 0; c < w.cols(); ++c) {
      CHECK(w(r, c) == Catch::Approx(1.0 / 6).margin(1e-12));
    }
  }
  // All attention rows coincide (same convex combination of equal rows).
  const Mat& attn = block.last_attention();
  for (Eigen::Index r = 1; r < attn.rows(); ++r) {
    CHECK((attn.row(r) - attn.row(0)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

// ---------------------------------------------------------------------------
// Generation heads
// ---------------------------------------------------------------------------

TEST_CASE("proxy_generator: counts and offset bound", "[model][generator]") {
  Rng rng(13);
  ProxyGenerator gen(16, 4, 2.0, rng);
  ProxySet parents;
  parents.coords = 5.0 * Mat::Random(8, 3);
  parents.features = Mat::Random(8, 16);
  const ProxySet out = gen.forward(parents);
  REQUIRE(out.coords.rows() == 32);
  REQUIRE(out.features.rows() == 32);
  for (Eigen::Index p = 0; p < 8; ++p) {
    for (int s = 0; s < 4; ++s) {
      const Eigen::RowVector3d delta = out.coords.row(4 * p + s) - parents.coords.row(p);
      CHECK(delta.cwiseAbs().maxCoeff() <= 2.0);  // tanh bound
    }
  }
}

TEST_CASE("proxy_generator: zeroed offset head collapses children onto parents",
          "[model][generator]") {
  Rng rng(14);
  ProxyGenerator gen(16, 4, 2.0, rng);
  gen.visit("g", [](const std::string& name, Param& p) {
    if (name.find("offset") != std::string::npos) p.value.setZero();
  });
  ProxySet parents;
  parents.coords = 5.0 * Mat::Random(8, 3);
  parents.features = Mat::Random(8, 16);
  const ProxySet out = gen.forward(parents);
  for (Eigen::Index p = 0; p < 8; ++p) {
    for (int s = 0; s < 4; ++s) {
      CHECK((out.coords.row(4 * p + s) - parents.coords.row(p)).cwiseAbs().maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("cscm: shapes and zero-offset identity", "[model][cscm]") {
  Rng rng(15);
  Cscm head(16, 4, 17, 1.0, rng);
  ProxySet parents;
  parents.coords = 5.0 * Mat::Random(8, 3);
  parents.features = Mat::Random(8, 16);
  const SscOutput out = head.forward(parents);
  CHECK(out.points.rows() == 32);
  CHECK(out.logits.rows() == 32);
  CHECK(out.logits.cols() == 17);  // 16 classes + unlabeled

  Cscm zeroed(16, 4, 17, 1.0, rng);
  zeroed.visit("c", [](const std::string& name, Param& p) {
    if (name.find("rebuild") != std::string::npos) p.value.setZero();
  });
  const SscOutput out0 = zeroed.forward(parents);
  for (Eigen::Index p = 0; p < 8; ++p) {
    for (int s = 0; s < 4; ++s) {
      CHECK((out0.points.row(4 * p + s) - parents.coords.row(p)).cwiseAbs().maxCoeff() == 0.0);
    }
  }
}

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

TEST_CASE("loss: perfect prediction", "[model][loss]") {
  Rng rng(16);
  LabeledCloud gt;
  gt.labels.emplace();
  for (int i = 0; i < 40; ++i) {
    gt.points.emplace_back(rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3));
    gt.labels->push_back(static_cast<SemanticClass>(rng.index(4)));
  }
  SscOutput out;
  out.points.resize(40, 3);
  out.logits = Mat::Zero(40, 17);
  for (int i = 0; i < 40; ++i) {
    out.points.row(i) << gt.points[i].x(), gt.points[i].y(), gt.points[i].z();
    out.logits(i, static_cast<int>((*gt.labels)[i])) = 20.0;  // strongly peaked
  }
  const LossBreakdown lb = loss_ssc(out, gt, 1.0);
  CHECK(lb.l_cd == 0.0);
  CHECK(lb.l_ce < 0.01);
}

TEST_CASE("loss: lambda zero leaves only Chamfer", "[model][loss]") {
  Rng rng(17);
  LabeledCloud gt;
  gt.labels.emplace();
  for (int i = 0; i < 30; ++i) {
    gt.points.emplace_back(rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3));
    gt.labels->push_back(SemanticClass::road);
  }
  SscOutput out;
  out.points = 3.0 * Mat::Random(25, 3);
  out.logits = Mat::Random(25, 17);
  const LossBreakdown lb = loss_ssc(out, gt, 0.0);
  CHECK(lb.total == lb.l_cd);
}

TEST_CASE("loss: hand-computed cross entropy", "[model][loss][oracle]") {
  // Two classes, logits (ln 3, 0), target class 0:
  // softmax = (3/4, 1/4), CE = -ln(3/4) = ln(4/3).
  LabeledCloud gt;
  gt.points = {Point3(0, 0, 0)};
  gt.labels = std::vector<SemanticClass>{SemanticClass::building};  // id 0
  SscOutput out;
  out.points = Mat::Zero(1, 3);
  out.logits.resize(1, 2);
  out.logits << std::log(3.0), 0.0;
  ClassMap map;
  map.to_compact.fill(-1);
  map.to_compact[0] = 0;
  map.to_compact[1] = 1;
  const LossBreakdown lb = loss_ssc(out, gt, 1.0, map);
  CHECK(lb.l_cd == 0.0);
  CHECK(lb.l_ce == Catch::Approx(std::log(4.0 / 3.0)).epsilon(1e-12));
}

// ---------------------------------------------------------------------------
// Gradient checks
// ---------------------------------------------------------------------------

TEST_CASE("gradcheck: every kernel under 1e-4", "[model][gradcheck][oracle]") {
  for (const auto& check : run_all_gradchecks(1)) {
    INFO(check.kernel << " max rel err " << check.report.max_rel_err << " at "
                      << check.report.worst_param);
    CHECK(check.report.max_rel_err < 1e-4);
    CHECK(check.report.coords_checked >= 200);
  }
}

TEST_CASE("gradcheck: exactly linear probe matches to 1e-9", "[model][gradcheck]") {
  Rng rng(18);
  auto layer = std::make_shared<Linear>(6, 5, true, rng, 1.0);
  const Mat x = Mat::Random(7, 6);
  const Mat probe = Mat::Random(7, 5);

  layer->visit("lin", [](const std::string&, Param& p) { p.grad.setZero(); });
  layer->forward(x);
  layer->backward(probe);

  GradCheckTarget target;
  target.evaluate = [layer, x, probe]() { return layer->forward(x).cwiseProduct(probe).sum(); };
  target.visit_params = [layer](const ParamVisitor& fn) { layer->visit("lin", fn); };
  // A linear probe is exact under central differences at any step; the
  // large step keeps roundoff out of the comparison.
  const GradCheckReport report = gradcheck(target, 99, 35, 1e-2);
  CHECK(report.max_rel_err < 1e-9);
}

TEST_CASE("gradcheck: frozen softmax kills the query/key gradients", "[model][gradcheck]") {
  Rng rng(19);
  auto block = std::make_shared<SpatialAwareBlock>(8, BlockMode::local_and_global, 0.2, rng);
  ProxySet p;
  p.coords = Mat::Ones(5, 3);          // identical rows: softmax stays uniform
  p.features = Mat::Ones(5, 8) * 0.3;  // under any parameter perturbation
  const Mat probe = Mat::Random(5, 8);

  block->visit("block", [](const std::string&, Param& fp) { fp.grad.setZero(); });
  block->forward(p);
  block->backward(probe, nullptr, nullptr);

  // Perturbing W_Q/W_K cannot change a uniform softmax over equal rows.
  block->visit("block", [&](const std::string& name, Param& fp) {
    if (name.find(".wq") != std::string::npos || name.find(".wk") != std::string::npos) {
      CHECK(fp.grad.cwiseAbs().maxCoeff() < 1e-12);
    }
  });
}

// ---------------------------------------------------------------------------
// End-to-end training machinery
// ---------------------------------------------------------------------------

TEST_CASE("model: forward shapes and finite backward", "[model][network]") {
  ModelConfig cfg = ModelConfig::toy_defaults();
  cfg.n_input = 128;
  SscModel model(cfg);
  Rng rng(20);
  const LabeledCloud cloud = random_cloud(rng, 600, 5.0);
  const SscOutput out = model.forward(cloud);
  CHECK(out.points.rows() == forward_shapes(cfg).final_points);
  CHECK(out.logits.cols() == cfg.class_count);

  model.zero_grad();
  model.backward(Mat::Ones(out.points.rows(), 3), Mat::Ones(out.logits.rows(), cfg.class_count));
  model.visit([](const std::string&, Param& p) { REQUIRE(p.grad.allFinite()); });
}

TEST_CASE("train: loss decreases and reruns are identical", "[model][train]") {
  TempDir dir;
  const ToyScene scene = make_toy_scene(11, dir.path);
  ModelConfig cfg = ModelConfig::toy_defaults();
  cfg.class_count = scene.class_count;
  cfg.seed = 11;

  SscModel model_a(cfg);
  const TrainResult a = train_toy(model_a, scene.input_world, scene.ground_truth, 60,
                                  scene.class_map);
  CHECK(a.final_total() < a.initial_total());

  SscModel model_b(cfg);
  const TrainResult b = train_toy(model_b, scene.input_world, scene.ground_truth, 60,
                                  scene.class_map);
  REQUIRE(a.curve.size() == b.curve.size());
  for (std::size_t i = 0; i < a.curve.size(); ++i) {
    CHECK(a.curve[i].total == b.curve[i].total);
  }
}

TEST_CASE("checkpoint: round trip restores the exact forward", "[model][checkpoint]") {
  TempDir dir;
  ModelConfig cfg = ModelConfig::toy_defaults();
  cfg.n_input = 128;
  SscModel model(cfg);
  Rng rng(21);
  const LabeledCloud cloud = random_cloud(rng, 400, 5.0);
  const SscOutput before = model.forward(cloud);

  const fs::path path = dir.path / "model.ckpt";
  save_checkpoint(model, path);

  // Same config (the extraction seed is configuration, not weights), but
  // scrambled parameters; the checkpoint must restore them exactly.
  SscModel restored(cfg);
  Rng scramble(12345);
  restored.visit([&](const std::string&, Param& p) {
    for (Eigen::Index r = 0; r < p.value.rows(); ++r)
      for (Eigen::Index c = 0; c < p.value.cols(); ++c) p.value(r, c) += scramble.normal();
  });
  load_checkpoint(restored, path);
  const SscOutput after = restored.forward(cloud);
  CHECK((after.points - before.points).cwiseAbs().maxCoeff() == 0.0);
  CHECK((after.logits - before.logits).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("checkpoint: shape mismatch rejected", "[model][checkpoint]") {
  TempDir dir;
  ModelConfig cfg = ModelConfig::toy_defaults();
  SscModel model(cfg);
  const fs::path path = dir.path / "model.ckpt";
  save_checkpoint(model, path);

  ModelConfig other = cfg;
  other.feature_dim = 8;
  SscModel smaller(other);
  CHECK_THROWS_WITH(load_checkpoint(smaller, path),
                    Catch::Matchers::ContainsSubstring("shape mismatch"));
}
