// sscpc - gradient-check drivers for every differentiable kernel.
//
// Each driver builds a toy instance (8 proxies, C=16, S=4, K=4), runs one
// forward + backward under a fixed random probe, and hands the setup to
// the finite-difference harness.

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "sscpc/model/gradcheck.hpp"
#include "sscpc/model/network.hpp"

namespace sscpc {

struct KernelCheck {
  std::string kernel;
  GradCheckReport report;
};

namespace detail {

inline Mat random_mat(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  Mat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = scale * rng.normal();
  return m;
}

inline ProxySet random_proxies(Rng& rng, int m, int dim, double coord_extent = 5.0) {
  ProxySet p;
  p.coords = random_mat(rng, m, 3, coord_extent);
  p.features = random_mat(rng, m, dim);
  return p;
}

inline LabeledCloud random_labeled_cloud(Rng& rng, std::size_t n, int classes,
                                         double extent = 5.0) {
  LabeledCloud c;
  c.labels.emplace();
  for (std::size_t i = 0; i < n; ++i) {
    c.points.emplace_back(rng.uniform(-extent, extent), rng.uniform(-extent, extent),
                          rng.uniform(-extent, extent));
    c.labels->push_back(static_cast<SemanticClass>(rng.index(classes)));
  }
  return c;
}

}  // namespace detail

inline KernelCheck check_spatial_aware_block(std::uint64_t seed,
                                             BlockMode mode = BlockMode::local_and_global) {
  Rng rng(derive_seed(seed, 11));
  constexpr int kM = 8, kC = 16;
  auto block = std::make_shared<SpatialAwareBlock>(kC, mode, 0.2, rng, 1.0);
  const ProxySet input = detail::random_proxies(rng, kM, kC);
  const Mat probe = detail::random_mat(rng, kM, kC);

  block->visit("block", [](const std::string&, Param& p) { p.grad.setZero(); });
  block->forward(input);
  block->backward(probe, nullptr, nullptr);

  GradCheckTarget target;
  target.evaluate = [block, input, probe]() {
    return block->forward(input).cwiseProduct(probe).sum();
  };
  target.visit_params = [block](const ParamVisitor& fn) { block->visit("block", fn); };
  return {"spatial_aware_block(" + std::string(to_string(mode)) + ")",
          gradcheck(target, derive_seed(seed, 12))};
}

inline KernelCheck check_proxy_generator(std::uint64_t seed) {
  Rng rng(derive_seed(seed, 21));
  constexpr int kM = 8, kC = 16, kS = 4;
  auto gen = std::make_shared<ProxyGenerator>(kC, kS, 2.0, rng, 1.0);
  const ProxySet input = detail::random_proxies(rng, kM, kC);
  const Mat probe_coords = detail::random_mat(rng, kM * kS, 3);
  const Mat probe_feats = detail::random_mat(rng, kM * kS, kC);

  gen->visit("generator", [](const std::string&, Param& p) { p.grad.setZero(); });
  gen->forward(input);
  gen->backward(probe_coords, probe_feats, nullptr);

  GradCheckTarget target;
  target.evaluate = [gen, input, probe_coords, probe_feats]() {
    const ProxySet out = gen->forward(input);
    return out.coords.cwiseProduct(probe_coords).sum() +
           out.features.cwiseProduct(probe_feats).sum();
  };
  target.visit_params = [gen](const ParamVisitor& fn) { gen->visit("generator", fn); };
  return {"proxy_generator", gradcheck(target, derive_seed(seed, 22))};
}

inline KernelCheck check_cscm(std::uint64_t seed) {
  Rng rng(derive_seed(seed, 31));
  constexpr int kM = 8, kC = 16, kS = 4, kK = 4;
  auto head = std::make_shared<Cscm>(kC, kS, kK, 1.0, rng, 1.0);
  const ProxySet input = detail::random_proxies(rng, kM, kC);
  const Mat probe_points = detail::random_mat(rng, kM * kS, 3);
  const Mat probe_logits = detail::random_mat(rng, kM * kS, kK);

  head->visit("cscm", [](const std::string&, Param& p) { p.grad.setZero(); });
  head->forward(input);
  head->backward(probe_points, probe_logits, nullptr);

  GradCheckTarget target;
  target.evaluate = [head, input, probe_points, probe_logits]() {
    const SscOutput out = head->forward(input);
    return out.points.cwiseProduct(probe_points).sum() +
           out.logits.cwiseProduct(probe_logits).sum();
  };
  target.visit_params = [head](const ParamVisitor& fn) { head->visit("cscm", fn); };
  return {"cscm", gradcheck(target, derive_seed(seed, 32))};
}

/// The loss composed with CSCM: the probe is the training objective itself,
/// including the moving nearest-neighbor CE targets.
inline KernelCheck check_loss_composition(std::uint64_t seed) {
  Rng rng(derive_seed(seed, 41));
  constexpr int kM = 8, kC = 16, kS = 4, kK = 4;
  auto head = std::make_shared<Cscm>(kC, kS, kK, 1.0, rng, 1.0);
  const ProxySet input = detail::random_proxies(rng, kM, kC);
  auto gt = std::make_shared<LabeledCloud>(detail::random_labeled_cloud(rng, 64, kK));
  ClassMap map;
  for (int k = 0; k < kK; ++k) map.to_compact[k] = k;

  auto loss = std::make_shared<SscLoss>(*gt, 1.0, map);
  head->visit("cscm", [](const std::string&, Param& p) { p.grad.setZero(); });
  const SscOutput out = head->forward(input);
  loss->forward(out);
  Mat d_points, d_logits;
  loss->backward(&d_points, &d_logits);
  head->backward(d_points, d_logits, nullptr);

  GradCheckTarget target;
  target.evaluate = [head, input, gt, map]() {
    return loss_ssc(head->forward(input), *gt, 1.0, map).total;
  };
  target.visit_params = [head](const ParamVisitor& fn) { head->visit("cscm", fn); };
  return {"loss_ssc+cscm", gradcheck(target, derive_seed(seed, 42))};
}

inline std::vector<KernelCheck> run_all_gradchecks(std::uint64_t seed) {
  return {check_spatial_aware_block(seed, BlockMode::local_and_global),
          check_spatial_aware_block(seed, BlockMode::local_only),
          check_spatial_aware_block(seed, BlockMode::global_only),
          check_proxy_generator(seed), check_cscm(seed), check_loss_composition(seed)};
}

}  // namespace sscpc
