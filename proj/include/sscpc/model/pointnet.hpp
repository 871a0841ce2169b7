// sscpc - proxy extraction by cascaded set abstraction.
//
// Three stages with the configured downsampling ratios. Each stage selects
// centroids by farthest point sampling, gathers the k nearest input points
// per centroid, pushes [neighbor - centroid, neighbor features] through a
// shared two-layer map and max-reduces over the neighborhood. Selection is
// discrete (no gradient); feature paths are fully differentiable through
// the max winners.

#pragma once

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "sscpc/core/cloud_ops.hpp"
#include "sscpc/core/rng.hpp"
#include "sscpc/core/types.hpp"
#include "sscpc/model/blocks.hpp"
#include "sscpc/model/config.hpp"
#include "sscpc/model/layers.hpp"

namespace sscpc {

namespace detail {

/// Indices of the k nearest points to `center` (brute force; stage sizes
/// are small). Ties resolve to the lowest index.
inline std::vector<int> knn_indices(const Mat& coords, const Eigen::RowVector3d& center, int k) {
  const int n = static_cast<int>(coords.rows());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> d2(n);
  for (int i = 0; i < n; ++i) d2[i] = (coords.row(i) - center).squaredNorm();
  const int kk = std::min(k, n);
  std::partial_sort(order.begin(), order.begin() + kk, order.end(), [&](int a, int b) {
    return d2[a] != d2[b] ? d2[a] < d2[b] : a < b;
  });
  order.resize(kk);
  return order;
}

}  // namespace detail

class SetAbstraction {
 public:
  SetAbstraction() = default;
  SetAbstraction(int ratio, int k, int in_dim, int out_dim, Rng& rng, double gain = 1.0)
      : ratio_(ratio), k_(k), in_dim_(in_dim),
        mlp_(3 + in_dim, out_dim, out_dim, rng, gain) {}

  /// in.features may have zero columns (first stage: geometry only).
  ProxySet forward(const ProxySet& in, std::uint64_t fps_seed) {
    const int n = static_cast<int>(in.coords.rows());
    if (n % ratio_ != 0) throw std::runtime_error("set abstraction: size not divisible by ratio");
    const int m = n / ratio_;

    LabeledCloud as_cloud;
    as_cloud.points.reserve(n);
    for (int i = 0; i < n; ++i) {
      as_cloud.points.emplace_back(in.coords(i, 0), in.coords(i, 1), in.coords(i, 2));
    }
    centroid_idx_ = farthest_point_sample(as_cloud, m, fps_seed);

    in_coords_ = in.coords;
    in_features_ = in.features;
    neighbor_idx_.assign(m, {});
    local_in_.assign(m, Mat());
    hidden_winner_.assign(m, {});

    ProxySet out;
    out.coords.resize(m, 3);
    out.features.resize(m, mlp_.fc2().out_dim());
    for (int j = 0; j < m; ++j) {
      const Eigen::RowVector3d center = in.coords.row(static_cast<int>(centroid_idx_[j]));
      out.coords.row(j) = center;
      neighbor_idx_[j] = detail::knn_indices(in.coords, center, k_);
      const int kk = static_cast<int>(neighbor_idx_[j].size());

      Mat local(kk, 3 + in_dim_);
      for (int t = 0; t < kk; ++t) {
        local.row(t).head(3) = in.coords.row(neighbor_idx_[j][t]) - center;
        if (in_dim_ > 0) local.row(t).tail(in_dim_) = in.features.row(neighbor_idx_[j][t]);
      }
      local_in_[j] = local;
      const Mat mapped = mlp_.forward(local);  // kk x out_dim

      hidden_winner_[j].resize(mapped.cols());
      for (int c = 0; c < mapped.cols(); ++c) {
        Eigen::Index row = 0;
        out.features(j, c) = mapped.col(c).maxCoeff(&row);
        hidden_winner_[j][c] = static_cast<int>(row);
      }
    }
    return out;
  }

  /// Returns the gradient w.r.t. the stage input features (empty when the
  /// stage consumed geometry only). Input coordinates are data, not
  /// parameters; their gradient is not propagated.
  Mat backward(const Mat& d_features) {
    Mat d_in = Mat::Zero(in_features_.rows(), in_features_.cols());
    const int m = static_cast<int>(d_features.rows());
    for (int j = 0; j < m; ++j) {
      const int kk = static_cast<int>(neighbor_idx_[j].size());
      Mat d_mapped = Mat::Zero(kk, d_features.cols());
      for (int c = 0; c < d_features.cols(); ++c) {
        d_mapped(hidden_winner_[j][c], c) = d_features(j, c);
      }
      // Re-run the shared map on this neighborhood so the layer caches
      // match before its backward.
      mlp_.forward(local_in_[j]);
      const Mat d_local = mlp_.backward(d_mapped);
      if (in_dim_ > 0) {
        for (int t = 0; t < kk; ++t) {
          d_in.row(neighbor_idx_[j][t]) += d_local.row(t).tail(in_dim_);
        }
      }
    }
    return d_in;
  }

  const std::vector<std::size_t>& centroid_indices() const { return centroid_idx_; }

  void visit(const std::string& prefix, const ParamVisitor& fn) { mlp_.visit(prefix, fn); }

 private:
  int ratio_ = 1;
  int k_ = 16;
  int in_dim_ = 0;
  Mlp mlp_;

  // forward caches
  Mat in_coords_, in_features_;
  std::vector<std::size_t> centroid_idx_;
  std::vector<std::vector<int>> neighbor_idx_;
  std::vector<Mat> local_in_;
  std::vector<std::vector<int>> hidden_winner_;
};

class ProxyExtractor {
 public:
  ProxyExtractor() = default;
  ProxyExtractor(const ModelConfig& cfg, Rng& rng)
      : cfg_(cfg),
        stage1_(cfg.downsample[0], cfg.knn, 0, cfg.feature_dim, rng, cfg.init_gain),
        stage2_(cfg.downsample[1], cfg.knn, cfg.feature_dim, cfg.feature_dim, rng, cfg.init_gain),
        stage3_(cfg.downsample[2], cfg.knn, cfg.feature_dim, cfg.feature_dim, rng, cfg.init_gain) {}

  /// Crops, resamples to exactly n_input points (pad with replacement when
  /// short), and runs the three cascaded stages. Deterministic per config
  /// seed.
  ProxySet extract(const LabeledCloud& cloud) {
    const LabeledCloud cropped = crop_range(cloud, cfg_.crop);
    if (cropped.empty()) throw std::runtime_error("extract_proxies: no points after crop");

    Rng rng(derive_seed(cfg_.seed, 101));
    std::vector<std::size_t> pick;
    pick.reserve(cfg_.n_input);
    const std::size_t n = cropped.size();
    if (n >= static_cast<std::size_t>(cfg_.n_input)) {
      // Random sample without replacement (partial Fisher-Yates).
      std::vector<std::size_t> order(n);
      std::iota(order.begin(), order.end(), std::size_t{0});
      for (int i = 0; i < cfg_.n_input; ++i) {
        std::swap(order[i], order[i + rng.index(n - i)]);
        pick.push_back(order[i]);
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) pick.push_back(i);
      while (pick.size() < static_cast<std::size_t>(cfg_.n_input)) pick.push_back(rng.index(n));
    }

    ProxySet in;
    in.coords.resize(cfg_.n_input, 3);
    in.features.resize(cfg_.n_input, 0);
    for (int i = 0; i < cfg_.n_input; ++i) {
      const Point3& p = cropped.points[pick[i]];
      in.coords.row(i) << p.x(), p.y(), p.z();
    }

    ProxySet s1 = stage1_.forward(in, derive_seed(cfg_.seed, 102));
    ProxySet s2 = stage2_.forward(s1, derive_seed(cfg_.seed, 103));
    return stage3_.forward(s2, derive_seed(cfg_.seed, 104));
  }

  void backward(const Mat& d_proxy_features) {
    stage1_.backward(stage2_.backward(stage3_.backward(d_proxy_features)));
  }

  void visit(const std::string& prefix, const ParamVisitor& fn) {
    stage1_.visit(prefix + ".sa1", fn);
    stage2_.visit(prefix + ".sa2", fn);
    stage3_.visit(prefix + ".sa3", fn);
  }

 private:
  ModelConfig cfg_;
  SetAbstraction stage1_, stage2_, stage3_;
};

}  // namespace sscpc
