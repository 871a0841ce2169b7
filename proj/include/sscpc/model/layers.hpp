// sscpc - differentiable building blocks.
//
// Dense layers with hand-written backward passes. Every layer caches its
// forward inputs and accumulates parameter gradients on backward; gradients
// are certified against central finite differences by the gradcheck
// harness. Single-threaded per instance (forward and backward are a
// matched pair).

#pragma once

#include <Eigen/Core>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

#include "sscpc/core/rng.hpp"

namespace sscpc {

using Mat = Eigen::MatrixXd;

struct Param {
  Mat value;
  Mat grad;

  void init(int rows, int cols, Rng& rng, double stddev) {
    value.resize(rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) value(r, c) = rng.normal(0.0, stddev);
    grad = Mat::Zero(rows, cols);
  }

  void init_zero(int rows, int cols) {
    value = Mat::Zero(rows, cols);
    grad = Mat::Zero(rows, cols);
  }
};

/// Visits every named parameter of a module; the registration order is the
/// checkpoint order.
using ParamVisitor = std::function<void(const std::string&, Param&)>;

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

inline double gelu_grad(double x) {
  constexpr double kInvSqrt2Pi = 0.3989422804014327;
  return 0.5 * (1.0 + std::erf(x * M_SQRT1_2)) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

class Gelu {
 public:
  Mat forward(const Mat& x) {
    x_ = x;
    return x.unaryExpr([](double v) { return gelu(v); });
  }
  Mat backward(const Mat& dy) const {
    return dy.cwiseProduct(x_.unaryExpr([](double v) { return gelu_grad(v); }));
  }

 private:
  Mat x_;
};

// ---------------------------------------------------------------------------
// Linear
// ---------------------------------------------------------------------------

class Linear {
 public:
  Linear() = default;

  /// Weights ~ N(0, gain/sqrt(fan_in)); bias starts at zero.
  Linear(int in, int out, bool with_bias, Rng& rng, double gain = 1.0) : has_bias_(with_bias) {
    w_.init(in, out, rng, gain / std::sqrt(static_cast<double>(in)));
    if (with_bias) b_.init_zero(1, out);
  }

  Mat forward(const Mat& x) {
    x_ = x;
    Mat y = x * w_.value;
    if (has_bias_) y.rowwise() += b_.value.row(0);
    return y;
  }

  Mat backward(const Mat& dy) {
    w_.grad.noalias() += x_.transpose() * dy;
    if (has_bias_) b_.grad.row(0) += dy.colwise().sum();
    return dy * w_.value.transpose();
  }

  void visit(const std::string& prefix, const ParamVisitor& fn) {
    fn(prefix + ".w", w_);
    if (has_bias_) fn(prefix + ".b", b_);
  }

  int in_dim() const { return static_cast<int>(w_.value.rows()); }
  int out_dim() const { return static_cast<int>(w_.value.cols()); }
  Param& weights() { return w_; }
  Param& bias() { return b_; }

 private:
  Param w_, b_;
  bool has_bias_ = false;
  Mat x_;
};

// ---------------------------------------------------------------------------
// Two-layer MLP: Linear -> GELU -> Linear
// ---------------------------------------------------------------------------

class Mlp {
 public:
  Mlp() = default;
  Mlp(int in, int hidden, int out, Rng& rng, double gain = 1.0)
      : l1_(in, hidden, true, rng, gain), l2_(hidden, out, true, rng, gain) {}

  Mat forward(const Mat& x) { return l2_.forward(act_.forward(l1_.forward(x))); }
  Mat backward(const Mat& dy) { return l1_.backward(act_.backward(l2_.backward(dy))); }

  void visit(const std::string& prefix, const ParamVisitor& fn) {
    l1_.visit(prefix + ".fc1", fn);
    l2_.visit(prefix + ".fc2", fn);
  }

  Linear& fc1() { return l1_; }
  Linear& fc2() { return l2_; }

 private:
  Linear l1_, l2_;
  Gelu act_;
};

// ---------------------------------------------------------------------------
// Bounded offset head: scale * tanh(x)
// ---------------------------------------------------------------------------

class ScaledTanh {
 public:
  explicit ScaledTanh(double scale = 1.0) : scale_(scale) {}

  Mat forward(const Mat& x) {
    t_ = x.unaryExpr([](double v) { return std::tanh(v); });
    return scale_ * t_;
  }
  Mat backward(const Mat& dy) const {
    return scale_ * dy.cwiseProduct(t_.unaryExpr([](double v) { return 1.0 - v * v; }));
  }
  double scale() const { return scale_; }

 private:
  double scale_;
  Mat t_;  // tanh(x) cache
};

// ---------------------------------------------------------------------------
// Softmax over rows (attention weights)
// ---------------------------------------------------------------------------

inline Mat softmax_rows(const Mat& x) {
  Mat out(x.rows(), x.cols());
  for (int r = 0; r < x.rows(); ++r) {
    const double m = x.row(r).maxCoeff();
    Eigen::RowVectorXd e = (x.row(r).array() - m).exp();
    out.row(r) = e / e.sum();
  }
  return out;
}

/// d(softmax)/dx given the softmax output p and upstream dp, row-wise.
inline Mat softmax_rows_backward(const Mat& p, const Mat& dp) {
  Mat dx(p.rows(), p.cols());
  for (int r = 0; r < p.rows(); ++r) {
    const double dot = p.row(r).dot(dp.row(r));
    dx.row(r) = p.row(r).cwiseProduct((dp.row(r).array() - dot).matrix());
  }
  return dx;
}

}  // namespace sscpc
