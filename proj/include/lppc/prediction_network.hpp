#pragma once

// Three-layer perceptron g: logistic hidden layer, exponential output layer.
// y = exp(W_o·σ(W_h·z + b_h) + b_o) keeps predicted rates strictly positive.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>

#include "lppc/errors.hpp"
#include "lppc/exponential_family.hpp"

namespace lppc {

// Output pre-activations are clamped here before exponentiation.
inline constexpr double kOutputClamp = 30.0;

struct MlpParams {
  Matrix hidden_weights;  // d_H x d_Z
  Vector hidden_bias;     // d_H
  Matrix output_weights;  // d_Y x d_H
  Vector output_bias;     // d_Y

  int inputs() const { return static_cast<int>(hidden_weights.cols()); }
  int hidden() const { return static_cast<int>(hidden_weights.rows()); }
  int outputs() const { return static_cast<int>(output_weights.rows()); }

  static MlpParams zeros(int d_in, int d_hidden, int d_out) {
    return {Matrix::Zero(d_hidden, d_in), Vector::Zero(d_hidden), Matrix::Zero(d_out, d_hidden),
            Vector::Zero(d_out)};
  }

  bool same_shape(const MlpParams& o) const {
    return inputs() == o.inputs() && hidden() == o.hidden() && outputs() == o.outputs() &&
           hidden_bias.size() == o.hidden_bias.size() && output_bias.size() == o.output_bias.size();
  }

  bool all_finite() const {
    return hidden_weights.allFinite() && hidden_bias.allFinite() && output_weights.allFinite() &&
           output_bias.allFinite();
  }

  Eigen::Index parameter_count() const {
    return hidden_weights.size() + hidden_bias.size() + output_weights.size() + output_bias.size();
  }

  bool operator==(const MlpParams& o) const {
    return same_shape(o) && hidden_weights == o.hidden_weights && hidden_bias == o.hidden_bias &&
           output_weights == o.output_weights && output_bias == o.output_bias;
  }
};

/// Applies f to corresponding blocks of each parameter set.
template <class F, class... Ps>
void for_each_block(F&& f, Ps&&... ps) {
  f(ps.hidden_weights...);
  f(ps.hidden_bias...);
  f(ps.output_weights...);
  f(ps.output_bias...);
}

struct ForwardPass {
  Vector rates;   // y
  Vector hidden;  // σ(W_h·z + b_h)
  bool saturated = false;  // some output pre-activation hit the clamp
};

inline ForwardPass forward(const MlpParams& p, const Vector& z) {
  detail::require_shape(z.size() == p.inputs(), "network input length mismatch");
  ForwardPass out;
  out.hidden = (1.0 + (-(p.hidden_weights * z + p.hidden_bias).array()).exp()).inverse();
  Vector pre = p.output_weights * out.hidden + p.output_bias;
  out.saturated = (pre.array() > kOutputClamp).any();
  out.rates = pre.array().min(kOutputClamp).exp();
  return out;
}

/// ∂/∂φ (δ_y · g_φ(z)) with z held fixed.
inline MlpParams backward(const MlpParams& p, const Vector& z, const Vector& delta_y) {
  detail::require_shape(delta_y.size() == p.outputs(), "output gradient length mismatch");
  const Vector hidden = (1.0 + (-(p.hidden_weights * z + p.hidden_bias).array()).exp()).inverse();
  const Vector pre = p.output_weights * hidden + p.output_bias;
  // d exp(min(a, c)) / da vanishes above the clamp
  const Vector out_grad = (pre.array() > kOutputClamp).select(0.0, delta_y.array() * pre.array().exp());
  const Vector hidden_grad =
      ((p.output_weights.transpose() * out_grad).array() * hidden.array() * (1.0 - hidden.array())).matrix();
  return {hidden_grad * z.transpose(), hidden_grad, out_grad * hidden.transpose(), out_grad};
}

struct AdamConfig {
  double learning_rate = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  MlpParams first;
  MlpParams second;
  long step = 0;

  static AdamState fresh(const MlpParams& shape) {
    auto z = MlpParams::zeros(shape.inputs(), shape.hidden(), shape.outputs());
    return {z, z, 0};
  }
};

/// Bias-corrected Adam step applied in place.
inline void adam_update(MlpParams& p, AdamState& s, const MlpParams& grad, const AdamConfig& cfg) {
  detail::require_shape(p.same_shape(grad) && p.same_shape(s.first), "Adam shapes do not match");
  ++s.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(s.step));
  for_each_block(
      [&](auto& param, auto& m, auto& v, const auto& g) {
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseAbs2();
        param.array() -= cfg.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.epsilon);
      },
      p, s.first, s.second, grad);
}

/// Per-epoch step size 5e-5 * 1.25^-(epoch-1), epochs counted from 1.
inline double epoch_learning_rate(int epoch, double base = 5e-5, double decay = 1.25) {
  return base * std::pow(decay, -(epoch - 1));
}

/// Glorot-uniform weights, zero biases, so initial output rates are near one.
inline MlpParams init_network(int d_in, int d_hidden, int d_out, Rng& rng) {
  if (d_in <= 0 || d_hidden <= 0 || d_out <= 0) throw PreconditionError("network sizes must be positive");
  auto glorot = [&](int rows, int cols) {
    const double bound = std::sqrt(6.0 / (rows + cols));
    std::uniform_real_distribution<double> u(-bound, bound);
    Matrix w(rows, cols);
    // fill in row-major order so the draw sequence does not depend on storage order
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) w(r, c) = u(rng);
    return w;
  };
  MlpParams p = MlpParams::zeros(d_in, d_hidden, d_out);
  p.hidden_weights = glorot(d_hidden, d_in);
  p.output_weights = glorot(d_out, d_hidden);
  return p;
}

}  // namespace lppc
