#pragma once

// Stimulus processes (three-state Markov chain, discretized linear SDE,
// stochastic pendulum) and joint stimulus/response trajectory generation.

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <variant>
#include <vector>

#include "lppc/errors.hpp"
#include "lppc/exponential_family.hpp"
#include "lppc/poisson_population.hpp"

namespace lppc {

/// transition(i, j) = P(next = j | current = i).
struct MarkovChainSpec {
  Matrix transition;
};

/// dX = a X dt + b dW, discretized with step h.
struct LinearSdeSpec {
  double a = -1.0;
  double b = 1.0;
  double h = 0.02;
};

/// Drift (q̇, -g sin q - c q̇); noise covariance h^2 * diag(0, velocity_variance).
struct PendulumSpec {
  double gravity = 9.81;
  double friction = 0.1;
  double velocity_variance = 1.0;
  double h = 0.02;
};

using StimulusProcess = std::variant<MarkovChainSpec, LinearSdeSpec, PendulumSpec>;

/// Red, green, blue; red and blue are sticky, green is transitory.
inline MarkovChainSpec colour_chain() {
  Matrix t(3, 3);
  t << 0.80, 0.15, 0.05,
       0.25, 0.50, 0.25,
       0.05, 0.15, 0.80;
  return {t};
}

inline void validate(const MarkovChainSpec& spec) {
  const Matrix& t = spec.transition;
  if (t.rows() != t.cols() || t.rows() == 0) throw ShapeError("transition matrix must be square");
  if ((t.array() < 0.0).any() || (t.array() > 1.0).any())
    throw PreconditionError("transition entries must lie in [0, 1]");
  if (((t.rowwise().sum().array() - 1.0).abs() > 1e-12).any())
    throw PreconditionError("transition rows must sum to 1");
}

inline int step_markov(const MarkovChainSpec& spec, int state, Rng& rng) {
  const auto row = spec.transition.row(state);
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double cdf = 0.0;
  for (Eigen::Index j = 0; j < row.size(); ++j) {
    cdf += row(j);
    if (u < cdf) return static_cast<int>(j);
  }
  for (Eigen::Index j = row.size() - 1; j >= 0; --j)
    if (row(j) > 0.0) return static_cast<int>(j);
  return state;
}

/// Draw from Normal(x + h a x, h b^2).
inline double step_linear(const LinearSdeSpec& spec, double x, Rng& rng) {
  const double mean = x + spec.h * spec.a * x;
  if (spec.b == 0.0) return mean;
  return mean + std::sqrt(spec.h) * std::abs(spec.b) * std::normal_distribution<double>(0.0, 1.0)(rng);
}

inline Eigen::Vector2d pendulum_drift(const PendulumSpec& spec, double q, double qdot) {
  return {qdot, -spec.gravity * std::sin(q) - spec.friction * qdot};
}

/// Jacobian of the drift at (q, q̇).
inline Eigen::Matrix2d pendulum_drift_jacobian(const PendulumSpec& spec, double q) {
  Eigen::Matrix2d j;
  j << 0.0, 1.0, -spec.gravity * std::cos(q), -spec.friction;
  return j;
}

/// Euler step; noise enters only the velocity with variance h^2 σ².
inline Stimulus step_pendulum(const PendulumSpec& spec, const Stimulus& s, Rng& rng) {
  const Eigen::Vector2d drift = pendulum_drift(spec, s.x, s.v);
  double v = s.v + spec.h * drift(1);
  if (spec.velocity_variance > 0.0)
    v += spec.h * std::sqrt(spec.velocity_variance) * std::normal_distribution<double>(0.0, 1.0)(rng);
  return Stimulus::phase(wrap_angle(s.x + spec.h * drift(0)), v);
}

inline Stimulus step(const StimulusProcess& process, const Stimulus& s, Rng& rng) {
  return std::visit(
      [&](const auto& spec) -> Stimulus {
        using T = std::decay_t<decltype(spec)>;
        if constexpr (std::is_same_v<T, MarkovChainSpec>)
          return Stimulus::state(step_markov(spec, s.state_index(), rng));
        else if constexpr (std::is_same_v<T, LinearSdeSpec>)
          return Stimulus::scalar(step_linear(spec, s.x, rng));
        else return step_pendulum(spec, s, rng);
      },
      process);
}

struct Trajectory {
  std::vector<Stimulus> stimuli;
  std::vector<Response> responses;

  std::size_t size() const { return stimuli.size(); }
};

/// Steps the process from x0, then draws each response from the new stimulus.
inline Trajectory simulate(const StimulusProcess& process, const PopulationEncoding& enc,
                           const Stimulus& x0, int steps, Rng& rng) {
  if (steps < 1) throw PreconditionError("simulate needs at least one step");
  Trajectory out;
  out.stimuli.reserve(steps);
  out.responses.reserve(steps);
  Stimulus x = x0;
  for (int k = 0; k < steps; ++k) {
    x = step(process, x, rng);
    out.stimuli.push_back(x);
    out.responses.push_back(sample_response(enc.rates(x), rng));
  }
  return out;
}

}  // namespace lppc
