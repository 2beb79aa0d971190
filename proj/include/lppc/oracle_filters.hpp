#pragma once

// Reference Bayes filters in natural-parameter form:
//   θ_0 = Θ_N·n_0 + θ*,   θ_{k+1} = Θ_N·n_{k+1} + h(θ_k)
// with h the exact categorical prediction, the Kalman time update, or an EKF
// time update applied to a von Mises x normal belief.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "lppc/dynamics.hpp"
#include "lppc/errors.hpp"
#include "lppc/exponential_family.hpp"
#include "lppc/poisson_population.hpp"

namespace lppc {

inline constexpr double kMinConcentration = 1e-4;
inline constexpr double kMinVariance = 1e-6;
// Stand-in variance for a Gaussian block that has seen no evidence yet.
inline constexpr double kMaxVariance = 1e6;

using BeliefTrajectory = std::vector<NaturalParams>;

inline NaturalParams discrete_predict(const MarkovChainSpec& spec, const NaturalParams& belief) {
  if (belief.family.kind != FamilyKind::Categorical || belief.family.states != spec.transition.rows())
    throw ShapeError("discrete_predict needs a categorical belief over the chain's states");
  detail::check_finite(belief.theta);
  const Vector p = categorical_probabilities(belief.theta);
  const Vector next = spec.transition.transpose() * p;
  const Eigen::Index ref = next.size() - 1;
  return {belief.family, (next.head(ref).array() / next(ref)).log().matrix()};
}

/// Flat (all-zero) beliefs stay flat; other improper beliefs are rejected.
inline NaturalParams kalman_predict(const LinearSdeSpec& spec, const NaturalParams& belief) {
  if (belief.family.kind != FamilyKind::Gaussian1D) throw ShapeError("kalman_predict needs a gaussian belief");
  detail::check_finite(belief.theta);
  if (belief.theta.isZero(0.0)) return belief;
  if (!(belief.theta(1) < 0.0)) throw PreconditionError("kalman_predict: improper belief");
  const auto [mean, var] = gaussian_moments(belief.theta(0), belief.theta(1));
  const double f = 1.0 + spec.h * spec.a;
  return {belief.family, gaussian_natural(f * mean, f * f * var + spec.h * spec.b * spec.b)};
}

/// Moment-level description of a von Mises x normal belief.
struct PhaseBelief {
  double angle_mean;
  double concentration;
  double velocity_mean;
  double velocity_variance;
};

inline PhaseBelief phase_belief(const NaturalParams& belief) {
  const Vector& t = belief.theta;
  const auto polar = von_mises_polar(t(0), t(1));
  PhaseBelief out{polar.mean, std::max(polar.concentration, kMinConcentration), 0.0, kMaxVariance};
  if (t(3) < 0.0) {
    const auto [m, var] = gaussian_moments(t(2), t(3));
    out.velocity_mean = m;
    out.velocity_variance = std::clamp(var, kMinVariance, kMaxVariance);
  }
  return out;
}

inline NaturalParams phase_natural(const PhaseBelief& b) {
  Vector t(4);
  const Eigen::Vector2d g = gaussian_natural(b.velocity_mean, b.velocity_variance);
  t << b.concentration * std::cos(b.angle_mean), b.concentration * std::sin(b.angle_mean), g(0), g(1);
  return {Family::von_mises_gaussian(), t};
}

/// Von Mises x normal -> bivariate normal with covariance diag(1/κ, σ²),
/// EKF time update, then back with κ* = 1/Σ*(1,1) and σ²* = Σ*(2,2).
inline NaturalParams ekf_pendulum_predict(const PendulumSpec& spec, const NaturalParams& belief) {
  if (belief.family.kind != FamilyKind::VonMisesGaussian)
    throw ShapeError("ekf_pendulum_predict needs a von Mises x normal belief");
  detail::check_finite(belief.theta);
  const PhaseBelief b = phase_belief(belief);

  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  cov(0, 0) = 1.0 / b.concentration;
  cov(1, 1) = b.velocity_variance;
  const Eigen::Matrix2d f = Eigen::Matrix2d::Identity() + spec.h * pendulum_drift_jacobian(spec, b.angle_mean);
  Eigen::Matrix2d noise = Eigen::Matrix2d::Zero();
  noise(1, 1) = spec.h * spec.h * spec.velocity_variance;
  const Eigen::Matrix2d predicted = f * cov * f.transpose() + noise;
  if (!(predicted(0, 0) > 0.0) || !(predicted(1, 1) > 0.0) || !predicted.allFinite())
    throw PreconditionError("EKF covariance is not positive definite");

  const Eigen::Vector2d drift = pendulum_drift(spec, b.angle_mean, b.velocity_mean);
  PhaseBelief out;
  out.angle_mean = wrap_angle(b.angle_mean + spec.h * drift(0));
  out.velocity_mean = b.velocity_mean + spec.h * drift(1);
  out.concentration = std::max(1.0 / predicted(0, 0), kMinConcentration);
  out.velocity_variance = std::clamp(predicted(1, 1), kMinVariance, kMaxVariance);
  return phase_natural(out);
}

/// The prediction map h for a given stimulus process.
inline NaturalParams predict(const StimulusProcess& process, const NaturalParams& belief) {
  return std::visit(
      [&](const auto& spec) -> NaturalParams {
        using T = std::decay_t<decltype(spec)>;
        if constexpr (std::is_same_v<T, MarkovChainSpec>) return discrete_predict(spec, belief);
        else if constexpr (std::is_same_v<T, LinearSdeSpec>) return kalman_predict(spec, belief);
        else return ekf_pendulum_predict(spec, belief);
      },
      process);
}

/// Θ_N·n + h(θ_k).
template <class Predict>
NaturalParams filter_step(const PopulationEncoding& enc, Predict&& h, const NaturalParams& belief,
                          const Response& n) {
  return response_posterior(enc, h(belief), n);
}

inline BeliefTrajectory run_oracle(const StimulusProcess& process, const PopulationEncoding& enc,
                                   const std::vector<Response>& responses, const NaturalParams& prior) {
  if (responses.empty()) throw PreconditionError("run_oracle needs at least one response");
  BeliefTrajectory beliefs;
  beliefs.reserve(responses.size());
  beliefs.push_back(response_posterior(enc, prior, responses.front()));
  auto h = [&](const NaturalParams& b) { return predict(process, b); };
  for (std::size_t k = 1; k < responses.size(); ++k)
    beliefs.push_back(filter_step(enc, h, beliefs.back(), responses[k]));
  return beliefs;
}

}  // namespace lppc
