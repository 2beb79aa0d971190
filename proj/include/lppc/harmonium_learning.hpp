#pragma once

// Learning signals for the prediction network. Under the conditional harmonium
//   q(x, n | y) ∝ exp(s(x)·Θ_N·n + s(x)·Θ_Y·y + n·θ_N) / Π n_i!
// the one-step gradient of -log q(n_k | y_k) with respect to y_k is -delta with
//   delta = (E[s(X) | n_k, y_k] - E[s(X) | y_k]) · Θ_Y.
// The first expectation is exact; the second is approximated either by the
// exponential-family identity τ(θ_X) (EF) or by a short Gibbs chain (CD).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

#include "lppc/circuit_codes.hpp"
#include "lppc/errors.hpp"
#include "lppc/exponential_family.hpp"
#include "lppc/poisson_population.hpp"

namespace lppc {

// Variance-type natural parameter assigned to improper predictions.
inline constexpr double kImproperFloor = -1e-3;

enum class ImproperPolicy { Reject, Regularize };

struct GradientSignal {
  Vector delta;            // length d_Y
  Vector posterior_mean;   // τ(Θ_N·n + θ_X)
  Vector prediction_mean;  // τ(θ_X) or the chain's final s(x)
};

/// Caps a Gaussian block's second parameter at kImproperFloor. Improper blocks
/// and near-zero ones (round-off from the orthogonal code) get the floor.
inline NaturalParams regularize(NaturalParams p) {
  switch (p.family.kind) {
    case FamilyKind::Gaussian1D:
      if (!(p.theta(1) < kImproperFloor)) p.theta(1) = kImproperFloor;
      break;
    case FamilyKind::VonMisesGaussian:
      if (!(p.theta(3) < kImproperFloor)) p.theta(3) = kImproperFloor;
      break;
    default:
      break;
  }
  return p;
}

namespace detail {

inline NaturalParams prediction_params(const CircuitWiring& w, const Vector& y, ImproperPolicy policy) {
  NaturalParams theta_x = decode(w.theta_y, w.family, y);
  check_finite(theta_x.theta);
  if (!is_proper(theta_x)) {
    if (policy == ImproperPolicy::Reject) throw PreconditionError("decoded prediction is improper");
    theta_x = regularize(std::move(theta_x));
  }
  return theta_x;
}

}  // namespace detail

inline GradientSignal ef_signal(const PopulationEncoding& enc, const CircuitWiring& w, const Response& n,
                                const Vector& y, ImproperPolicy policy = ImproperPolicy::Reject) {
  const NaturalParams theta_x = detail::prediction_params(w, y, policy);
  const NaturalParams posterior = response_posterior(enc, theta_x, n);
  GradientSignal out;
  out.posterior_mean = to_mean(posterior).mu;
  out.prediction_mean = to_mean(theta_x).mu;
  out.delta = w.theta_y.transpose() * (out.posterior_mean - out.prediction_mean);
  return out;
}

/// Draws used by the Gibbs chain; swappable for test doubles.
struct GibbsSampler {
  Stimulus stimulus(const NaturalParams& p, Rng& rng) const { return sample(p, rng); }
  Response response(const Vector& rate, Rng& rng) const { return sample_response(rate, rng); }
};

/// CD-k: x^1 ~ q(x | n_k, y); then `steps` sweeps of n ~ p(n | x), x ~ q(x | n, y).
/// The final stimulus sample stands in for E[s(X) | y].
template <class Sampler = GibbsSampler>
GradientSignal cd_signal(const PopulationEncoding& enc, const CircuitWiring& w, const Response& n,
                         const Vector& y, int steps, Rng& rng, ImproperPolicy policy = ImproperPolicy::Reject,
                         const Sampler& sampler = {}) {
  if (steps < 1) throw PreconditionError("contrastive divergence needs at least one step");
  const NaturalParams theta_x = detail::prediction_params(w, y, policy);
  const NaturalParams posterior = response_posterior(enc, theta_x, n);

  Stimulus x = sampler.stimulus(posterior, rng);
  for (int t = 0; t < steps; ++t) {
    const Response resampled = sampler.response(enc.rates(x), rng);
    x = sampler.stimulus(response_posterior(enc, theta_x, resampled), rng);
  }

  GradientSignal out;
  out.posterior_mean = to_mean(posterior).mu;
  out.prediction_mean = sufficient_statistic(enc.family, x);
  out.delta = w.theta_y.transpose() * (out.posterior_mean - out.prediction_mean);
  return out;
}

/// Exact -log q(n | y) for a categorical stimulus, dropping the terms
/// -n·θ_N + Σ log n_i! that do not depend on y.
inline double nll_objective(const PopulationEncoding& enc, const CircuitWiring& w, const Vector& y,
                            const Response& n) {
  if (enc.family.kind != FamilyKind::Categorical)
    throw CapabilityError("exact marginal likelihood needs a categorical stimulus");
  const Vector theta_x = decode(w.theta_y, w.family, y).theta;
  const Vector evidence = theta_x + enc.theta * n.cast<double>();
  const int k = enc.family.states;

  std::vector<double> joint(k), prior(k);
  for (int s = 0; s < k; ++s) {
    const Vector stat = sufficient_statistic(enc.family, Stimulus::state(s));
    joint[s] = stat.dot(evidence);
    prior[s] = stat.dot(theta_x) + enc.rates(Stimulus::state(s)).sum();
  }
  auto log_sum_exp = [](const std::vector<double>& v) {
    const double m = *std::max_element(v.begin(), v.end());
    double acc = 0.0;
    for (double e : v) acc += std::exp(e - m);
    return m + std::log(acc);
  };
  return log_sum_exp(prior) - log_sum_exp(joint);
}

}  // namespace lppc
