#pragma once

// Exponential-family densities q(x) ∝ exp(θ·s(x)) with constant base measure:
// sufficient statistics, natural <-> mean coordinates, normalizers, sampling.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "lppc/errors.hpp"

namespace lppc {

using Rng = std::mt19937_64;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Wraps an angle onto [-pi, pi).
inline double wrap_angle(double a) {
  double w = a - kTwoPi * std::floor((a + kPi) / kTwoPi);
  // floor rounding can land exactly on +pi for inputs a hair below it
  if (w >= kPi) w -= kTwoPi;
  return w;
}

enum class FamilyKind { Categorical, Gaussian1D, VonMises, VonMisesGaussian };

struct Family {
  FamilyKind kind = FamilyKind::Gaussian1D;
  int states = 0;  // categorical only

  static Family categorical(int k) { return {FamilyKind::Categorical, k}; }
  static Family gaussian() { return {FamilyKind::Gaussian1D, 0}; }
  static Family von_mises() { return {FamilyKind::VonMises, 0}; }
  static Family von_mises_gaussian() { return {FamilyKind::VonMisesGaussian, 0}; }

  // Categorical uses k-1 parameters with the last state as reference.
  int statistic_dim() const {
    switch (kind) {
      case FamilyKind::Categorical: return states - 1;
      case FamilyKind::Gaussian1D: return 2;
      case FamilyKind::VonMises: return 2;
      case FamilyKind::VonMisesGaussian: return 4;
    }
    return 0;
  }

  bool operator==(const Family&) const = default;
};

inline std::string to_string(const Family& f) {
  switch (f.kind) {
    case FamilyKind::Categorical: return "categorical(" + std::to_string(f.states) + ")";
    case FamilyKind::Gaussian1D: return "gaussian";
    case FamilyKind::VonMises: return "von_mises";
    case FamilyKind::VonMisesGaussian: return "von_mises_gaussian";
  }
  return "unknown";
}

/// A point in a family's sample space. `x` holds the categorical state index,
/// the real value, or the angle; `v` is the angular velocity of the pendulum
/// family and unused otherwise.
struct Stimulus {
  double x = 0.0;
  double v = 0.0;

  static Stimulus state(int i) { return {static_cast<double>(i), 0.0}; }
  static Stimulus scalar(double value) { return {value, 0.0}; }
  static Stimulus phase(double angle, double velocity) { return {angle, velocity}; }

  int state_index() const { return static_cast<int>(x); }
  bool operator==(const Stimulus&) const = default;
};

struct NaturalParams {
  Family family;
  Vector theta;
};

struct MeanParams {
  Family family;
  Vector mu;
};

inline NaturalParams flat_params(const Family& f) {
  return {f, Vector::Zero(f.statistic_dim())};
}

namespace detail {

inline void check_dim(const Family& f, const Vector& v) {
  require_shape(v.size() == f.statistic_dim(),
                "parameter length " + std::to_string(v.size()) + " does not match " + to_string(f));
}

inline void check_finite(const Vector& v) {
  if (!v.allFinite()) throw DomainError("non-finite natural parameters");
}

inline void check_stimulus(const Family& f, const Stimulus& s) {
  switch (f.kind) {
    case FamilyKind::Categorical:
      if (!(s.x >= 0.0 && s.x < f.states && s.x == std::floor(s.x)))
        throw DomainError("categorical state out of range");
      return;
    case FamilyKind::Gaussian1D:
      if (!std::isfinite(s.x)) throw DomainError("non-finite stimulus");
      return;
    case FamilyKind::VonMises:
      if (!(s.x >= -kPi && s.x < kPi)) throw DomainError("angle outside [-pi, pi)");
      return;
    case FamilyKind::VonMisesGaussian:
      if (!(s.x >= -kPi && s.x < kPi)) throw DomainError("angle outside [-pi, pi)");
      if (!std::isfinite(s.v)) throw DomainError("non-finite velocity");
      return;
  }
}

}  // namespace detail

// --- closed-form pieces shared by several modules --------------------------

struct GaussianMoments {
  double mean;
  double variance;
};

/// (θ0, θ1) -> mean and variance; requires θ1 < 0.
inline GaussianMoments gaussian_moments(double t0, double t1) {
  return {-t0 / (2.0 * t1), -1.0 / (2.0 * t1)};
}

inline Eigen::Vector2d gaussian_natural(double mean, double variance) {
  return {mean / variance, -1.0 / (2.0 * variance)};
}

struct VonMisesPolar {
  double mean;           // circular mean direction
  double concentration;  // kappa
};

// Below this concentration the direction is round-off and reported as 0.
inline constexpr double kFlatConcentration = 1e-9;

inline VonMisesPolar von_mises_polar(double t_cos, double t_sin) {
  const double kappa = std::hypot(t_cos, t_sin);
  return {kappa < kFlatConcentration ? 0.0 : std::atan2(t_sin, t_cos), kappa};
}

/// Normalizer and mean resultant length of exp(kappa*cos(q)) by a fixed
/// 1024-point periodic trapezoid rule.
struct VonMisesQuadrature {
  double log_normalizer;  // log ∫ exp(kappa cos q) dq over one period
  double resultant;       // E[cos q], i.e. I1(kappa)/I0(kappa)
};

inline constexpr int kVonMisesGridPoints = 1024;

namespace detail {

inline const std::array<double, kVonMisesGridPoints>& von_mises_grid_cosines() {
  static const auto table = [] {
    std::array<double, kVonMisesGridPoints> t{};
    for (int j = 0; j < kVonMisesGridPoints; ++j) t[j] = std::cos(-kPi + kTwoPi * j / kVonMisesGridPoints);
    return t;
  }();
  return table;
}

}  // namespace detail

inline VonMisesQuadrature von_mises_quadrature(double kappa) {
  double mass = 0.0;
  double first = 0.0;
  const double step = kTwoPi / kVonMisesGridPoints;
  for (const double c : detail::von_mises_grid_cosines()) {
    const double w = std::exp(kappa * (c - 1.0));
    mass += w;
    first += w * c;
  }
  return {kappa + std::log(mass * step), first / mass};
}

/// Softmax over the k states with the reference state's parameter pinned to 0.
inline Vector categorical_probabilities(const Vector& theta) {
  const Eigen::Index k = theta.size() + 1;
  Vector logits(k);
  logits.head(k - 1) = theta;
  logits(k - 1) = 0.0;
  const double m = logits.maxCoeff();
  Vector p = (logits.array() - m).exp();
  return p / p.sum();
}

// --- family operations ------------------------------------------------------

inline Vector sufficient_statistic(const Family& f, const Stimulus& s) {
  detail::check_stimulus(f, s);
  Vector out = Vector::Zero(f.statistic_dim());
  switch (f.kind) {
    case FamilyKind::Categorical:
      if (s.state_index() < f.states - 1) out(s.state_index()) = 1.0;
      break;
    case FamilyKind::Gaussian1D:
      out << s.x, s.x * s.x;
      break;
    case FamilyKind::VonMises:
      out << std::cos(s.x), std::sin(s.x);
      break;
    case FamilyKind::VonMisesGaussian:
      out << std::cos(s.x), std::sin(s.x), s.v, s.v * s.v;
      break;
  }
  return out;
}

inline double log_unnormalized_density(const NaturalParams& p, const Stimulus& s) {
  detail::check_dim(p.family, p.theta);
  return p.theta.dot(sufficient_statistic(p.family, s));
}

/// Whether exp(θ·s) is normalizable.
inline bool is_proper(const NaturalParams& p) {
  if (!p.theta.allFinite()) return false;
  switch (p.family.kind) {
    case FamilyKind::Categorical:
    case FamilyKind::VonMises:
      return true;
    case FamilyKind::Gaussian1D:
      return p.theta(1) < 0.0;
    case FamilyKind::VonMisesGaussian:
      return p.theta(3) < 0.0;
  }
  return false;
}

namespace detail {

inline void require_proper(const NaturalParams& p, const char* op) {
  check_dim(p.family, p.theta);
  check_finite(p.theta);
  if (!is_proper(p))
    throw PreconditionError(std::string(op) + ": improper " + to_string(p.family) + " parameters");
}

}  // namespace detail

/// τ(θ) = E[s(X)].
inline MeanParams to_mean(const NaturalParams& p) {
  detail::require_proper(p, "to_mean");
  const Vector& t = p.theta;
  Vector mu(t.size());
  switch (p.family.kind) {
    case FamilyKind::Categorical:
      mu = categorical_probabilities(t).head(t.size());
      break;
    case FamilyKind::Gaussian1D: {
      const auto [m, var] = gaussian_moments(t(0), t(1));
      mu << m, m * m + var;
      break;
    }
    case FamilyKind::VonMises:
    case FamilyKind::VonMisesGaussian: {
      const auto polar = von_mises_polar(t(0), t(1));
      const double a = von_mises_quadrature(polar.concentration).resultant;
      mu(0) = a * std::cos(polar.mean);
      mu(1) = a * std::sin(polar.mean);
      if (p.family.kind == FamilyKind::VonMisesGaussian) {
        const auto [m, var] = gaussian_moments(t(2), t(3));
        mu(2) = m;
        mu(3) = m * m + var;
      }
      break;
    }
  }
  return {p.family, mu};
}

/// Inverse of to_mean for the Categorical and Gaussian1D families.
inline NaturalParams to_natural(const MeanParams& m) {
  detail::check_dim(m.family, m.mu);
  switch (m.family.kind) {
    case FamilyKind::Categorical: {
      const double ref = 1.0 - m.mu.sum();
      if (!(ref > 0.0) || (m.mu.array() <= 0.0).any())
        throw PreconditionError("to_natural: probabilities must be interior");
      return {m.family, (m.mu.array() / ref).log().matrix()};
    }
    case FamilyKind::Gaussian1D: {
      const double var = m.mu(1) - m.mu(0) * m.mu(0);
      if (!(var > 0.0)) throw PreconditionError("to_natural: non-positive variance");
      return {m.family, gaussian_natural(m.mu(0), var)};
    }
    default:
      throw CapabilityError("to_natural is only implemented for categorical and gaussian families");
  }
}

/// Exact for Categorical and Gaussian1D; von Mises blocks use the fixed quadrature.
inline bool log_partition_is_exact(const Family& f) {
  return f.kind == FamilyKind::Categorical || f.kind == FamilyKind::Gaussian1D;
}

inline double log_partition(const NaturalParams& p) {
  detail::require_proper(p, "log_partition");
  const Vector& t = p.theta;
  auto gaussian = [](double t0, double t1) {
    const auto [m, var] = gaussian_moments(t0, t1);
    return 0.5 * std::log(kTwoPi * var) + m * m / (2.0 * var);
  };
  switch (p.family.kind) {
    case FamilyKind::Categorical: {
      const double mx = std::max(0.0, t.size() ? t.maxCoeff() : 0.0);
      return mx + std::log(std::exp(-mx) + (t.array() - mx).exp().sum());
    }
    case FamilyKind::Gaussian1D:
      return gaussian(t(0), t(1));
    case FamilyKind::VonMises:
      return von_mises_quadrature(std::hypot(t(0), t(1))).log_normalizer;
    case FamilyKind::VonMisesGaussian:
      return von_mises_quadrature(std::hypot(t(0), t(1))).log_normalizer + gaussian(t(2), t(3));
  }
  return 0.0;
}

/// Best–Fisher rejection sampler.
inline double sample_von_mises(double mean, double kappa, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  if (kappa < 1e-8) return wrap_angle(-kPi + kTwoPi * unif(rng));
  const double tau = 1.0 + std::sqrt(1.0 + 4.0 * kappa * kappa);
  const double rho = (tau - std::sqrt(2.0 * tau)) / (2.0 * kappa);
  const double r = (1.0 + rho * rho) / (2.0 * rho);
  double f = 0.0;
  for (;;) {
    const double u1 = unif(rng);
    const double u2 = unif(rng);
    const double z = std::cos(kPi * u1);
    f = (1.0 + r * z) / (r + z);
    const double c = kappa * (r - f);
    if (c * (2.0 - c) - u2 > 0.0) break;
    if (u2 > 0.0 && std::log(c / u2) + 1.0 - c >= 0.0) break;
  }
  const double u3 = unif(rng);
  const double offset = std::acos(std::clamp(f, -1.0, 1.0));
  return wrap_angle(mean + (u3 < 0.5 ? -offset : offset));
}

inline Stimulus sample(const NaturalParams& p, Rng& rng) {
  detail::require_proper(p, "sample");
  const Vector& t = p.theta;
  std::normal_distribution<double> normal(0.0, 1.0);
  switch (p.family.kind) {
    case FamilyKind::Categorical: {
      const Vector probs = categorical_probabilities(t);
      const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
      double cdf = 0.0;
      for (Eigen::Index i = 0; i < probs.size(); ++i) {
        cdf += probs(i);
        if (u < cdf) return Stimulus::state(static_cast<int>(i));
      }
      // u landed in the rounding gap above the accumulated cdf
      for (Eigen::Index i = probs.size() - 1; i >= 0; --i)
        if (probs(i) > 0.0) return Stimulus::state(static_cast<int>(i));
      return Stimulus::state(0);
    }
    case FamilyKind::Gaussian1D: {
      const auto [m, var] = gaussian_moments(t(0), t(1));
      return Stimulus::scalar(m + std::sqrt(var) * normal(rng));
    }
    case FamilyKind::VonMises: {
      const auto polar = von_mises_polar(t(0), t(1));
      return Stimulus::scalar(sample_von_mises(polar.mean, polar.concentration, rng));
    }
    case FamilyKind::VonMisesGaussian: {
      const auto polar = von_mises_polar(t(0), t(1));
      const double q = sample_von_mises(polar.mean, polar.concentration, rng);
      const auto [m, var] = gaussian_moments(t(2), t(3));
      return Stimulus::phase(q, m + std::sqrt(var) * normal(rng));
    }
  }
  return {};
}

/// Negative log density at x, including the normalizer.
inline double negative_log_density(const NaturalParams& p, const Stimulus& s) {
  return log_partition(p) - log_unnormalized_density(p, s);
}

}  // namespace lppc
