#pragma once

// Poisson populations: tuning curves, spike generation, and the log-linear
// encoding rate_i(x) = exp(s(x)·Θ_N[:,i] + θ_N,i).

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <variant>
#include <vector>

#include "lppc/errors.hpp"
#include "lppc/exponential_family.hpp"

namespace lppc {

using Response = Eigen::VectorXi;

/// Tabulated rates for a finite stimulus: rates(i, state).
struct DiscreteTable {
  Matrix rates;
};

/// f_i(x) = exp(-(x - x0_i)^2 / (2 sigma^2)).
struct GaussianGrid {
  Vector centers;
  double variance = 1.0;
};

/// f_i(q) = exp(kappa cos(q - q0_i)).
struct VonMisesGrid {
  Vector centers;
  double concentration = 1.0;
};

/// Angle neurons followed by velocity neurons; each responds to one coordinate.
struct ConcatenatedGrid {
  VonMisesGrid angle;
  GaussianGrid velocity;
};

using TuningCurveSet = std::variant<DiscreteTable, GaussianGrid, VonMisesGrid, ConcatenatedGrid>;

/// Endpoint-inclusive even spacing.
inline Vector linspace(double lo, double hi, int n) {
  if (n == 1) return Vector::Constant(1, lo);
  return Vector::LinSpaced(n, lo, hi);
}

/// n angles evenly spaced on the circle starting at -pi, endpoint excluded.
inline Vector circular_grid(int n) {
  Vector out(n);
  for (int i = 0; i < n; ++i) out(i) = -kPi + kTwoPi * i / n;
  return out;
}

inline int neuron_count(const TuningCurveSet& t) {
  return std::visit(
      [](const auto& c) -> int {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, DiscreteTable>) return static_cast<int>(c.rates.rows());
        else if constexpr (std::is_same_v<T, ConcatenatedGrid>)
          return static_cast<int>(c.angle.centers.size() + c.velocity.centers.size());
        else return static_cast<int>(c.centers.size());
      },
      t);
}

inline Family family_of(const TuningCurveSet& t) {
  return std::visit(
      [](const auto& c) -> Family {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, DiscreteTable>)
          return Family::categorical(static_cast<int>(c.rates.cols()));
        else if constexpr (std::is_same_v<T, GaussianGrid>) return Family::gaussian();
        else if constexpr (std::is_same_v<T, VonMisesGrid>) return Family::von_mises();
        else return Family::von_mises_gaussian();
      },
      t);
}

namespace detail {

inline Vector gaussian_curves(const GaussianGrid& g, double x) {
  return (-(g.centers.array() - x).square() / (2.0 * g.variance)).exp();
}

inline Vector von_mises_curves(const VonMisesGrid& g, double q) {
  return (g.concentration * (q - g.centers.array()).cos()).exp();
}

}  // namespace detail

/// Tuning-curve values (f_1(x), ..., f_dN(x)).
inline Vector tuning_values(const TuningCurveSet& t, const Stimulus& s) {
  detail::check_stimulus(family_of(t), s);
  return std::visit(
      [&](const auto& c) -> Vector {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, DiscreteTable>) return c.rates.col(s.state_index());
        else if constexpr (std::is_same_v<T, GaussianGrid>) return detail::gaussian_curves(c, s.x);
        else if constexpr (std::is_same_v<T, VonMisesGrid>) return detail::von_mises_curves(c, s.x);
        else {
          Vector out(c.angle.centers.size() + c.velocity.centers.size());
          out << detail::von_mises_curves(c.angle, s.x), detail::gaussian_curves(c.velocity, s.v);
          return out;
        }
      },
      t);
}

/// Expected spike counts per time-step, gain * f(x).
inline Vector rates(const TuningCurveSet& t, double gain, const Stimulus& s) {
  if (!(gain > 0.0)) throw PreconditionError("gain must be positive");
  return gain * tuning_values(t, s);
}

/// Independent Poisson draws; zero rates yield zero counts.
inline Response sample_response(const Vector& rate, Rng& rng) {
  Response n(rate.size());
  for (Eigen::Index i = 0; i < rate.size(); ++i) {
    const double r = rate(i);
    if (!(r >= 0.0)) throw PreconditionError("negative or NaN Poisson rate");
    n(i) = r == 0.0 ? 0 : std::poisson_distribution<int>(r)(rng);
  }
  return n;
}

/// Θ_N (statistic_dim x d_N), θ_N (d_N), and the gain that produced them.
struct PopulationEncoding {
  Family family;
  Matrix theta;
  Vector bias;
  double gain = 1.0;

  int neurons() const { return static_cast<int>(bias.size()); }

  /// Rates via the log-linear form; equals rates(tuning, gain, x).
  Vector rates(const Stimulus& s) const {
    const Vector stat = sufficient_statistic(family, s);
    return (theta.transpose() * stat + bias).array().exp();
  }
};

inline PopulationEncoding natural_encoding(const TuningCurveSet& t, double gain) {
  if (!(gain > 0.0)) throw PreconditionError("gain must be positive");
  const Family fam = family_of(t);
  const double log_gain = std::log(gain);
  auto gaussian_block = [&](const GaussianGrid& g, Eigen::Ref<Matrix> block, Eigen::Ref<Vector> bias) {
    block.row(0) = (g.centers / g.variance).transpose();
    block.row(1).setConstant(-1.0 / (2.0 * g.variance));
    bias = log_gain - g.centers.array().square() / (2.0 * g.variance);
  };
  auto von_mises_block = [&](const VonMisesGrid& g, Eigen::Ref<Matrix> block, Eigen::Ref<Vector> bias) {
    block.row(0) = (g.concentration * g.centers.array().cos()).matrix().transpose();
    block.row(1) = (g.concentration * g.centers.array().sin()).matrix().transpose();
    bias.setConstant(log_gain);
  };

  PopulationEncoding enc{fam, Matrix::Zero(fam.statistic_dim(), neuron_count(t)),
                         Vector::Zero(neuron_count(t)), gain};
  std::visit(
      [&](const auto& c) {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, DiscreteTable>) {
          if ((c.rates.array() <= 0.0).any()) throw PreconditionError("tuning rates must be positive");
          const Eigen::Index ref = c.rates.cols() - 1;
          const Matrix logs = c.rates.array().log();
          for (Eigen::Index s = 0; s < ref; ++s)
            enc.theta.row(s) = (logs.col(s) - logs.col(ref)).transpose();
          enc.bias = logs.col(ref).array() + log_gain;
        } else if constexpr (std::is_same_v<T, GaussianGrid>) {
          gaussian_block(c, enc.theta, enc.bias);
        } else if constexpr (std::is_same_v<T, VonMisesGrid>) {
          von_mises_block(c, enc.theta, enc.bias);
        } else {
          const Eigen::Index na = c.angle.centers.size();
          const Eigen::Index nv = c.velocity.centers.size();
          von_mises_block(c.angle, enc.theta.block(0, 0, 2, na), enc.bias.head(na));
          gaussian_block(c.velocity, enc.theta.block(2, na, 2, nv), enc.bias.tail(nv));
        }
      },
      t);
  return enc;
}

/// θ_prior + Θ_N·n.
inline NaturalParams response_posterior(const PopulationEncoding& enc, const NaturalParams& prior,
                                        const Response& n) {
  detail::require_shape(n.size() == enc.neurons(), "response length does not match population");
  detail::require_shape(prior.family == enc.family, "prior family does not match encoding");
  detail::check_dim(prior.family, prior.theta);
  return {prior.family, prior.theta + enc.theta * n.cast<double>()};
}

struct SumConstancy {
  double lambda;        // mean over the grid of Σ_i f_i(x)
  double max_rel_dev;   // max_x |Σ_i f_i(x) - lambda| / lambda
};

inline SumConstancy sum_constancy(const TuningCurveSet& t, const std::vector<Stimulus>& grid) {
  if (grid.empty()) throw PreconditionError("sum_constancy needs a nonempty grid");
  std::vector<double> sums;
  sums.reserve(grid.size());
  double total = 0.0;
  for (const auto& s : grid) {
    sums.push_back(tuning_values(t, s).sum());
    total += sums.back();
  }
  const double lambda = total / static_cast<double>(grid.size());
  double dev = 0.0;
  for (double v : sums) dev = std::max(dev, std::abs(v - lambda) / lambda);
  return {lambda, dev};
}

}  // namespace lppc
