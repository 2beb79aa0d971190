#include <gtest/gtest.h>

#include <cmath>

#include "lppc/experiment.hpp"
#include "lppc/oracle_filters.hpp"
#include "test_support.hpp"

using namespace lppc;

TEST(DiscretePredict, UniformBelief) {
  const NaturalParams p = discrete_predict(colour_chain(), flat_params(Family::categorical(3)));
  const Vector probs = categorical_probabilities(p.theta);
  EXPECT_NEAR(probs(0), 11.0 / 30, 1e-15);
  EXPECT_NEAR(probs(1), 8.0 / 30, 1e-15);
  EXPECT_NEAR(probs(2), 11.0 / 30, 1e-15);
}

TEST(DiscretePredict, PointMassOnBlue) {
  // θ = (-∞, -∞) in the limit; -800 is far below double precision of the softmax.
  const NaturalParams p = discrete_predict(colour_chain(), {Family::categorical(3), Eigen::Vector2d(-800, -800)});
  const Vector probs = categorical_probabilities(p.theta);
  EXPECT_NEAR(probs(0), 0.05, 1e-14);
  EXPECT_NEAR(probs(1), 0.15, 1e-14);
  EXPECT_NEAR(probs(2), 0.80, 1e-14);
}

TEST(DiscretePredict, IdentityChainLeavesBeliefUnchanged) {
  const NaturalParams b{Family::categorical(3), Eigen::Vector2d(0.3, -1.1)};
  EXPECT_LT(test::max_abs(discrete_predict(MarkovChainSpec{Matrix::Identity(3, 3)}, b).theta - b.theta), 1e-14);
}

TEST(KalmanPredict, Example) {
  const NaturalParams p = kalman_predict(LinearSdeSpec{}, {Family::gaussian(), gaussian_natural(1.0, 1.0)});
  const auto m = gaussian_moments(p.theta(0), p.theta(1));
  EXPECT_NEAR(m.mean, 0.98, 1e-14);
  EXPECT_NEAR(m.variance, 0.9804, 1e-14);
}

TEST(KalmanPredict, IdentityDynamics) {
  const NaturalParams b{Family::gaussian(), Eigen::Vector2d(0.4, -0.3)};
  EXPECT_LT(test::max_abs(kalman_predict({0.0, 0.0, 0.02}, b).theta - b.theta), 1e-15);
}

TEST(KalmanPredict, VarianceConvergesToStationaryValue) {
  NaturalParams b{Family::gaussian(), gaussian_natural(2.0, 3.0)};
  for (int i = 0; i < 1000; ++i) b = kalman_predict(LinearSdeSpec{}, b);
  EXPECT_NEAR(gaussian_moments(b.theta(0), b.theta(1)).variance, 0.02 / 0.0396, 1e-6);
}

TEST(KalmanPredict, FlatPassesImproperRejected) {
  EXPECT_EQ(kalman_predict({}, flat_params(Family::gaussian())).theta, Vector::Zero(2));
  EXPECT_THROW(kalman_predict({}, {Family::gaussian(), Eigen::Vector2d(1, 0.5)}), PreconditionError);
}

TEST(EkfPredict, FixedPointAtRest) {
  PendulumSpec spec;
  spec.velocity_variance = 0, spec.friction = 0;
  const NaturalParams b = phase_natural({0.0, 1e4, 0.0, 1e-4});
  const PhaseBelief p = phase_belief(ekf_pendulum_predict(spec, b));
  EXPECT_NEAR(p.angle_mean, 0.0, 1e-15);
  EXPECT_NEAR(p.velocity_mean, 0.0, 1e-15);
}

TEST(EkfPredict, CovarianceInjection) {
  const NaturalParams b = phase_natural({0.0, 1e6, 0.0, 1e-6});
  const PhaseBelief p = phase_belief(ekf_pendulum_predict(PendulumSpec{}, b));
  // Σ' = F diag(1e-6,1e-6) F' + diag(0, 4e-4); (2,2) = 1e-6 (g h)^2 + 1e-6 (1 - c h)^2 + 4e-4
  const double expected = 1e-6 * (0.1962 * 0.1962 + 0.998 * 0.998) + 4e-4;
  EXPECT_NEAR(p.velocity_variance, expected, 1e-12);
  EXPECT_NEAR(p.velocity_variance - 1e-6, 4e-4, 2e-6);
  // κ* = 1/Σ'(1,1), Σ'(1,1) = 1e-6 + h² 1e-6
  EXPECT_NEAR(p.concentration, 1.0 / (1e-6 * (1 + 4e-4)), 1e-3);
}

TEST(EkfPredict, MeanFollowsEulerDrift) {
  const PendulumSpec spec;
  const NaturalParams b = phase_natural({0.5, 20.0, -1.0, 0.3});
  const PhaseBelief p = phase_belief(ekf_pendulum_predict(spec, b));
  EXPECT_NEAR(p.angle_mean, 0.5 - 0.02, 1e-12);
  EXPECT_NEAR(p.velocity_mean, -1.0 + 0.02 * (-9.81 * std::sin(0.5) + 0.1), 1e-12);
}

TEST(EkfPredict, ConcentrationFloorAndImproperVelocity) {
  const NaturalParams flat = flat_params(Family::von_mises_gaussian());
  const PhaseBelief p = phase_belief(ekf_pendulum_predict(PendulumSpec{}, flat));
  EXPECT_GE(p.concentration, kMinConcentration);
  EXPECT_LE(p.velocity_variance, kMaxVariance);
  EXPECT_TRUE(is_proper(phase_natural(p)));
}

TEST(EkfPredict, HighConcentrationAngleMeanAgreesWithQuadrature) {
  // For κ ≥ 50 the von Mises circular mean and the Gaussian mean coincide.
  const double q = 1.2;
  const NaturalParams b = phase_natural({q, 60.0, 0.0, 1.0});
  const Vector mu = to_mean(b).mu;
  EXPECT_LT(std::abs(std::atan2(mu(1), mu(0)) - phase_belief(b).angle_mean), 1e-3);
}

TEST(FilterStep, ZeroResponseIdentityPrediction) {
  const PopulationEncoding enc = build_system(default_config(ExperimentKind::Track)).encoding;
  const NaturalParams b{Family::gaussian(), Eigen::Vector2d(0.2, -0.9)};
  auto identity = [](const NaturalParams& p) { return p; };
  EXPECT_EQ(filter_step(enc, identity, b, Response::Zero(10)).theta, b.theta);
}

TEST(RunOracle, BaseCaseIsResponsePosterior) {
  const System sys = build_system(default_config(ExperimentKind::Colour));
  Response n = Response::Zero(10);
  n(0) = 2;
  const NaturalParams prior{Family::categorical(3), Eigen::Vector2d(0.1, 0.2)};
  const BeliefTrajectory t = run_oracle(sys.process, sys.encoding, {n}, prior);
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(t[0].theta, response_posterior(sys.encoding, prior, n).theta);
  EXPECT_THROW(run_oracle(sys.process, sys.encoding, {}, prior), PreconditionError);
}

TEST(RunOracle, SilentResponsesConvergeToStationaryDistribution) {
  const System sys = build_system(default_config(ExperimentKind::Colour));
  // Silent responses still carry information (the rate sum is constant, so none here): beliefs follow the chain.
  const std::vector<Response> silent(200, Response::Zero(10));
  const BeliefTrajectory t = run_oracle(sys.process, sys.encoding, silent, {Family::categorical(3), Eigen::Vector2d(5, -3)});
  Vector pi = Vector::Constant(3, 1.0 / 3);
  for (int i = 0; i < 1000; ++i) pi = colour_chain().transition.transpose() * pi;
  EXPECT_LT(test::max_abs(categorical_probabilities(t.back().theta) - pi), 1e-10);
}

TEST(RunOracle, BruteForceEnumerationOnShortSequences) {
  const System sys = build_system(default_config(ExperimentKind::Colour));
  const Matrix T = colour_chain().transition;
  const Matrix f = std::get<DiscreteTable>(sys.tuning).rates;
  Rng rng(1);
  for (int len = 1; len <= 5; ++len) {
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<Response> ns;
      for (int k = 0; k < len; ++k) ns.push_back(test::random_response(10, 2, rng));
      const NaturalParams last = run_oracle(sys.process, sys.encoding, ns, flat_params(Family::categorical(3))).back();

      // Sum over all 3^len paths: uniform start, Poisson likelihoods.
      Vector post = Vector::Zero(3);
      int paths = 1;
      for (int k = 0; k < len; ++k) paths *= 3;
      for (int code = 0; code < paths; ++code) {
        std::vector<int> x(len);
        for (int k = 0, c = code; k < len; ++k, c /= 3) x[k] = c % 3;
        double w = 1.0 / 3;
        for (int k = 0; k < len; ++k) {
          if (k > 0) w *= T(x[k - 1], x[k]);
          for (int i = 0; i < 10; ++i) w *= std::pow(f(i, x[k]), ns[k](i)) * std::exp(-f(i, x[k]));
        }
        post(x[len - 1]) += w;
      }
      post /= post.sum();
      EXPECT_LT(0.5 * (categorical_probabilities(last.theta) - post).cwiseAbs().sum(), 1e-10);
    }
  }
}

TEST(RunOracle, TrackOracleBeatsInstantaneousDecoding) {
  const ExperimentConfig c = default_config(ExperimentKind::Track);
  const System sys = build_system(c);
  Rng rng(2);
  const Trajectory t = simulate(sys.process, sys.encoding, sys.initial, 1000, rng);
  const BeliefTrajectory beliefs = run_oracle(sys.process, sys.encoding, t.responses, flat_params(Family::gaussian()));
  double e_opt = 0, e_n = 0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    e_opt += belief_error(c.experiment, t.stimuli[k], beliefs[k]);
    e_n += belief_error(c.experiment, t.stimuli[k],
                        response_posterior(sys.encoding, flat_params(Family::gaussian()), t.responses[k]));
    if (k > 0) {
      EXPECT_TRUE(is_proper(beliefs[k]));
    }
  }
  EXPECT_LT(e_opt, e_n);
}

TEST(RunOracle, PendulumBeliefsStayProper) {
  const System sys = build_system(default_config(ExperimentKind::Pendulum));
  Rng rng(3);
  const Trajectory t = simulate(sys.process, sys.encoding, sys.initial, 2000, rng);
  const BeliefTrajectory beliefs =
      run_oracle(sys.process, sys.encoding, t.responses, flat_params(Family::von_mises_gaussian()));
  for (std::size_t k = 1; k < beliefs.size(); ++k) {
    EXPECT_TRUE(is_proper(beliefs[k]));
    EXPECT_GT(phase_belief(beliefs[k]).concentration, 0.0);
  }
}
