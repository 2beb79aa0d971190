#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lppc/experiment.hpp"
#include "lppc/report.hpp"

using namespace lppc;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small(ExperimentKind kind, int epochs = 1) {
  ExperimentConfig c = default_config(kind);
  c.hidden = 20;
  c.train_steps = 300;
  c.validation_steps = 500;
  c.trajectory_steps = 50;
  c.epochs = epochs;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("lppc_test_" + name);
  fs::remove_all(p);
  return p;
}

int count_lines(const std::string& s) { return static_cast<int>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST(Config, Defaults) {
  const ExperimentConfig colour = default_config(ExperimentKind::Colour);
  EXPECT_EQ(colour.neurons, 10);
  EXPECT_EQ(colour.hidden, 100);
  EXPECT_EQ(colour.train_steps, 10000);
  EXPECT_EQ(colour.epochs, 20);
  EXPECT_EQ(colour.validation_steps, 200000);
  EXPECT_EQ(colour.gain, 1.0);
  EXPECT_EQ(colour.learning_rate, 5e-5);
  EXPECT_EQ(colour.learning_rate_decay, 1.25);
  const ExperimentConfig track = default_config(ExperimentKind::Track);
  EXPECT_EQ(track.hidden, 200);
  EXPECT_EQ(track.gain, 2.0);
  const ExperimentConfig pend = default_config(ExperimentKind::Pendulum);
  EXPECT_EQ(pend.neurons, 20);
  EXPECT_EQ(pend.hidden, 500);
  EXPECT_EQ(pend.train_steps, 20000);
}

TEST(Config, ParsersRejectUnknownNames) {
  EXPECT_EQ(parse_experiment("pendulum"), ExperimentKind::Pendulum);
  EXPECT_EQ(parse_code("naive"), CodeKind::Naive);
  EXPECT_EQ(parse_gradient("cd"), GradientKind::CD);
  EXPECT_THROW(parse_experiment("colr"), ConfigError);
  EXPECT_THROW(parse_code("ortho"), ConfigError);
  EXPECT_THROW(parse_gradient("sgd"), ConfigError);
}

TEST(Config, ValidationRejectsBadValues) {
  ExperimentConfig c = default_config(ExperimentKind::Pendulum);
  c.neurons = 21;
  EXPECT_THROW(validate(c), ConfigError);
  c = default_config(ExperimentKind::Track);
  c.hidden = 0;
  EXPECT_THROW(validate(c), ConfigError);
  c = default_config(ExperimentKind::Track);
  c.neurons = 3;
  EXPECT_THROW(validate(c), ConfigError);
  c.code = CodeKind::Naive;
  EXPECT_NO_THROW(validate(c));
}

TEST(Config, JsonRoundTripAndUnknownKeys) {
  ExperimentConfig c = default_config(ExperimentKind::Pendulum);
  c.seed = 77, c.gradient = GradientKind::CD, c.gain = 2.5;
  EXPECT_EQ(config_from_json(to_json(c)), c);
  Json j = to_json(c);
  j["version"] = kVersion;
  EXPECT_EQ(config_from_json(j), c);
  j["hiden"] = 3;
  EXPECT_THROW(config_from_json(j), ConfigError);
  EXPECT_THROW(config_from_json(Json{{"neurons", -1}}), ConfigError);
}

TEST(Bins, ParseAndIndex) {
  const TuningBins b = parse_bins(ExperimentKind::Pendulum, "8x4");
  EXPECT_EQ(b.count(), 32);
  EXPECT_EQ(b.index(Stimulus::phase(-kPi, -6.0)), 0);
  EXPECT_EQ(b.index(Stimulus::phase(0.0, 7.0)), -1);
  EXPECT_THROW(parse_bins(ExperimentKind::Colour, "4"), ConfigError);
  EXPECT_THROW(parse_bins(ExperimentKind::Track, "4x2"), ConfigError);
  EXPECT_THROW(parse_bins(ExperimentKind::Track, "many"), ConfigError);
  EXPECT_EQ(default_bins(ExperimentKind::Colour).index(Stimulus::state(2)), 2);
}

TEST(ResetPeriod, Cadence) {
  EXPECT_EQ(reset_period(1), 1);
  EXPECT_EQ(reset_period(2), 1);
  EXPECT_EQ(reset_period(3), 4);
  EXPECT_EQ(reset_period(4), 9);
  EXPECT_EQ(reset_period(20), 361);
}

TEST(Validation, OracleSourceGivesUnitRatio) {
  for (ExperimentKind kind : {ExperimentKind::Colour, ExperimentKind::Track, ExperimentKind::Pendulum}) {
    const ExperimentConfig c = small(kind);
    const System sys = build_system(c);
    const Circuit circuit = make_circuit(c, sys);
    Rng rng(1);
    ValidationOptions opt;
    opt.source = BeliefSource::Oracle;
    const Metrics m = run_validation(sys, circuit, kind, 2000, rng, opt).metrics;
    EXPECT_EQ(m.e_z, m.e_opt);
    EXPECT_NEAR(m.r, 1.0, 1e-12);
  }
}

TEST(Validation, ZeroPredictionGivesZeroRatio) {
  for (ExperimentKind kind : {ExperimentKind::Colour, ExperimentKind::Track, ExperimentKind::Pendulum}) {
    for (CodeKind code : {CodeKind::Naive, CodeKind::Orthogonal}) {
      ExperimentConfig c = small(kind);
      c.code = code;
      const System sys = build_system(c);
      const Circuit circuit = make_circuit(c, sys);
      Rng rng(2);
      ValidationOptions opt;
      opt.source = BeliefSource::ZeroPrediction;
      const Metrics m = run_validation(sys, circuit, kind, 2000, rng, opt).metrics;
      EXPECT_NEAR(m.e_z, m.e_n, 1e-9 * std::abs(m.e_n));
      EXPECT_NEAR(m.r, 0.0, 1e-6);
    }
  }
}

TEST(Validation, OracleBeatsInstantaneousEverywhere) {
  for (ExperimentKind kind : {ExperimentKind::Colour, ExperimentKind::Track, ExperimentKind::Pendulum}) {
    const ExperimentConfig c = small(kind);
    const System sys = build_system(c);
    Rng rng(3);
    const Metrics m = run_validation(sys, make_circuit(c, sys), kind, 5000, rng).metrics;
    EXPECT_LT(m.e_opt, m.e_n) << to_string(kind);
  }
}

TEST(BeliefError, UniformColourBeliefIsLog3) {
  const NaturalParams uniform = flat_params(Family::categorical(3));
  for (int s = 0; s < 3; ++s)
    EXPECT_NEAR(belief_error(ExperimentKind::Colour, Stimulus::state(s), uniform), std::log(3.0), 1e-15);
}

TEST(BeliefError, PendulumWrapsAngle) {
  const NaturalParams b = phase_natural({kPi - 0.1, 50.0, 1.0, 0.5});
  const double e = belief_error(ExperimentKind::Pendulum, Stimulus::phase(-kPi + 0.1, 1.0), b);
  EXPECT_NEAR(e, 0.5 * 0.2 * 0.2, 1e-9);
}

TEST(HiddenTuning, ZeroNetworkIsOneHalfEverywhere) {
  const ExperimentConfig c = small(ExperimentKind::Track);
  const System sys = build_system(c);
  Circuit circuit = make_circuit(c, sys);
  circuit.network = MlpParams::zeros(c.neurons, c.hidden, c.neurons);
  Rng rng(4);
  const TuningTable t = estimate_hidden_tuning(sys, circuit, c.experiment, default_bins(c.experiment), 20000, rng);
  EXPECT_EQ(t.mean.rows(), c.hidden);
  EXPECT_EQ(t.mean.cols(), 20);
  for (int b = 0; b < t.bins.count(); ++b) {
    if (t.occupancy[b] == 0) {
      EXPECT_TRUE(std::isnan(t.mean(0, b)));
      continue;
    }
    EXPECT_NEAR(t.mean.col(b).minCoeff(), 0.5, 1e-15);
    EXPECT_NEAR(t.mean.col(b).maxCoeff(), 0.5, 1e-15);
  }
}

TEST(HiddenTuning, TrackOccupancyFollowsStationaryDensity) {
  const ExperimentConfig c = small(ExperimentKind::Track);
  const System sys = build_system(c);
  const Circuit circuit = make_circuit(c, sys);
  Rng rng(5);
  const int steps = 200000;
  const TuningTable t = estimate_hidden_tuning(sys, circuit, c.experiment, default_bins(c.experiment), steps, rng);
  const double sd = std::sqrt(0.02 / 0.0396);
  const double width = 6.0 / 20;
  for (int b = 0; b < 20; ++b) {
    const double lo = -3.0 + b * width, hi = lo + width;
    const double p = 0.5 * (std::erf(hi / (sd * std::sqrt(2.0))) - std::erf(lo / (sd * std::sqrt(2.0))));
    // Autocorrelated samples: allow a generous absolute band.
    EXPECT_NEAR(t.occupancy[b] / static_cast<double>(steps), p, 0.015) << "bin " << b;
  }
}

TEST(Training, ZeroEpochsGivesBaselineOnly) {
  const TrainingReport r = run_training(small(ExperimentKind::Colour, 0));
  EXPECT_EQ(r.metrics.size(), 1u);
  EXPECT_TRUE(r.epochs.empty());
  EXPECT_EQ(r.trajectory.size(), 50u);
}

TEST(Training, DeterministicForSeed) {
  const ExperimentConfig c = small(ExperimentKind::Track, 2);
  const TrainingReport a = run_training(c), b = run_training(c);
  EXPECT_EQ(a.network, b.network);
  ASSERT_EQ(a.metrics.size(), 3u);
  for (std::size_t i = 0; i < a.metrics.size(); ++i) EXPECT_EQ(a.metrics[i].e_z, b.metrics[i].e_z);
  ExperimentConfig d = c;
  d.seed = 2;
  EXPECT_FALSE(run_training(d).network == a.network);
}

TEST(Training, EveryVariantRunsAndStaysFinite) {
  for (ExperimentKind kind : {ExperimentKind::Colour, ExperimentKind::Track, ExperimentKind::Pendulum})
    for (CodeKind code : {CodeKind::Naive, CodeKind::Orthogonal})
      for (GradientKind g : {GradientKind::EF, GradientKind::CD}) {
        ExperimentConfig c = small(kind, 2);
        c.code = code, c.gradient = g;
        const TrainingReport r = run_training(c);
        EXPECT_TRUE(r.network.all_finite());
        EXPECT_EQ(r.epochs.back().reset_period, 1);
      }
}

TEST(Training, OneColourEpochImprovesOnUntrainedCircuit) {
  ExperimentConfig c = default_config(ExperimentKind::Colour);
  c.epochs = 1;
  c.validation_steps = 20000;
  const TrainingReport r = run_training(c);
  EXPECT_LT(r.metrics[1].e_z, r.metrics[0].e_z);
  EXPECT_EQ(r.epochs[0].reset_period, 1);
  EXPECT_DOUBLE_EQ(r.epochs[0].learning_rate, 5e-5);
}

TEST(Report, MetricsRowsAndByteIdenticalReemit) {
  const TrainingReport r = run_training(small(ExperimentKind::Pendulum, 2));
  const fs::path a = scratch("emit_a"), b = scratch("emit_b");
  emit_report(r, a);
  emit_report(r, b);
  for (const char* f : {"metrics.csv", "trajectory.csv", "hidden_tuning.csv", "config.json", "checkpoint.json"}) {
    ASSERT_TRUE(fs::exists(a / f)) << f;
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  EXPECT_EQ(count_lines(slurp(a / "metrics.csv")), 1 + 3);
  EXPECT_EQ(count_lines(slurp(a / "trajectory.csv")), 1 + 50);
  EXPECT_EQ(count_lines(slurp(a / "hidden_tuning.csv")), 1 + 16 * 6);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Report, ConfigAndCheckpointRoundTrip) {
  ExperimentConfig c = small(ExperimentKind::Track, 1);
  c.seed = 123456789012345ULL;
  const TrainingReport r = run_training(c);
  const fs::path dir = scratch("roundtrip");
  emit_report(r, dir);
  EXPECT_EQ(config_from_json(read_json_file(dir / "config.json")), c);
  const Checkpoint cp = checkpoint_from_json(read_json_file(dir / "checkpoint.json"));
  EXPECT_EQ(cp.config, c);
  EXPECT_EQ(cp.epoch, 1);
  EXPECT_EQ(cp.network, r.network);

  // A restored circuit validates to the same numbers.
  const System sys = build_system(c);
  const Metrics again = validate(sys, restore_circuit(cp, sys), c, 1);
  EXPECT_EQ(again.e_z, r.final_metrics().e_z);
  fs::remove_all(dir);
}

TEST(Report, CheckpointShapeErrors) {
  const TrainingReport r = run_training(small(ExperimentKind::Colour, 0));
  Json j = to_json(Checkpoint{r.config, r.network, 0});
  j["network"]["hidden_bias"] = std::vector<double>{1.0, 2.0};
  EXPECT_THROW(checkpoint_from_json(j), ConfigError);
}

TEST(Report, FormatDoubleRoundTrips) {
  for (double v : {0.1, 1.0 / 3, -2.5e-300, 6.02214076e23}) EXPECT_EQ(std::stod(format_double(v)), v);
  EXPECT_EQ(format_double(std::nan("")), "nan");
}
