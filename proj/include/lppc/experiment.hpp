#pragma once

// Training and validation of the filtering circuit on the three benchmark
// systems (colour sequences, track position, pendulum), with the E_Z / E_N /
// E_Opt error bounds and hidden-layer tuning estimates.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "lppc/circuit_codes.hpp"
#include "lppc/dynamics.hpp"
#include "lppc/errors.hpp"
#include "lppc/exponential_family.hpp"
#include "lppc/harmonium_learning.hpp"
#include "lppc/oracle_filters.hpp"
#include "lppc/poisson_population.hpp"
#include "lppc/prediction_network.hpp"

namespace lppc {

inline constexpr const char* kVersion = "1.0.0";

enum class ExperimentKind { Colour, Track, Pendulum };
enum class GradientKind { EF, CD };

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::Colour;
  CodeKind code = CodeKind::Orthogonal;
  GradientKind gradient = GradientKind::EF;

  int neurons = 10;  // d_N = d_Y = d_Z
  int hidden = 100;  // d_H
  int train_steps = 10000;
  int epochs = 20;
  int validation_steps = 200000;
  std::uint64_t seed = 1;

  double gain = 1.0;
  double learning_rate = 5e-5;
  double learning_rate_decay = 1.25;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  // Rows of trajectory.csv taken from the start of the final validation run.
  int trajectory_steps = 1000;

  // Track: dX = a X dt + b dW; Gaussian curves on [preferred_min, preferred_max].
  double drift = -1.0;
  double diffusion = 1.0;
  double time_step = 0.02;
  double preferred_min = -7.0;
  double preferred_max = 7.0;
  double tuning_variance = 2.0;

  // Pendulum.
  double gravity = 9.81;
  double friction = 0.1;
  double velocity_noise_variance = 1.0;
  double angle_concentration = 0.5;
  double velocity_min = -12.0;
  double velocity_max = 12.0;
  double velocity_tuning_variance = 4.0;

  bool operator==(const ExperimentConfig&) const = default;
};

inline const char* to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::Colour: return "colour";
    case ExperimentKind::Track: return "track";
    case ExperimentKind::Pendulum: return "pendulum";
  }
  return "?";
}

inline const char* to_string(CodeKind k) { return k == CodeKind::Naive ? "naive" : "orthogonal"; }
inline const char* to_string(GradientKind k) { return k == GradientKind::EF ? "ef" : "cd"; }

inline ExperimentKind parse_experiment(const std::string& s) {
  if (s == "colour" || s == "color") return ExperimentKind::Colour;
  if (s == "track") return ExperimentKind::Track;
  if (s == "pendulum") return ExperimentKind::Pendulum;
  throw ConfigError("unknown experiment '" + s + "'");
}

inline CodeKind parse_code(const std::string& s) {
  if (s == "naive") return CodeKind::Naive;
  if (s == "orthogonal") return CodeKind::Orthogonal;
  throw ConfigError("unknown code '" + s + "'");
}

inline GradientKind parse_gradient(const std::string& s) {
  if (s == "ef") return GradientKind::EF;
  if (s == "cd") return GradientKind::CD;
  throw ConfigError("unknown gradient '" + s + "'");
}

/// Per-experiment defaults (population sizes, hidden units, training length, gain).
inline ExperimentConfig default_config(ExperimentKind kind) {
  ExperimentConfig c;
  c.experiment = kind;
  switch (kind) {
    case ExperimentKind::Colour:
      c.neurons = 10, c.hidden = 100, c.train_steps = 10000, c.gain = 1.0;
      break;
    case ExperimentKind::Track:
      c.neurons = 10, c.hidden = 200, c.train_steps = 10000, c.gain = 2.0;
      break;
    case ExperimentKind::Pendulum:
      c.neurons = 20, c.hidden = 500, c.train_steps = 20000, c.gain = 2.0;
      break;
  }
  return c;
}

inline void validate(const ExperimentConfig& c) {
  auto positive = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string(what) + " must be positive");
  };
  positive(c.neurons > 0, "neurons");
  positive(c.hidden > 0, "hidden");
  positive(c.train_steps > 0, "train_steps");
  positive(c.validation_steps > 0, "validation_steps");
  positive(c.gain > 0.0, "gain");
  positive(c.learning_rate > 0.0, "learning_rate");
  positive(c.time_step > 0.0, "time_step");
  if (c.epochs < 0) throw ConfigError("epochs must be non-negative");
  if (c.trajectory_steps < 0) throw ConfigError("trajectory_steps must be non-negative");
  if (c.experiment == ExperimentKind::Pendulum && c.neurons % 2 != 0)
    throw ConfigError("pendulum needs an even neuron count (angle and velocity halves)");
  const int dim = c.experiment == ExperimentKind::Colour ? 2 : c.experiment == ExperimentKind::Track ? 2 : 4;
  if (c.code == CodeKind::Orthogonal && c.neurons <= dim + 1)
    throw ConfigError("orthogonal code needs more neurons than statistic_dim + 1");
}

// --- benchmark systems -------------------------------------------------------

/// Blue rates e^{0.4(i-1) - 5}; red is the reversed list; green is flat at the
/// blue mean. Every colour therefore has the same total rate.
inline DiscreteTable colour_curves(int neurons) {
  Matrix rates(neurons, 3);
  for (int i = 0; i < neurons; ++i) rates(i, 2) = std::exp(0.4 * i - 5.0);
  for (int i = 0; i < neurons; ++i) rates(i, 0) = rates(neurons - 1 - i, 2);
  rates.col(1).setConstant(rates.col(2).mean());
  return {rates};
}

struct System {
  StimulusProcess process;
  TuningCurveSet tuning;
  PopulationEncoding encoding;
  Stimulus initial;
};

inline System build_system(const ExperimentConfig& c) {
  validate(c);
  System sys;
  switch (c.experiment) {
    case ExperimentKind::Colour:
      sys.process = colour_chain();
      sys.tuning = colour_curves(c.neurons);
      sys.initial = Stimulus::state(1);
      break;
    case ExperimentKind::Track:
      sys.process = LinearSdeSpec{c.drift, c.diffusion, c.time_step};
      sys.tuning = GaussianGrid{linspace(c.preferred_min, c.preferred_max, c.neurons), c.tuning_variance};
      sys.initial = Stimulus::scalar(0.0);
      break;
    case ExperimentKind::Pendulum: {
      const int half = c.neurons / 2;
      sys.process = PendulumSpec{c.gravity, c.friction, c.velocity_noise_variance, c.time_step};
      sys.tuning = ConcatenatedGrid{VonMisesGrid{circular_grid(half), c.angle_concentration},
                                    GaussianGrid{linspace(c.velocity_min, c.velocity_max, half),
                                                 c.velocity_tuning_variance}};
      sys.initial = Stimulus::phase(0.0, 0.0);
      break;
    }
  }
  sys.encoding = natural_encoding(sys.tuning, c.gain);
  return sys;
}

// --- circuit -----------------------------------------------------------------

struct Circuit {
  CircuitWiring wiring;
  MlpParams network;
  AdamState adam;
};

/// Independent, reproducible streams derived from the master seed.
enum class Stream : std::uint64_t { Init = 1, Train = 2, Validate = 3, Tuning = 4, Oracle = 5 };

inline Rng derive_rng(std::uint64_t seed, Stream stream, std::uint64_t index = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return Rng(seq);
}

inline Circuit make_circuit(const ExperimentConfig& c, const System& sys) {
  Rng rng = derive_rng(c.seed, Stream::Init);
  Circuit circuit;
  circuit.wiring = build_wiring(sys.encoding, c.code);
  const int d = circuit.wiring.size();
  circuit.network = init_network(d, c.hidden, d, rng);
  circuit.adam = AdamState::fresh(circuit.network);
  return circuit;
}

// --- error measures ----------------------------------------------------------

/// Posterior-mean summary of a belief; improper Gaussian blocks are regularized first.
inline Stimulus belief_mean(const NaturalParams& belief) {
  const NaturalParams p = regularize(belief);
  const Vector& t = p.theta;
  switch (p.family.kind) {
    case FamilyKind::Gaussian1D:
      return Stimulus::scalar(gaussian_moments(t(0), t(1)).mean);
    case FamilyKind::VonMises:
      return Stimulus::scalar(von_mises_polar(t(0), t(1)).mean);
    case FamilyKind::VonMisesGaussian:
      return Stimulus::phase(von_mises_polar(t(0), t(1)).mean, gaussian_moments(t(2), t(3)).mean);
    case FamilyKind::Categorical: {
      Eigen::Index best = 0;
      categorical_probabilities(t).maxCoeff(&best);
      return Stimulus::state(static_cast<int>(best));
    }
  }
  return {};
}

/// Negative log-likelihood of the true stimulus (colour, track) or half the
/// squared error of the belief mean with wrapped angle difference (pendulum).
inline double belief_error(ExperimentKind kind, const Stimulus& truth, const NaturalParams& belief) {
  if (kind == ExperimentKind::Pendulum) {
    const Stimulus m = belief_mean(belief);
    const double dq = wrap_angle(truth.x - m.x);
    const double dv = truth.v - m.v;
    return 0.5 * (dq * dq + dv * dv);
  }
  return negative_log_density(regularize(belief), truth);
}

// --- validation --------------------------------------------------------------

struct Metrics {
  double e_z = 0.0;
  double e_n = 0.0;
  double e_opt = 0.0;
  double r = 0.0;
  bool diverged = false;
};

inline double performance_ratio(double e_z, double e_n, double e_opt) { return (e_z - e_n) / (e_opt - e_n); }

/// Where the decoded circuit beliefs come from during validation.
enum class BeliefSource {
  Network,         // y_k = g(z_{k-1})
  ZeroPrediction,  // y_k = 0: instantaneous decoding
  Oracle           // the reference filter's beliefs stand in for Θ_Z·z
};

/// Bins over the stimulus space for hidden-unit tuning estimates. Colour uses
/// one bin per state; track uses `x_bins` over [x_min, x_max); pendulum uses an
/// angle x velocity grid.
struct TuningBins {
  int x_bins = 3;
  double x_min = 0.0;
  double x_max = 3.0;
  int v_bins = 1;
  double v_min = -6.0;
  double v_max = 6.0;

  int count() const { return x_bins * v_bins; }

  /// Bin index or -1 when the stimulus falls outside the grid.
  int index(const Stimulus& s) const {
    auto slot = [](double value, double lo, double hi, int n) {
      if (!(value >= lo && value < hi)) return -1;
      return std::min(n - 1, static_cast<int>((value - lo) / (hi - lo) * n));
    };
    const int ix = slot(s.x, x_min, x_max, x_bins);
    const int iv = v_bins == 1 ? 0 : slot(s.v, v_min, v_max, v_bins);
    if (ix < 0 || iv < 0) return -1;
    return ix * v_bins + iv;
  }

  double x_center(int bin) const { return x_min + (bin / v_bins + 0.5) * (x_max - x_min) / x_bins; }
  double v_center(int bin) const { return v_min + (bin % v_bins + 0.5) * (v_max - v_min) / v_bins; }
};

inline TuningBins default_bins(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::Colour: return {3, 0.0, 3.0, 1, 0.0, 0.0};
    case ExperimentKind::Track: return {20, -3.0, 3.0, 1, 0.0, 0.0};
    case ExperimentKind::Pendulum: return {16, -kPi, kPi, 6, -6.0, 6.0};
  }
  return {};
}

/// "N" for 1-D bins, "NxM" for the pendulum angle x velocity grid; ranges from the defaults.
inline TuningBins parse_bins(ExperimentKind kind, const std::string& spec) {
  TuningBins b = default_bins(kind);
  if (spec.empty()) return b;
  try {
    const auto x = spec.find('x');
    b.x_bins = std::stoi(spec.substr(0, x));
    if (x != std::string::npos) b.v_bins = std::stoi(spec.substr(x + 1));
  } catch (const std::exception&) {
    throw ConfigError("bad bin spec '" + spec + "'");
  }
  if (b.x_bins <= 0 || b.v_bins <= 0) throw ConfigError("bin counts must be positive");
  if (kind == ExperimentKind::Colour && (b.x_bins != 3 || b.v_bins != 1))
    throw ConfigError("colour tuning uses exactly 3 bins");
  if (kind != ExperimentKind::Pendulum && b.v_bins != 1)
    throw ConfigError("velocity bins only apply to the pendulum");
  return b;
}

/// Mean hidden activation per (unit, bin); NaN marks empty bins.
struct TuningTable {
  TuningBins bins;
  Matrix mean;                  // d_H x bins
  std::vector<long> occupancy;  // samples per bin
};

class TuningAccumulator {
 public:
  TuningAccumulator(TuningBins bins, int hidden)
      : bins_(bins), sum_(Matrix::Zero(hidden, bins.count())), count_(bins.count(), 0) {}

  void add(const Stimulus& s, const Vector& hidden) {
    const int b = bins_.index(s);
    if (b < 0) return;
    sum_.col(b) += hidden;
    ++count_[b];
  }

  TuningTable table() const {
    TuningTable t{bins_, sum_, count_};
    for (int b = 0; b < bins_.count(); ++b)
      t.mean.col(b) = count_[b] > 0 ? Vector(sum_.col(b) / static_cast<double>(count_[b]))
                                    : Vector::Constant(sum_.rows(), std::numeric_limits<double>::quiet_NaN());
    return t;
  }

 private:
  TuningBins bins_;
  Matrix sum_;
  std::vector<long> count_;
};

/// One row of trajectory.csv.
struct TrajectoryRow {
  Stimulus stimulus;
  NaturalParams belief;  // Θ_Z·z_k
  NaturalParams oracle;  // reference filter θ_k
  Response spikes;
};

struct ValidationOptions {
  BeliefSource source = BeliefSource::Network;
  int record_steps = 0;                    // trajectory rows to keep
  TuningAccumulator* tuning = nullptr;     // optional hidden-unit binning
};

struct ValidationResult {
  Metrics metrics;
  std::vector<TrajectoryRow> trajectory;
};

/// Runs one trajectory of `steps` time-steps with no resets (y_0 = 0) and
/// averages the error of circuit, instantaneous, and reference beliefs.
inline ValidationResult run_validation(const System& sys, const Circuit& circuit, ExperimentKind kind, int steps,
                                       Rng& rng, const ValidationOptions& opt = {}) {
  const CircuitWiring& w = circuit.wiring;
  const Family fam = sys.encoding.family;
  const NaturalParams flat = flat_params(fam);

  ValidationResult out;
  double sum_z = 0.0, sum_n = 0.0, sum_opt = 0.0;
  bool diverged = false;

  Stimulus x = sys.initial;
  Stimulus previous_x = x;
  Vector z_prev;
  NaturalParams oracle = flat;

  for (int k = 0; k < steps; ++k) {
    x = step(sys.process, x, rng);
    const Response n = sample_response(sys.encoding.rates(x), rng);

    oracle = k == 0 ? response_posterior(sys.encoding, flat, n)
                    : response_posterior(sys.encoding, predict(sys.process, oracle), n);

    NaturalParams belief;
    if (opt.source == BeliefSource::Oracle) {
      belief = oracle;
    } else if (!diverged) {
      Vector y = Vector::Zero(w.b.cols());
      if (k > 0 && opt.source == BeliefSource::Network) {
        ForwardPass fp = forward(circuit.network, z_prev);
        if (opt.tuning) opt.tuning->add(previous_x, fp.hidden);
        y = std::move(fp.rates);
      }
      Vector z = neural_bayes_update(w, n, y);
      if (!z.allFinite()) {
        diverged = true;
      } else {
        belief = decode(w.theta_z, fam, z);
        z_prev = std::move(z);
      }
    }

    const NaturalParams instantaneous = response_posterior(sys.encoding, flat, n);
    sum_n += belief_error(kind, x, instantaneous);
    sum_opt += belief_error(kind, x, oracle);
    if (!diverged) {
      const double e = belief_error(kind, x, belief);
      if (!std::isfinite(e)) diverged = true;
      sum_z += e;
    }

    if (k < opt.record_steps)
      out.trajectory.push_back({x, diverged ? flat : belief, oracle, n});
    previous_x = x;
  }

  const double nv = static_cast<double>(steps);
  Metrics& m = out.metrics;
  m.e_n = sum_n / nv;
  m.e_opt = sum_opt / nv;
  m.diverged = diverged;
  if (diverged) {
    m.e_z = std::numeric_limits<double>::quiet_NaN();
    m.r = std::numeric_limits<double>::quiet_NaN();
  } else {
    m.e_z = sum_z / nv;
    m.r = performance_ratio(m.e_z, m.e_n, m.e_opt);
  }
  return out;
}

/// Validation with the epoch's own stream derived from the master seed.
inline Metrics validate(const System& sys, const Circuit& circuit, const ExperimentConfig& c, int epoch,
                        const ValidationOptions& opt = {}) {
  Rng rng = derive_rng(c.seed, Stream::Validate, static_cast<std::uint64_t>(epoch));
  return run_validation(sys, circuit, c.experiment, c.validation_steps, rng, opt).metrics;
}

inline TuningTable estimate_hidden_tuning(const System& sys, const Circuit& circuit, ExperimentKind kind,
                                          const TuningBins& bins, int steps, Rng& rng) {
  TuningAccumulator acc(bins, circuit.network.hidden());
  ValidationOptions opt;
  opt.tuning = &acc;
  run_validation(sys, circuit, kind, steps, rng, opt);
  return acc.table();
}

// --- training ----------------------------------------------------------------

struct EpochStats {
  int epoch = 0;
  int reset_period = 1;
  double learning_rate = 0.0;
  long saturated_steps = 0;
  double mean_signal_norm = 0.0;
};

/// Steps between prediction resets: (epoch-1)^2, with epoch 1 meaning every step.
inline int reset_period(int epoch) { return std::max(1, (epoch - 1) * (epoch - 1)); }

/// One training simulation of c.train_steps steps. At each step the prediction
/// y_k = g(z_{k-1}) is scored against n_k, the learning signal is pushed through
/// g at z_{k-1}, and Adam takes one step. Every reset_period(epoch) steps the
/// recursion restarts from y = 0.
inline EpochStats train_epoch(const System& sys, Circuit& circuit, const ExperimentConfig& c, int epoch) {
  if (epoch < 1) throw PreconditionError("epochs are counted from 1");
  Rng rng = derive_rng(c.seed, Stream::Train, static_cast<std::uint64_t>(epoch));
  const CircuitWiring& w = circuit.wiring;
  const Vector zero_y = Vector::Zero(w.b.cols());

  EpochStats stats;
  stats.epoch = epoch;
  stats.reset_period = reset_period(epoch);
  stats.learning_rate = epoch_learning_rate(epoch, c.learning_rate, c.learning_rate_decay);
  const AdamConfig adam{stats.learning_rate, c.beta1, c.beta2, c.epsilon};

  Stimulus x = step(sys.process, sys.initial, rng);
  Response n_prev = sample_response(sys.encoding.rates(x), rng);
  Vector z_prev = neural_bayes_update(w, n_prev, zero_y);
  double signal_norm = 0.0;

  for (int k = 1; k < c.train_steps; ++k) {
    x = step(sys.process, x, rng);
    const Response n = sample_response(sys.encoding.rates(x), rng);
    if ((k - 1) % stats.reset_period == 0) z_prev = neural_bayes_update(w, n_prev, zero_y);

    const ForwardPass fp = forward(circuit.network, z_prev);
    if (fp.saturated) ++stats.saturated_steps;
    const GradientSignal signal =
        c.gradient == GradientKind::EF
            ? ef_signal(sys.encoding, w, n, fp.rates, ImproperPolicy::Regularize)
            : cd_signal(sys.encoding, w, n, fp.rates, epoch, rng, ImproperPolicy::Regularize);
    signal_norm += signal.delta.norm();

    adam_update(circuit.network, circuit.adam, backward(circuit.network, z_prev, -signal.delta), adam);
    if (!circuit.network.all_finite())
      throw DivergenceError("non-finite network parameters at epoch " + std::to_string(epoch) + ", step " +
                            std::to_string(k));

    z_prev = neural_bayes_update(w, n, fp.rates);
    n_prev = n;
  }
  stats.mean_signal_norm = signal_norm / std::max(1, c.train_steps - 1);
  return stats;
}

struct TrainingReport {
  ExperimentConfig config;
  std::vector<Metrics> metrics;  // index 0 is the untrained baseline
  std::vector<EpochStats> epochs;
  MlpParams network;
  std::vector<TrajectoryRow> trajectory;
  TuningTable tuning;
  std::string version = kVersion;

  const Metrics& final_metrics() const { return metrics.back(); }

  /// Largest r over trained epochs (the baseline when there are none).
  double best_r() const {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = metrics.size() > 1 ? 1 : 0; i < metrics.size(); ++i)
      if (std::isfinite(metrics[i].r)) best = std::max(best, metrics[i].r);
    return best;
  }
};

using EpochCallback = std::function<void(int epoch, const Metrics&, const EpochStats*)>;

/// Validates the fresh circuit, then alternates training epochs and validation.
/// The last validation also records the trajectory rows and hidden tuning.
inline TrainingReport run_training(const ExperimentConfig& c, const EpochCallback& on_epoch = {}) {
  const System sys = build_system(c);
  Circuit circuit = make_circuit(c, sys);
  TrainingReport report;
  report.config = c;

  TuningAccumulator acc(default_bins(c.experiment), c.hidden);
  auto validate_epoch = [&](int epoch) {
    const bool last = epoch == c.epochs;
    ValidationOptions opt;
    if (last) {
      opt.record_steps = c.trajectory_steps;
      opt.tuning = &acc;
    }
    Rng rng = derive_rng(c.seed, Stream::Validate, static_cast<std::uint64_t>(epoch));
    ValidationResult v = run_validation(sys, circuit, c.experiment, c.validation_steps, rng, opt);
    if (last) report.trajectory = std::move(v.trajectory);
    report.metrics.push_back(v.metrics);
  };

  validate_epoch(0);
  if (on_epoch) on_epoch(0, report.metrics.back(), nullptr);
  for (int e = 1; e <= c.epochs; ++e) {
    report.epochs.push_back(train_epoch(sys, circuit, c, e));
    validate_epoch(e);
    if (on_epoch) on_epoch(e, report.metrics.back(), &report.epochs.back());
  }
  report.network = circuit.network;
  report.tuning = acc.table();
  return report;
}

}  // namespace lppc
