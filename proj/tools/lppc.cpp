// lppc: train, validate and inspect neural filtering circuits.
//
//   lppc train --experiment colour --code orthogonal --gradient ef --seed 1 --out runs/colour
//   lppc validate --checkpoint runs/colour/checkpoint.json --steps 200000
//   lppc oracle --experiment track --steps 1000
//   lppc tuning --checkpoint runs/pendulum/checkpoint.json --bins 16x6
//   lppc sweep --experiment colour --out runs/colour-sweep

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "lppc/experiment.hpp"
#include "lppc/report.hpp"

namespace {

using namespace lppc;

constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;

struct Overrides {
  std::string experiment;
  std::string code;
  std::string gradient;
  std::optional<std::uint64_t> seed;
  std::optional<int> neurons, hidden, train_steps, epochs, validation_steps, trajectory_steps;
  std::optional<double> gain, learning_rate;
  std::string config_file;
};

void add_config_options(CLI::App* cmd, Overrides& o, bool with_code) {
  cmd->add_option("--experiment", o.experiment, "colour | track | pendulum");
  if (with_code) {
    cmd->add_option("--code", o.code, "naive | orthogonal");
    cmd->add_option("--gradient", o.gradient, "ef | cd");
  }
  cmd->add_option("--seed", o.seed, "master seed");
  cmd->add_option("--config", o.config_file, "JSON config; flags override its values");
  cmd->add_option("--neurons", o.neurons, "d_N");
  cmd->add_option("--hidden", o.hidden, "d_H");
  cmd->add_option("--train-steps", o.train_steps, "n_t");
  cmd->add_option("--epochs", o.epochs, "training epochs");
  cmd->add_option("--validation-steps", o.validation_steps, "n_v");
  cmd->add_option("--trajectory-steps", o.trajectory_steps, "rows kept in trajectory.csv");
  cmd->add_option("--gain", o.gain, "tuning curve gain");
  cmd->add_option("--learning-rate", o.learning_rate, "Adam step size at epoch 1");
}

ExperimentConfig resolve(const Overrides& o) {
  Json j = Json::object();
  if (!o.config_file.empty()) j = read_json_file(o.config_file);
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  if (!o.experiment.empty()) j["experiment"] = o.experiment;
  if (!j.contains("experiment")) j["experiment"] = "colour";
  const ExperimentConfig base = default_config(parse_experiment(j["experiment"].get<std::string>()));
  if (!o.code.empty()) j["code"] = o.code;
  if (!o.gradient.empty()) j["gradient"] = o.gradient;
  if (o.seed) j["seed"] = *o.seed;
  if (o.neurons) j["neurons"] = *o.neurons;
  if (o.hidden) j["hidden"] = *o.hidden;
  if (o.train_steps) j["train_steps"] = *o.train_steps;
  if (o.epochs) j["epochs"] = *o.epochs;
  if (o.validation_steps) j["validation_steps"] = *o.validation_steps;
  if (o.trajectory_steps) j["trajectory_steps"] = *o.trajectory_steps;
  if (o.gain) j["gain"] = *o.gain;
  if (o.learning_rate) j["learning_rate"] = *o.learning_rate;
  return config_from_json(j, base);
}

void print_metrics_line(int epoch, const Metrics& m) {
  std::fprintf(stderr, "epoch %2d  E_Z %.6f  E_N %.6f  E_Opt %.6f  r %.4f%s\n", epoch, m.e_z, m.e_n, m.e_opt, m.r,
               m.diverged ? "  (diverged)" : "");
}

TrainingReport train_and_emit(const ExperimentConfig& c, const std::filesystem::path& out, bool quiet) {
  auto progress = [&](int epoch, const Metrics& m, const EpochStats*) {
    if (!quiet) print_metrics_line(epoch, m);
  };
  TrainingReport report = run_training(c, progress);
  emit_report(report, out);
  return report;
}

int cmd_train(const Overrides& o, const std::string& out, bool quiet) {
  const ExperimentConfig c = resolve(o);
  const TrainingReport r = train_and_emit(c, out, quiet);
  const Metrics& m = r.final_metrics();
  std::printf("final r %s  best r %s\n", format_double(m.r).c_str(), format_double(r.best_r()).c_str());
  return 0;
}

int cmd_validate(const std::string& checkpoint, int steps, std::optional<std::uint64_t> seed) {
  const Checkpoint cp = checkpoint_from_json(read_json_file(checkpoint));
  ExperimentConfig c = cp.config;
  if (steps > 0) c.validation_steps = steps;
  if (seed) c.seed = *seed;
  const System sys = build_system(c);
  const Circuit circuit = restore_circuit(cp, sys);
  const Metrics m = validate(sys, circuit, c, cp.epoch);
  write_metrics_csv(std::cout, {m});
  return 0;
}

int cmd_oracle(const Overrides& o, int steps) {
  ExperimentConfig c = resolve(o);
  const System sys = build_system(c);
  Rng rng = derive_rng(c.seed, Stream::Oracle);
  const Trajectory t = simulate(sys.process, sys.encoding, sys.initial, steps, rng);
  const BeliefTrajectory beliefs = run_oracle(sys.process, sys.encoding, t.responses, flat_params(sys.encoding.family));
  std::vector<TrajectoryRow> rows;
  rows.reserve(t.size());
  for (std::size_t k = 0; k < t.size(); ++k) rows.push_back({t.stimuli[k], beliefs[k], beliefs[k], t.responses[k]});
  write_trajectory_csv(std::cout, rows, sys.encoding.family, c.time_step);
  return 0;
}

int cmd_tuning(const std::string& checkpoint, const std::string& bins, int steps) {
  const Checkpoint cp = checkpoint_from_json(read_json_file(checkpoint));
  const ExperimentConfig& c = cp.config;
  const System sys = build_system(c);
  const Circuit circuit = restore_circuit(cp, sys);
  Rng rng = derive_rng(c.seed, Stream::Tuning);
  const TuningTable t = estimate_hidden_tuning(sys, circuit, c.experiment, parse_bins(c.experiment, bins),
                                               steps > 0 ? steps : c.validation_steps, rng);
  write_tuning_csv(std::cout, t, c.experiment);
  return 0;
}

/// All four code x gradient variants, each in its own subdirectory.
int cmd_sweep(const Overrides& o, const std::string& out, bool quiet) {
  const std::filesystem::path root = out.empty() ? std::filesystem::path("sweep") : std::filesystem::path(out);
  const ExperimentConfig base = resolve(o);
  std::printf("variant,final_r,best_r,diverged\n");
  int status = 0;
  for (CodeKind code : {CodeKind::Naive, CodeKind::Orthogonal}) {
    for (GradientKind gradient : {GradientKind::EF, GradientKind::CD}) {
      ExperimentConfig c = base;
      c.code = code;
      c.gradient = gradient;
      const std::string name = std::string(to_string(code)) + "-" + to_string(gradient);
      if (!quiet) std::fprintf(stderr, "== %s\n", name.c_str());
      try {
        const TrainingReport r = train_and_emit(c, root / name, quiet);
        std::printf("%s,%s,%s,%d\n", name.c_str(), format_double(r.final_metrics().r).c_str(),
                    format_double(r.best_r()).c_str(), r.final_metrics().diverged ? 1 : 0);
      } catch (const DivergenceError& e) {
        std::fprintf(stderr, "%s: %s\n", name.c_str(), e.what());
        std::printf("%s,nan,nan,1\n", name.c_str());
        status = kExitDivergence;
      }
    }
  }
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural Bayes filters built from linear probabilistic population codes"};
  app.set_version_flag("--version", lppc::kVersion);
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "suppress per-epoch progress");

  Overrides train_o, oracle_o, sweep_o;
  std::string train_out = "run", sweep_out;
  auto* train = app.add_subcommand("train", "train a circuit and write a report directory");
  add_config_options(train, train_o, true);
  train->add_option("--out", train_out, "output directory");

  std::string checkpoint;
  int steps = 0;
  std::optional<std::uint64_t> validate_seed;
  auto* validate_cmd = app.add_subcommand("validate", "validate a checkpoint; prints one metrics row");
  validate_cmd->add_option("--checkpoint", checkpoint, "checkpoint.json")->required();
  validate_cmd->add_option("--steps", steps, "validation steps (default: the checkpoint's n_v)");
  validate_cmd->add_option("--seed", validate_seed, "override the master seed");

  int oracle_steps = 1000;
  auto* oracle = app.add_subcommand("oracle", "print a reference-filter trajectory as CSV");
  add_config_options(oracle, oracle_o, false);
  oracle->add_option("--steps", oracle_steps, "time-steps")->check(CLI::PositiveNumber);

  std::string tuning_checkpoint, bins;
  int tuning_steps = 0;
  auto* tuning = app.add_subcommand("tuning", "print hidden-unit tuning curves as CSV");
  tuning->add_option("--checkpoint", tuning_checkpoint, "checkpoint.json")->required();
  tuning->add_option("--bins", bins, "bin count, or AxV for the pendulum");
  tuning->add_option("--steps", tuning_steps, "simulation steps (default: the checkpoint's n_v)");

  auto* sweep = app.add_subcommand("sweep", "train all four code x gradient variants of one experiment");
  add_config_options(sweep, sweep_o, false);
  sweep->add_option("--out", sweep_out, "root output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*train) return cmd_train(train_o, train_out, quiet);
    if (*validate_cmd) return cmd_validate(checkpoint, steps, validate_seed);
    if (*oracle) return cmd_oracle(oracle_o, oracle_steps);
    if (*tuning) return cmd_tuning(tuning_checkpoint, bins, tuning_steps);
    if (*sweep) return cmd_sweep(sweep_o, sweep_out, quiet);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const DivergenceError& e) {
    std::fprintf(stderr, "diverged: %s\n", e.what());
    return kExitDivergence;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
