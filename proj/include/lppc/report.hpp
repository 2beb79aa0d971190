#pragma once

// Config and checkpoint JSON, plus the CSV report files written after a run.

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "lppc/errors.hpp"
#include "lppc/experiment.hpp"

namespace lppc {

using Json = nlohmann::ordered_json;

// --- numbers and CSV ---------------------------------------------------------

/// Shortest form is not needed; 17 significant digits round-trip any double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& os) : os_(os) {}

  template <class... Cells>
  void row(const Cells&... cells) {
    bool first = true;
    ((put(cells, first), first = false), ...);
    os_ << "\r\n";
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) os_ << ',';
      os_ << quote(cells[i]);
    }
    os_ << "\r\n";
  }

  static std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
    return out + '"';
  }

 private:
  template <class T>
  void put(const T& v, bool first) {
    if (!first) os_ << ',';
    if constexpr (std::is_floating_point_v<T>) os_ << format_double(v);
    else if constexpr (std::is_convertible_v<T, std::string>) os_ << quote(std::string(v));
    else os_ << v;
  }

  std::ostream& os_;
};

// --- config ------------------------------------------------------------------

inline Json to_json(const ExperimentConfig& c) {
  return Json{{"experiment", to_string(c.experiment)},
              {"code", to_string(c.code)},
              {"gradient", to_string(c.gradient)},
              {"neurons", c.neurons},
              {"hidden", c.hidden},
              {"train_steps", c.train_steps},
              {"epochs", c.epochs},
              {"validation_steps", c.validation_steps},
              {"seed", c.seed},
              {"gain", c.gain},
              {"learning_rate", c.learning_rate},
              {"learning_rate_decay", c.learning_rate_decay},
              {"beta1", c.beta1},
              {"beta2", c.beta2},
              {"epsilon", c.epsilon},
              {"trajectory_steps", c.trajectory_steps},
              {"drift", c.drift},
              {"diffusion", c.diffusion},
              {"time_step", c.time_step},
              {"preferred_min", c.preferred_min},
              {"preferred_max", c.preferred_max},
              {"tuning_variance", c.tuning_variance},
              {"gravity", c.gravity},
              {"friction", c.friction},
              {"velocity_noise_variance", c.velocity_noise_variance},
              {"angle_concentration", c.angle_concentration},
              {"velocity_min", c.velocity_min},
              {"velocity_max", c.velocity_max},
              {"velocity_tuning_variance", c.velocity_tuning_variance}};
}

/// Applies the keys present in `j` on top of `base`. The experiment key, when
/// present, first resets `base` to that experiment's defaults.
inline ExperimentConfig config_from_json(const Json& j, ExperimentConfig base = default_config(ExperimentKind::Colour)) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  try {
    if (j.contains("experiment")) {
      const ExperimentKind kind = parse_experiment(j.at("experiment").get<std::string>());
      if (kind != base.experiment) {
        const auto seed = base.seed;
        base = default_config(kind);
        base.seed = seed;
      }
    }
    for (const auto& [key, value] : j.items()) {
      auto& c = base;
      if (key == "experiment" || key == "version") continue;
      else if (key == "code") c.code = parse_code(value.get<std::string>());
      else if (key == "gradient") c.gradient = parse_gradient(value.get<std::string>());
      else if (key == "neurons") c.neurons = value.get<int>();
      else if (key == "hidden") c.hidden = value.get<int>();
      else if (key == "train_steps") c.train_steps = value.get<int>();
      else if (key == "epochs") c.epochs = value.get<int>();
      else if (key == "validation_steps") c.validation_steps = value.get<int>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "gain") c.gain = value.get<double>();
      else if (key == "learning_rate") c.learning_rate = value.get<double>();
      else if (key == "learning_rate_decay") c.learning_rate_decay = value.get<double>();
      else if (key == "beta1") c.beta1 = value.get<double>();
      else if (key == "beta2") c.beta2 = value.get<double>();
      else if (key == "epsilon") c.epsilon = value.get<double>();
      else if (key == "trajectory_steps") c.trajectory_steps = value.get<int>();
      else if (key == "drift") c.drift = value.get<double>();
      else if (key == "diffusion") c.diffusion = value.get<double>();
      else if (key == "time_step") c.time_step = value.get<double>();
      else if (key == "preferred_min") c.preferred_min = value.get<double>();
      else if (key == "preferred_max") c.preferred_max = value.get<double>();
      else if (key == "tuning_variance") c.tuning_variance = value.get<double>();
      else if (key == "gravity") c.gravity = value.get<double>();
      else if (key == "friction") c.friction = value.get<double>();
      else if (key == "velocity_noise_variance") c.velocity_noise_variance = value.get<double>();
      else if (key == "angle_concentration") c.angle_concentration = value.get<double>();
      else if (key == "velocity_min") c.velocity_min = value.get<double>();
      else if (key == "velocity_max") c.velocity_max = value.get<double>();
      else if (key == "velocity_tuning_variance") c.velocity_tuning_variance = value.get<double>();
      else throw ConfigError("unknown config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  validate(base);
  return base;
}

inline Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

// --- checkpoint --------------------------------------------------------------

namespace detail {

inline Json matrix_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix json_matrix(const Json& j, Eigen::Index rows, Eigen::Index cols) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows) throw ConfigError("checkpoint matrix shape");
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Json& row = j[r];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) throw ConfigError("checkpoint matrix shape");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[c].get<double>();
  }
  return m;
}

inline Json vector_json(const Vector& v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); }

inline Vector json_vector(const Json& j, Eigen::Index size) {
  const auto values = j.get<std::vector<double>>();
  if (static_cast<Eigen::Index>(values.size()) != size) throw ConfigError("checkpoint vector shape");
  return Eigen::Map<const Vector>(values.data(), size);
}

}  // namespace detail

struct Checkpoint {
  ExperimentConfig config;
  MlpParams network;
  int epoch = 0;
};

inline Json to_json(const Checkpoint& c) {
  return Json{{"version", kVersion},
              {"epoch", c.epoch},
              {"config", to_json(c.config)},
              {"network",
               {{"hidden_weights", detail::matrix_json(c.network.hidden_weights)},
                {"hidden_bias", detail::vector_json(c.network.hidden_bias)},
                {"output_weights", detail::matrix_json(c.network.output_weights)},
                {"output_bias", detail::vector_json(c.network.output_bias)}}}};
}

inline Checkpoint checkpoint_from_json(const Json& j) {
  try {
    Checkpoint c;
    c.config = config_from_json(j.at("config"));
    c.epoch = j.value("epoch", 0);
    const Json& n = j.at("network");
    const int d = c.config.neurons, h = c.config.hidden;
    c.network.hidden_weights = detail::json_matrix(n.at("hidden_weights"), h, d);
    c.network.hidden_bias = detail::json_vector(n.at("hidden_bias"), h);
    c.network.output_weights = detail::json_matrix(n.at("output_weights"), d, h);
    c.network.output_bias = detail::json_vector(n.at("output_bias"), d);
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad checkpoint: ") + e.what());
  }
}

/// Rebuilds the circuit a checkpoint was trained with.
inline Circuit restore_circuit(const Checkpoint& cp, const System& sys) {
  Circuit c;
  c.wiring = build_wiring(sys.encoding, cp.config.code);
  c.network = cp.network;
  c.adam = AdamState::fresh(c.network);
  return c;
}

// --- report files ------------------------------------------------------------

namespace detail {

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

inline void close_output(std::ofstream& out, const std::filesystem::path& path) {
  out.close();
  if (!out) throw std::runtime_error("error writing " + path.string());
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  auto out = open_output(path);
  out << text;
  close_output(out, path);
}

/// Mean and variance per stimulus component: (mean) for categorical
/// probabilities of each state, (mean, variance) for scalars, and circular
/// mean with 1 - resultant length for angles.
inline std::vector<std::string> belief_columns(const std::string& prefix, Family fam) {
  switch (fam.kind) {
    case FamilyKind::Categorical: {
      std::vector<std::string> cols;
      for (int s = 0; s < fam.states; ++s) cols.push_back(prefix + "_p" + std::to_string(s));
      return cols;
    }
    case FamilyKind::Gaussian1D: return {prefix + "_mean", prefix + "_var"};
    case FamilyKind::VonMises: return {prefix + "_mean", prefix + "_circvar"};
    case FamilyKind::VonMisesGaussian:
      return {prefix + "_angle_mean", prefix + "_angle_circvar", prefix + "_velocity_mean", prefix + "_velocity_var"};
  }
  return {};
}

inline std::vector<double> belief_summary(const NaturalParams& belief) {
  const NaturalParams p = regularize(belief);
  const Vector& t = p.theta;
  switch (p.family.kind) {
    case FamilyKind::Categorical: {
      const Vector probs = categorical_probabilities(t);
      return {probs.data(), probs.data() + probs.size()};
    }
    case FamilyKind::Gaussian1D: {
      const auto g = gaussian_moments(t(0), t(1));
      return {g.mean, g.variance};
    }
    case FamilyKind::VonMises: {
      const auto polar = von_mises_polar(t(0), t(1));
      return {polar.mean, 1.0 - von_mises_quadrature(polar.concentration).resultant};
    }
    case FamilyKind::VonMisesGaussian: {
      const auto polar = von_mises_polar(t(0), t(1));
      const auto g = gaussian_moments(t(2), t(3));
      return {polar.mean, 1.0 - von_mises_quadrature(polar.concentration).resultant, g.mean, g.variance};
    }
  }
  return {};
}

}  // namespace detail

inline void write_metrics_csv(std::ostream& os, const std::vector<Metrics>& metrics) {
  CsvWriter csv(os);
  csv.row(std::vector<std::string>{"epoch", "E_Z", "E_N", "E_Opt", "r", "diverged", "best_r"});
  double best = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t e = 0; e < metrics.size(); ++e) {
    const Metrics& m = metrics[e];
    if (e > 0 && std::isfinite(m.r) && !(m.r <= best)) best = m.r;
    csv.row(static_cast<int>(e), m.e_z, m.e_n, m.e_opt, m.r, m.diverged ? 1 : 0, e == 0 ? m.r : best);
  }
}

inline void write_trajectory_csv(std::ostream& os, const std::vector<TrajectoryRow>& rows, Family fam,
                                 double time_step) {
  CsvWriter csv(os);
  std::vector<std::string> header{"time"};
  if (fam.kind == FamilyKind::VonMisesGaussian) header.insert(header.end(), {"angle", "velocity"});
  else if (fam.kind == FamilyKind::Categorical) header.push_back("state");
  else header.push_back("x");
  for (const auto& c : detail::belief_columns("circuit", fam)) header.push_back(c);
  for (const auto& c : detail::belief_columns("oracle", fam)) header.push_back(c);
  const int neurons = rows.empty() ? 0 : static_cast<int>(rows.front().spikes.size());
  for (int i = 0; i < neurons; ++i) header.push_back("n" + std::to_string(i));
  csv.row(header);

  for (std::size_t k = 0; k < rows.size(); ++k) {
    const TrajectoryRow& row = rows[k];
    std::vector<std::string> cells{format_double(fam.kind == FamilyKind::Categorical ? static_cast<double>(k)
                                                                                      : (k + 1) * time_step)};
    if (fam.kind == FamilyKind::VonMisesGaussian) {
      cells.push_back(format_double(row.stimulus.x));
      cells.push_back(format_double(row.stimulus.v));
    } else if (fam.kind == FamilyKind::Categorical) {
      cells.push_back(std::to_string(row.stimulus.state_index()));
    } else {
      cells.push_back(format_double(row.stimulus.x));
    }
    for (double v : detail::belief_summary(row.belief)) cells.push_back(format_double(v));
    for (double v : detail::belief_summary(row.oracle)) cells.push_back(format_double(v));
    for (Eigen::Index i = 0; i < row.spikes.size(); ++i) cells.push_back(std::to_string(row.spikes(i)));
    csv.row(cells);
  }
}

/// One row per bin: bin centre(s), occupancy, then one column per hidden unit.
/// Empty bins leave the unit columns blank.
inline void write_tuning_csv(std::ostream& os, const TuningTable& t, ExperimentKind kind) {
  CsvWriter csv(os);
  std::vector<std::string> header;
  if (kind == ExperimentKind::Colour) header.push_back("state");
  else if (kind == ExperimentKind::Track) header.push_back("x");
  else header.insert(header.end(), {"angle", "velocity"});
  header.push_back("count");
  for (Eigen::Index h = 0; h < t.mean.rows(); ++h) header.push_back("h" + std::to_string(h));
  csv.row(header);

  for (int b = 0; b < t.bins.count(); ++b) {
    std::vector<std::string> cells;
    if (kind == ExperimentKind::Colour) {
      cells.push_back(std::to_string(b));
    } else {
      cells.push_back(format_double(t.bins.x_center(b)));
      if (kind == ExperimentKind::Pendulum) cells.push_back(format_double(t.bins.v_center(b)));
    }
    cells.push_back(std::to_string(t.occupancy[b]));
    for (Eigen::Index h = 0; h < t.mean.rows(); ++h)
      cells.push_back(t.occupancy[b] > 0 ? format_double(t.mean(h, b)) : std::string());
    csv.row(cells);
  }
}

template <class Writer>
std::string render(Writer&& w) {
  std::ostringstream os;
  w(os);
  return os.str();
}

/// Writes metrics.csv, trajectory.csv, hidden_tuning.csv, config.json and checkpoint.json.
inline void emit_report(const TrainingReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
  const Family fam = build_system(report.config).encoding.family;

  detail::write_text(dir / "metrics.csv", render([&](std::ostream& os) { write_metrics_csv(os, report.metrics); }));
  detail::write_text(dir / "trajectory.csv", render([&](std::ostream& os) {
                       write_trajectory_csv(os, report.trajectory, fam, report.config.time_step);
                     }));
  detail::write_text(dir / "hidden_tuning.csv", render([&](std::ostream& os) {
                       write_tuning_csv(os, report.tuning, report.config.experiment);
                     }));
  Json config = to_json(report.config);
  config["version"] = report.version;
  detail::write_text(dir / "config.json", config.dump(2) + "\n");
  const Checkpoint cp{report.config, report.network, report.config.epochs};
  detail::write_text(dir / "checkpoint.json", to_json(cp).dump() + "\n");
}

}  // namespace lppc
