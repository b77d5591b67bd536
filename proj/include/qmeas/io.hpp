#pragma once

#include <fcntl.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <string>

#include <json.hpp>

#include "errors.hpp"
#include "grid.hpp"
#include "version.hpp"

namespace qmeas {

using Json = nlohmann::json;

namespace detail {

inline void require_known_keys(const Json& j, const std::string& where,
                               std::initializer_list<const char*> allowed) {
  if (!j.is_object()) {
    throw ValidationError("config section '" + where + "' must be an object");
  }
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* a : allowed) {
      if (it.key() == a) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw ValidationError("unknown config field '" + where + it.key() + "'");
    }
  }
}

template <typename T>
T field(const Json& j, const std::string& where, const char* key) {
  if (!j.contains(key)) {
    throw ValidationError("missing config field '" + where + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw ValidationError("config field '" + where + key + "' has the wrong type");
  }
}

template <typename T>
T field_or(const Json& j, const std::string& where, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  return field<T>(j, where, key);
}

inline Complex complex_field(const Json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw ValidationError("config field '" + where + "' must be a [re, im] pair");
  }
  return Complex(j[0].get<double>(), j[1].get<double>());
}

inline Json complex_json(Complex z) { return Json::array({z.real(), z.imag()}); }

}  // namespace detail

struct GridParams {
  int n = 512;
  double length = 40.0;
};

struct GaussianParams {
  double x0 = 0.0;
  double p0 = 0.0;
  double delta = 1.0;
};

struct WeakSection {
  Complex state0{1.0, 0.0};
  Complex state1{0.0, 0.0};
  Complex post0{1.0, 0.0};
  Complex post1{0.0, 0.0};
  std::string observable = "sigma_z";
  GridParams probe_grid{256, 24.0};
  GaussianParams probe{0.0, 0.0, 0.7071067811865476};
  std::vector<double> lambdas{0.4, 0.2, 0.1, 0.05};
};

struct WavefunctionSection {
  GaussianParams state{0.0, 0.0, 1.0};
  double window_lo = -8.0;
  double window_hi = 8.0;
  int intervals = 64;
  double alpha = 0.05;
  int epsilon_cells = 4;
  double postselection_threshold = 1e-10;
  double support_threshold = 1e-10;
};

struct PhaseSpaceSection {
  double kernel_delta = 0.7071067811865476;
  double kernel_lambda = 1.0;
  GaussianParams state{1.0, 0.5, 0.7071067811865476};
  double box_half_width = 8.0;
  int box_points = 64;
  double tau = 1e-6;
};

struct ExperimentConfig {
  std::string experiment;
  GridParams grid;
  WeakSection weak;
  WavefunctionSection wavefunction;
  PhaseSpaceSection phase_space;
  std::string output_dir = "out";
  long seed = 0;

  bool is_weak() const { return experiment == "weak-re" || experiment == "weak-im"; }
  bool is_wavefunction() const {
    return experiment == "wavefunction" || experiment == "wavefunction-fail";
  }
  bool is_phase_space() const { return experiment == "phase-space"; }
};

namespace detail {

inline GridParams parse_grid(const Json& j, const std::string& where) {
  require_known_keys(j, where, {"n", "length"});
  GridParams g;
  g.n = field<int>(j, where, "n");
  g.length = field<double>(j, where, "length");
  return g;
}

inline GaussianParams parse_gaussian(const Json& j, const std::string& where) {
  require_known_keys(j, where, {"x0", "p0", "delta"});
  GaussianParams g;
  g.x0 = field_or<double>(j, where, "x0", 0.0);
  g.p0 = field_or<double>(j, where, "p0", 0.0);
  g.delta = field<double>(j, where, "delta");
  return g;
}

}  // namespace detail

inline ExperimentConfig parse_config(const Json& j) {
  detail::require_known_keys(
      j, "", {"experiment", "grid", "state", "postselection", "observable", "probe_grid",
              "probe", "lambdas", "window", "intervals", "alpha", "epsilon_cells",
              "postselection_threshold", "support_threshold", "kernel", "box", "tau",
              "output_dir", "seed"});
  ExperimentConfig cfg;
  cfg.experiment = detail::field<std::string>(j, "", "experiment");
  cfg.output_dir = detail::field_or<std::string>(j, "", "output_dir", "out");
  cfg.seed = detail::field_or<long>(j, "", "seed", 0);

  if (cfg.is_weak()) {
    if (j.contains("grid")) cfg.grid = detail::parse_grid(j.at("grid"), "grid.");
    if (j.contains("probe_grid")) {
      cfg.weak.probe_grid = detail::parse_grid(j.at("probe_grid"), "probe_grid.");
    }
    if (j.contains("probe")) {
      cfg.weak.probe = detail::parse_gaussian(j.at("probe"), "probe.");
    }
    if (j.contains("state")) {
      const Json& s = j.at("state");
      if (!s.is_array() || s.size() != 2) {
        throw ValidationError("config field 'state' must hold two [re, im] amplitudes");
      }
      cfg.weak.state0 = detail::complex_field(s[0], "state[0]");
      cfg.weak.state1 = detail::complex_field(s[1], "state[1]");
    }
    if (j.contains("postselection")) {
      const Json& s = j.at("postselection");
      if (!s.is_array() || s.size() != 2) {
        throw ValidationError(
            "config field 'postselection' must hold two [re, im] amplitudes");
      }
      cfg.weak.post0 = detail::complex_field(s[0], "postselection[0]");
      cfg.weak.post1 = detail::complex_field(s[1], "postselection[1]");
    }
    cfg.weak.observable = detail::field_or<std::string>(j, "", "observable", "sigma_z");
    if (cfg.weak.observable != "sigma_z" && cfg.weak.observable != "sigma_x" &&
        cfg.weak.observable != "sigma_y") {
      throw ValidationError("config field 'observable' must name a Pauli matrix");
    }
    if (j.contains("lambdas")) {
      cfg.weak.lambdas = detail::field<std::vector<double>>(j, "", "lambdas");
    }
    if (cfg.weak.lambdas.size() < 3) {
      throw ValidationError("config field 'lambdas' needs at least 3 entries");
    }
  } else if (cfg.is_wavefunction()) {
    if (j.contains("grid")) cfg.grid = detail::parse_grid(j.at("grid"), "grid.");
    if (j.contains("state")) {
      cfg.wavefunction.state = detail::parse_gaussian(j.at("state"), "state.");
    }
    if (j.contains("window")) {
      const Json& w = j.at("window");
      if (!w.is_array() || w.size() != 2 || !w[0].is_number() || !w[1].is_number()) {
        throw ValidationError("config field 'window' must be [lo, hi]");
      }
      cfg.wavefunction.window_lo = w[0].get<double>();
      cfg.wavefunction.window_hi = w[1].get<double>();
    }
    cfg.wavefunction.intervals = detail::field_or<int>(j, "", "intervals", 64);
    cfg.wavefunction.alpha = detail::field_or<double>(j, "", "alpha", 0.05);
    cfg.wavefunction.epsilon_cells = detail::field_or<int>(j, "", "epsilon_cells", 4);
    cfg.wavefunction.postselection_threshold =
        detail::field_or<double>(j, "", "postselection_threshold", 1e-10);
    cfg.wavefunction.support_threshold =
        detail::field_or<double>(j, "", "support_threshold", 1e-10);
  } else if (cfg.is_phase_space()) {
    if (j.contains("grid")) cfg.grid = detail::parse_grid(j.at("grid"), "grid.");
    if (j.contains("kernel")) {
      const Json& k = j.at("kernel");
      detail::require_known_keys(k, "kernel.", {"delta", "lambda"});
      cfg.phase_space.kernel_delta = detail::field<double>(k, "kernel.", "delta");
      cfg.phase_space.kernel_lambda = detail::field_or<double>(k, "kernel.", "lambda", 1.0);
    }
    if (j.contains("state")) {
      cfg.phase_space.state = detail::parse_gaussian(j.at("state"), "state.");
    }
    if (j.contains("box")) {
      const Json& b = j.at("box");
      detail::require_known_keys(b, "box.", {"half_width", "points"});
      cfg.phase_space.box_half_width = detail::field<double>(b, "box.", "half_width");
      cfg.phase_space.box_points = detail::field<int>(b, "box.", "points");
    }
    cfg.phase_space.tau = detail::field_or<double>(j, "", "tau", 1e-6);
  } else {
    throw ValidationError("unknown experiment name '" + cfg.experiment + "'");
  }
  return cfg;
}

inline Json config_to_json(const ExperimentConfig& cfg) {
  Json j;
  j["experiment"] = cfg.experiment;
  j["grid"] = Json{{"n", cfg.grid.n}, {"length", cfg.grid.length}};
  j["output_dir"] = cfg.output_dir;
  j["seed"] = cfg.seed;
  if (cfg.is_weak()) {
    j["state"] = Json::array({detail::complex_json(cfg.weak.state0),
                              detail::complex_json(cfg.weak.state1)});
    j["postselection"] = Json::array({detail::complex_json(cfg.weak.post0),
                                      detail::complex_json(cfg.weak.post1)});
    j["observable"] = cfg.weak.observable;
    j["probe_grid"] =
        Json{{"n", cfg.weak.probe_grid.n}, {"length", cfg.weak.probe_grid.length}};
    j["probe"] = Json{{"x0", cfg.weak.probe.x0},
                      {"p0", cfg.weak.probe.p0},
                      {"delta", cfg.weak.probe.delta}};
    j["lambdas"] = cfg.weak.lambdas;
  } else if (cfg.is_wavefunction()) {
    j["state"] = Json{{"x0", cfg.wavefunction.state.x0},
                      {"p0", cfg.wavefunction.state.p0},
                      {"delta", cfg.wavefunction.state.delta}};
    j["window"] = Json::array({cfg.wavefunction.window_lo, cfg.wavefunction.window_hi});
    j["intervals"] = cfg.wavefunction.intervals;
    j["alpha"] = cfg.wavefunction.alpha;
    j["epsilon_cells"] = cfg.wavefunction.epsilon_cells;
    j["postselection_threshold"] = cfg.wavefunction.postselection_threshold;
    j["support_threshold"] = cfg.wavefunction.support_threshold;
  } else if (cfg.is_phase_space()) {
    j["kernel"] = Json{{"delta", cfg.phase_space.kernel_delta},
                       {"lambda", cfg.phase_space.kernel_lambda}};
    j["state"] = Json{{"x0", cfg.phase_space.state.x0},
                      {"p0", cfg.phase_space.state.p0},
                      {"delta", cfg.phase_space.state.delta}};
    j["box"] = Json{{"half_width", cfg.phase_space.box_half_width},
                    {"points", cfg.phase_space.box_points}};
    j["tau"] = cfg.phase_space.tau;
  }
  return j;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file " + path);
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

struct RunRecord {
  Json config;
  Json payload;
  double wall_seconds = 0.0;
  std::string version = kVersion;
};

inline Json record_to_json(const RunRecord& r) {
  return Json{{"config", r.config},
              {"payload", r.payload},
              {"wall_seconds", r.wall_seconds},
              {"toolkit_version", r.version}};
}

inline RunRecord load_record(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open record file " + path);
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("record is not valid JSON: ") + e.what());
  }
  detail::require_known_keys(j, "",
                             {"config", "payload", "wall_seconds", "toolkit_version"});
  RunRecord r;
  r.config = detail::field<Json>(j, "", "config");
  r.payload = detail::field<Json>(j, "", "payload");
  r.wall_seconds = detail::field<double>(j, "", "wall_seconds");
  r.version = detail::field<std::string>(j, "", "toolkit_version");
  return r;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << content;
  if (!out) throw Error("write failed for " + path);
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

inline void write_csv(const std::string& path, const CsvTable& table) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << std::setprecision(17);
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    if (i > 0) out << ",";
    out << table.header[i];
  }
  out << "\n";
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i > 0) out << ",";
      out << row[i];
    }
    out << "\n";
  }
  if (!out) throw Error("write failed for " + path);
}

/// Exclusive ownership of an output directory for the duration of a run.
class DirectoryLock {
 public:
  explicit DirectoryLock(const std::string& dir) {
    std::filesystem::create_directories(dir);
    path_ = dir + "/.lock";
    fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0) {
      throw ValidationError("output directory " + dir +
                            " is locked by another run (remove .lock if stale)");
    }
  }
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;
  ~DirectoryLock() {
    if (fd_ >= 0) {
      ::close(fd_);
      ::unlink(path_.c_str());
    }
  }

 private:
  int fd_ = -1;
  std::string path_;
};

}  // namespace qmeas
