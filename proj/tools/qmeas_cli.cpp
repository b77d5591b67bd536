// Command-line runner for the canned measurement experiments: parses a JSON
// config, executes the named experiment, and writes a self-describing JSON
// record plus plot-ready CSV tables.

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include <qmeas/qmeas.hpp>

namespace {

using qmeas::Complex;
using qmeas::Json;
using qmeas::Vec;

std::string output_root(const qmeas::ExperimentConfig& cfg) {
  if (const char* env = std::getenv("QMEAS_OUTPUT_ROOT")) {
    if (*env != '\0') return env;
  }
  return cfg.output_dir;
}

qmeas::Mat pauli_by_name(const std::string& name) {
  if (name == "sigma_x") return qmeas::sigma_x();
  if (name == "sigma_y") return qmeas::sigma_y();
  return qmeas::sigma_z();
}

struct WeakRun {
  Complex weak_value;
  qmeas::LimitSeries series;
  qmeas::WeakLimitFit fit;
};

WeakRun run_weak(const qmeas::ExperimentConfig& cfg) {
  const qmeas::Grid pg =
      qmeas::make_grid(cfg.weak.probe_grid.n, cfg.weak.probe_grid.length);
  const qmeas::StateVector probe = qmeas::gaussian_state(
      pg, cfg.weak.probe.x0, cfg.weak.probe.p0, cfg.weak.probe.delta);
  qmeas::StateVector phi = qmeas::qubit_state(cfg.weak.state0, cfg.weak.state1);
  phi.normalize();
  qmeas::StateVector post = qmeas::qubit_state(cfg.weak.post0, cfg.weak.post1);
  post.normalize();
  const qmeas::Mat f = qmeas::projector_onto(post.a);
  const qmeas::BinnedObservable target = qmeas::sharp_observable(
      qmeas::Space::finite(2), pauli_by_name(cfg.weak.observable), 2.0);

  WeakRun out;
  out.weak_value = qmeas::weak_value(target, f, phi);
  if (cfg.experiment == "weak-re") {
    out.series = qmeas::position_pointer_series(target, pg, probe.a, phi, f,
                                                cfg.weak.lambdas);
  } else {
    out.series = qmeas::momentum_pointer_series(target, pg, probe.a, phi, f,
                                                cfg.weak.lambdas);
  }
  out.fit = qmeas::extrapolate_weak_limit(out.series);
  return out;
}

Json weak_payload(const qmeas::ExperimentConfig& cfg, const WeakRun& run) {
  Json series = Json::array();
  for (std::size_t i = 0; i < run.series.lambdas.size(); ++i) {
    series.push_back(Json::array({run.series.lambdas[i], run.series.values[i]}));
  }
  return Json{{"weak_value", Json::array({run.weak_value.real(), run.weak_value.imag()})},
              {"target_part", cfg.experiment == "weak-re" ? "re" : "im"},
              {"series", series},
              {"extrapolated", run.fit.limit},
              {"linear", run.fit.linear},
              {"quadratic", run.fit.quadratic},
              {"residual", run.fit.max_residual}};
}

struct WavefunctionRun {
  qmeas::ReconstructionReport report;
  std::vector<Complex> truth_points;
  std::vector<double> centers;
  std::vector<int> occupied;
  double alpha = 0.0;
  double epsilon = 0.0;
};

WavefunctionRun run_wavefunction(const qmeas::ExperimentConfig& cfg) {
  const qmeas::Grid g = qmeas::make_grid(cfg.grid.n, cfg.grid.length);
  const qmeas::WavefunctionSection& w = cfg.wavefunction;
  const qmeas::StateVector truth =
      qmeas::gaussian_state(g, w.state.x0, w.state.p0, w.state.delta);

  qmeas::DirectConfig dc;
  dc.window_lo = w.window_lo;
  dc.window_hi = w.window_hi;
  dc.interval_count = w.intervals;
  dc.alpha = w.alpha;
  dc.epsilon = w.epsilon_cells * g.dp;
  dc.postselection_threshold = w.postselection_threshold;

  WavefunctionRun out;
  out.alpha = dc.alpha;
  out.epsilon = dc.epsilon;
  out.report = qmeas::direct_reconstruct(g, truth.a, dc);
  out.centers = out.report.centers;

  const std::vector<qmeas::OutcomeBin> bins =
      qmeas::make_uniform_bins(dc.window_lo, dc.window_hi, dc.interval_count);

  // Cell-averaged truth per interval, normalized and phase-fixed with the
  // same convention as the estimate so the table columns are comparable.
  std::vector<Complex> avg(bins.size(), Complex(0.0, 0.0));
  std::vector<int> cells(bins.size(), 0);
  for (int k = 0; k < g.n; ++k) {
    for (std::size_t i = 0; i < bins.size(); ++i) {
      if (bins[i].contains(g.x(k))) {
        avg[i] += truth.a[k];
        ++cells[i];
        break;
      }
    }
  }
  double norm2 = 0.0;
  for (std::size_t i = 0; i < bins.size(); ++i) {
    if (cells[i] > 0) avg[i] /= static_cast<double>(cells[i]);
    norm2 += std::norm(avg[i]) * cells[i] * g.dx;
  }
  std::size_t peak = 0;
  for (std::size_t i = 1; i < avg.size(); ++i) {
    if (std::abs(avg[i]) > std::abs(avg[peak])) peak = i;
  }
  Complex phase(1.0, 0.0);
  if (std::abs(avg[peak]) > 0.0) phase = std::conj(avg[peak]) / std::abs(avg[peak]);
  for (Complex& v : avg) v *= phase / std::sqrt(norm2);
  out.truth_points = std::move(avg);

  const qmeas::BinnedObservable coarse = qmeas::binned_position_observable(g, bins);
  out.occupied =
      qmeas::support(coarse, qmeas::DensityOperator::pure(truth), w.support_threshold);
  return out;
}

Json wavefunction_payload(const WavefunctionRun& run) {
  Json points = Json::array();
  for (std::size_t i = 0; i < run.centers.size(); ++i) {
    points.push_back(Json::array({run.centers[i], run.report.raw_points[i].real(),
                                  run.report.raw_points[i].imag(),
                                  run.truth_points[i].real(),
                                  run.truth_points[i].imag()}));
  }
  return Json{{"failed", run.report.failed},
              {"postselection_mass", run.report.postselection_mass},
              {"fidelity", run.report.fidelity},
              {"alpha", run.alpha},
              {"epsilon", run.epsilon},
              {"points", points},
              {"occupied_intervals", run.occupied},
              {"warnings", run.report.diagnostics.warnings}};
}

struct PhaseSpaceRun {
  qmeas::PhaseSpaceDistribution dist;
  qmeas::CompletenessReport completeness;
  qmeas::ReconstructedState recon;
  double trace_distance = 0.0;
  std::vector<std::string> warnings;
};

PhaseSpaceRun run_phase_space(const qmeas::ExperimentConfig& cfg) {
  const qmeas::Grid g = qmeas::make_grid(cfg.grid.n, cfg.grid.length);
  const qmeas::PhaseSpaceSection& ps = cfg.phase_space;
  if (!(ps.box_half_width > 0.0) || ps.box_points < 2) {
    throw qmeas::ValidationError("config field 'box' needs half_width > 0 and points >= 2");
  }
  const qmeas::StateVector kernel_probe =
      qmeas::gaussian_state(g, 0.0, 0.0, ps.kernel_delta);
  const Vec kernel =
      qmeas::covariant_observable_kernel(g, kernel_probe.a, ps.kernel_lambda);
  const qmeas::StateVector truth =
      qmeas::gaussian_state(g, ps.state.x0, ps.state.p0, ps.state.delta);
  const qmeas::DensityOperator rho = qmeas::DensityOperator::pure(truth);
  const std::vector<double> qs =
      qmeas::phase_axis(-ps.box_half_width, ps.box_half_width, ps.box_points);

  PhaseSpaceRun out;
  out.completeness = qmeas::completeness_check(g, kernel, qs, qs);
  qmeas::Diagnostics diag;
  out.dist = qmeas::husimi(g, rho, kernel, qs, qs, &diag);
  out.recon = qmeas::phase_space_reconstruct(g, out.dist, kernel, ps.tau);
  out.trace_distance = qmeas::trace_distance(out.recon.estimate, rho);
  out.warnings = diag.warnings;
  for (const std::string& w : out.recon.diagnostics.warnings) out.warnings.push_back(w);
  return out;
}

Json phase_space_payload(const PhaseSpaceRun& run) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < run.dist.values.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < run.dist.values.cols(); ++j) {
      row.push_back(run.dist.values(i, j));
    }
    rows.push_back(row);
  }
  return Json{{"qs", run.dist.qs},
              {"ps", run.dist.ps},
              {"husimi", rows},
              {"total", run.dist.total()},
              {"completeness",
               Json{{"min_overlap", run.completeness.min_overlap},
                    {"zero_fraction", run.completeness.zero_fraction}}},
              {"trace_distance", run.trace_distance},
              {"cone_distance", run.recon.cone_distance},
              {"coverage", run.recon.coverage},
              {"warnings", run.warnings}};
}

void write_plots(const std::string& dir, const std::string& experiment,
                 const Json& payload) {
  if (experiment == "weak-re" || experiment == "weak-im") {
    qmeas::CsvTable t;
    t.header = {"lambda", "conditional_average"};
    for (const Json& pair : payload.at("series")) {
      t.rows.push_back({pair[0].get<double>(), pair[1].get<double>()});
    }
    qmeas::write_csv(dir + "/series.csv", t);
  } else if (experiment == "wavefunction" || experiment == "wavefunction-fail") {
    qmeas::CsvTable t;
    t.header = {"x", "re", "im", "truth_re", "truth_im"};
    for (const Json& row : payload.at("points")) {
      t.rows.push_back({row[0].get<double>(), row[1].get<double>(), row[2].get<double>(),
                        row[3].get<double>(), row[4].get<double>()});
    }
    qmeas::write_csv(dir + "/points.csv", t);
  } else if (experiment == "phase-space") {
    const Json& rows = payload.at("husimi");
    const Json& ps = payload.at("ps");
    qmeas::CsvTable t;
    for (const Json& p : ps) {
      std::ostringstream name;
      name << "p=" << p.get<double>();
      t.header.push_back(name.str());
    }
    for (const Json& row : rows) {
      std::vector<double> r;
      for (const Json& v : row) r.push_back(v.get<double>());
      t.rows.push_back(std::move(r));
    }
    qmeas::write_csv(dir + "/husimi.csv", t);
    Json header{{"qs", payload.at("qs")},
                {"ps", payload.at("ps")},
                {"rows", "q"},
                {"columns", "p"}};
    qmeas::write_text_file(dir + "/husimi_header.json", header.dump(2) + "\n");
  }
}

// Construction-only pass over a config; throws ValidationError on any
// out-of-range parameter without running the experiment.
void validate_config(const qmeas::ExperimentConfig& cfg) {
  if (cfg.is_weak()) {
    const qmeas::Grid pg =
        qmeas::make_grid(cfg.weak.probe_grid.n, cfg.weak.probe_grid.length);
    qmeas::gaussian_state(pg, cfg.weak.probe.x0, cfg.weak.probe.p0,
                          cfg.weak.probe.delta);
    qmeas::StateVector phi = qmeas::qubit_state(cfg.weak.state0, cfg.weak.state1);
    phi.normalize();
    qmeas::StateVector post = qmeas::qubit_state(cfg.weak.post0, cfg.weak.post1);
    post.normalize();
    for (std::size_t i = 0; i + 1 < cfg.weak.lambdas.size(); ++i) {
      if (!(cfg.weak.lambdas[i] > cfg.weak.lambdas[i + 1])) {
        throw qmeas::ValidationError("config field 'lambdas' must strictly decrease");
      }
    }
    for (double l : cfg.weak.lambdas) {
      if (!(l > 0.0)) {
        throw qmeas::ValidationError("config field 'lambdas' must be positive");
      }
    }
  } else if (cfg.is_wavefunction()) {
    const qmeas::Grid g = qmeas::make_grid(cfg.grid.n, cfg.grid.length);
    const qmeas::WavefunctionSection& w = cfg.wavefunction;
    qmeas::gaussian_state(g, w.state.x0, w.state.p0, w.state.delta);
    qmeas::DirectConfig dc;
    dc.window_lo = w.window_lo;
    dc.window_hi = w.window_hi;
    dc.interval_count = w.intervals;
    dc.alpha = w.alpha;
    dc.epsilon = w.epsilon_cells * g.dp;
    dc.postselection_threshold = w.postselection_threshold;
    dc.validate(g);
    if (!(w.support_threshold > 0.0) || w.support_threshold > 1e-3) {
      throw qmeas::ValidationError(
          "config field 'support_threshold' must lie in (0, 1e-3]");
    }
  } else if (cfg.is_phase_space()) {
    const qmeas::Grid g = qmeas::make_grid(cfg.grid.n, cfg.grid.length);
    const qmeas::PhaseSpaceSection& ps = cfg.phase_space;
    qmeas::gaussian_state(g, ps.state.x0, ps.state.p0, ps.state.delta);
    if (!(ps.kernel_delta > 0.0)) {
      throw qmeas::ValidationError("config field 'kernel.delta' must be positive");
    }
    if (!(ps.kernel_lambda > 0.0)) {
      throw qmeas::ValidationError("config field 'kernel.lambda' must be positive");
    }
    if (!(ps.tau > 0.0) || ps.tau >= 1.0) {
      throw qmeas::ValidationError("config field 'tau' must lie in (0, 1)");
    }
    if (!(ps.box_half_width > 0.0) || ps.box_points < 2) {
      throw qmeas::ValidationError(
          "config field 'box' needs half_width > 0 and points >= 2");
    }
  }
}

int run_command(const std::string& config_path) {
  const qmeas::ExperimentConfig cfg = qmeas::load_config(config_path);
  validate_config(cfg);
  const std::string dir = output_root(cfg) + "/" + cfg.experiment;
  qmeas::DirectoryLock lock(dir);

  const auto start = std::chrono::steady_clock::now();
  Json payload;
  bool postselection_failed = false;
  if (cfg.is_weak()) {
    payload = weak_payload(cfg, run_weak(cfg));
  } else if (cfg.is_wavefunction()) {
    const WavefunctionRun run = run_wavefunction(cfg);
    payload = wavefunction_payload(run);
    postselection_failed = run.report.failed;
  } else {
    payload = phase_space_payload(run_phase_space(cfg));
  }
  const auto stop = std::chrono::steady_clock::now();

  qmeas::RunRecord record;
  record.config = qmeas::config_to_json(cfg);
  record.payload = payload;
  record.wall_seconds = std::chrono::duration<double>(stop - start).count();
  qmeas::write_text_file(dir + "/record.json", qmeas::record_to_json(record).dump(2) + "\n");
  write_plots(dir, cfg.experiment, payload);

  if (postselection_failed) {
    std::cerr << "postselection mass below threshold" << std::endl;
    return 2;
  }
  std::cout << "wrote " << dir << "/record.json" << std::endl;
  return 0;
}

int emit_plots_command(const std::string& record_path) {
  const qmeas::RunRecord record = qmeas::load_record(record_path);
  const qmeas::ExperimentConfig cfg = qmeas::parse_config(record.config);
  const std::string dir =
      std::filesystem::path(record_path).parent_path().string();
  write_plots(dir.empty() ? "." : dir, cfg.experiment, record.payload);
  std::cout << "wrote plot tables next to " << record_path << std::endl;
  return 0;
}

int validate_command(const std::string& config_path) {
  const qmeas::ExperimentConfig cfg = qmeas::load_config(config_path);
  validate_config(cfg);
  std::cout << "config ok: experiment " << cfg.experiment << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qmeas: generalized quantum measurement experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::string record_path;
  CLI::App* run = app.add_subcommand("run", "execute an experiment config");
  run->add_option("config", config_path, "path to the experiment config JSON")
      ->required();
  CLI::App* emit = app.add_subcommand("emit-plots", "write plot tables from a record");
  emit->add_option("record", record_path, "path to a run record JSON")->required();
  CLI::App* val = app.add_subcommand("validate", "check a config without running it");
  val->add_option("config", config_path, "path to the experiment config JSON")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return run_command(config_path);
    if (emit->parsed()) return emit_plots_command(record_path);
    return validate_command(config_path);
  } catch (const qmeas::PostselectionError& e) {
    std::cerr << e.what() << std::endl;
    return 2;
  } catch (const qmeas::ValidationError& e) {
    std::cerr << e.what() << std::endl;
    return 3;
  } catch (const std::exception& e) {
    std::cerr << e.what() << std::endl;
    return 1;
  }
}
