#include "nelson/experiments.hpp"

#include "nelson/errors.hpp"
#include "nelson/io.hpp"
#include "nelson/semiclassics.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

#ifndef NELSON_VERSION
#define NELSON_VERSION "unknown"
#endif

namespace nelson {

namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double sample_interval_of(const ExperimentConfig& c) { return c.sample_interval > 0.0 ? c.sample_interval : c.t_final; }

SolveOptions solve_options(const ExperimentConfig& c) {
  SolveOptions o;
  o.sample_interval = c.t_final > 0.0 ? sample_interval_of(c) : 0.0;
  return o;
}

std::string iso_time(std::chrono::system_clock::time_point t) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Eigen::MatrixXcd random_unitary(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Eigen::MatrixXcd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = cplx(g(rng), g(rng));
  return Eigen::HouseholderQR<Eigen::MatrixXcd>(a).householderQ();
}

double state_distance(const Model& model, const SkgState& a, const SkgState& b) {
  const double orb = (a.orbitals.phi - b.orbitals.phi).squaredNorm() * model.cell_volume();
  const double field = (a.alpha.alpha - b.alpha.alpha).squaredNorm() * model.mode_weight();
  return std::sqrt(orb + field);
}

double max_finite(const std::vector<StepReport>& reports) {
  double m = 0.0;
  for (const auto& r : reports)
    if (std::isfinite(r.secondorder_residual)) m = std::max(m, r.secondorder_residual);
  return m;
}

std::vector<std::string> run_skg(const ExperimentConfig& c, const fs::path& out) {
  const Model model(c.params);
  const SkgState init = make_initial_state(model, c.initial);
  SolveOptions opt = solve_options(c);
  opt.keep_states = c.checkpoint;
  const auto traj = solve_skg(model, init, c.t_final, opt);
  std::vector<std::string> files{"skg_reports.csv"};
  write_step_reports((out / files[0]).string(), traj.reports);
  if (c.checkpoint) {
    write_trajectory((out / "skg_trajectory.bin").string(), model, traj.samples);
    files.push_back("skg_trajectory.bin");
    files.push_back("skg_trajectory.bin.json");
  }
  return files;
}

std::vector<std::string> run_free_compare(const ExperimentConfig& c, const fs::path& out) {
  const Model model(c.params);
  const SkgState init = make_initial_state(model, c.initial);
  const auto coupled = solve_skg(model, init, c.t_final, solve_options(c));
  const auto free = solve_free(model, init, c.t_final, solve_options(c));
  const double n = static_cast<double>(std::max(1, c.params.n_particles));
  CsvWriter csv((out / "free_compare.csv").string(),
                {"time", "trace_distance", "gram_deviation_coupled", "gram_deviation_free", "energy_drift_coupled",
                 "energy_drift_free"});
  for (std::size_t i = 0; i < coupled.samples.size(); ++i)
    csv.row({coupled.samples[i].time,
             projector_distance(model, coupled.samples[i].orbitals, free.samples[i].orbitals) / n,
             coupled.reports[i].gram_deviation, free.reports[i].gram_deviation, coupled.reports[i].energy_drift,
             free.reports[i].energy_drift});
  csv.close();
  std::vector<std::string> files{"free_compare.csv"};
  if (c.checkpoint) {
    write_trajectory((out / "skg_trajectory.bin").string(), model, coupled.samples);
    write_trajectory((out / "free_trajectory.bin").string(), model, free.samples);
    for (const char* f : {"skg_trajectory.bin", "skg_trajectory.bin.json", "free_trajectory.bin",
                          "free_trajectory.bin.json"})
      files.emplace_back(f);
  }
  return files;
}

std::vector<std::string> run_scan(const ExperimentConfig& c, const fs::path& out) {
  const Model model(c.params);
  const SkgState init = make_initial_state(model, c.initial);
  const auto traj = solve_skg(model, init, c.t_final, solve_options(c));
  const auto k_list = c.k_list ? *c.k_list : default_k_list(model);
  const ScanResult scan = semiclassical_scan(model, traj.samples, k_list);

  CsvWriter csv((out / "scan.csv").string(),
                {"time", "n_x", "n_y", "n_z", "k_abs", "tn_peq", "tn_commutator", "tn_pgradq", "hs_peq"});
  for (const auto& r : scan.reports)
    csv.row({r.time, static_cast<double>(r.n[0]), static_cast<double>(r.n[1]), static_cast<double>(r.n[2]), r.k_abs,
             r.tn_peq, r.tn_commutator, r.tn_pgradq, r.hs_peq});
  csv.close();
  CsvWriter comb((out / "scan_combined.csv").string(), {"time", "combined"});
  for (const auto& [t, v] : scan.combined) comb.row({t, v});
  comb.close();
  const GrowthFit fit = fit_growth(scan.combined);
  CsvWriter fitcsv((out / "scan_fit.csv").string(), {"prefactor", "rate", "rms_log_residual", "points"});
  fitcsv.row({fit.prefactor, fit.rate, fit.rms_log_residual, static_cast<double>(fit.points)});
  fitcsv.close();
  return {"scan.csv", "scan_combined.csv", "scan_fit.csv"};
}

std::vector<std::string> run_fock(const ExperimentConfig& c, const fs::path& out) {
  const FockVerifyResult r = fock_verify(c);
  CsvWriter csv((out / "fock_verify.csv").string(),
                {"time", "beta_a1", "beta_a2", "beta_b", "beta_total", "tn_gamma_f", "tn_gamma_b", "margin_f_lower",
                 "margin_f_upper", "margin_b", "beta_b_weyl", "norm", "energy"});
  for (const auto& row : r.rows) {
    const auto& b = row.beta;
    csv.row({row.time, b.beta_a1, b.beta_a2, b.beta_b, b.beta_total, b.tn_gamma_f, b.tn_gamma_b, b.margin_f_lower,
             b.margin_f_upper, b.margin_b, b.beta_b_weyl, row.norm, row.energy});
  }
  csv.close();
  write_step_reports((out / "fock_skg_reports.csv").string(), r.skg_reports);

  CsvWriter eh((out / "fock_ehrenfest.csv").string(), {"time", "lhs", "rhs", "residual"});
  for (const auto& p : r.ehrenfest) eh.row({p.time, p.lhs, p.rhs, p.residual});
  eh.close();

  CsvWriter summary((out / "fock_summary.csv").string(),
                    {"dim", "truncation_weight", "norm_drift", "energy_drift", "substeps", "matvecs",
                     "max_error_estimate", "used_dense"});
  summary.row({static_cast<double>(r.dim), r.truncation_weight, r.norm_drift, r.energy_drift,
               static_cast<double>(r.stats.substeps), static_cast<double>(r.stats.matvecs),
               r.stats.max_error_estimate, r.stats.used_dense ? 1.0 : 0.0});
  summary.close();

  // Randomized structural checks driven by the seed.
  const Model model(c.params);
  const FockBasis basis(model, c.fock.budget);
  const SkgState init = make_initial_state(model, c.initial);
  const AntisymmetricBoundReport bound =
      antisymmetric_bound_check(c.fock.bound_trials, std::min(3, std::max(1, c.params.n_particles)), 4, 2, c.seed);
  const ComplementProjectorReport comp =
      complement_projector_check(model, basis, init.orbitals, random_unitary(c.params.n_particles, c.seed));
  CsvWriter lem((out / "structure_checks.csv").string(),
                {"bound_trials", "bound_max_ratio", "bound_violations", "complement_max_commutator",
                 "complement_sum_identity_error", "complement_idempotency_error"});
  lem.row({static_cast<double>(bound.trials), bound.max_ratio, static_cast<double>(bound.violations),
           comp.max_commutator, comp.sum_identity_error, comp.idempotency_error});
  lem.close();
  return {"fock_verify.csv", "fock_skg_reports.csv", "fock_ehrenfest.csv", "fock_summary.csv", "structure_checks.csv"};
}

std::vector<std::string> run_theorem2(const ExperimentConfig& c, const fs::path& out) {
  const auto rows = theorem2_scaling(c);
  CsvWriter csv((out / "theorem2.csv").string(), {"delta_N", "time", "trace_distance"});
  for (const auto& r : rows) csv.row({r.delta, r.time, r.trace_distance});
  csv.close();

  // ratio of successive deltas at t_final
  std::vector<Theorem2Row> last;
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (i + 1 == rows.size() || rows[i + 1].delta != rows[i].delta) last.push_back(rows[i]);
  CsvWriter ratios((out / "theorem2_ratios.csv").string(), {"delta_a", "delta_b", "distance_a", "distance_b", "ratio"});
  for (std::size_t i = 0; i + 1 < last.size(); ++i)
    ratios.row({last[i].delta, last[i + 1].delta, last[i].trace_distance, last[i + 1].trace_distance,
                last[i].trace_distance / last[i + 1].trace_distance});
  ratios.close();
  return {"theorem2.csv", "theorem2_ratios.csv"};
}

std::vector<std::string> run_convergence(const ExperimentConfig& c, const fs::path& out) {
  const ConvergenceResult r = convergence_study(c);
  CsvWriter csv((out / "convergence_skg.csv").string(),
                {"dt", "self_error", "order", "max_secondorder_residual", "residual_order", "monotone"});
  for (const auto& row : r.skg)
    csv.row({row.dt, row.error, row.order, row.max_residual, row.residual_order, r.monotone ? 1.0 : 0.0});
  csv.close();
  std::vector<std::string> files{"convergence_skg.csv"};
  if (c.convergence_fock) {
    CsvWriter fock((out / "convergence_fock.csv").string(), {"restart_interval", "distance_to_finest"});
    for (const auto& [dt, err] : r.fock) fock.row({dt, err});
    fock.close();
    files.push_back("convergence_fock.csv");
  }
  return files;
}

} // namespace

SkgState make_initial_state(const Model& model, const InitialSpec& spec) {
  SkgState s;
  s.orbitals = spec.orbitals == InitialSpec::Orbitals::FermiBall ? build_fermi_ball(model)
                                                                 : read_orbital_file(spec.orbitals_file, model);
  s.alpha.alpha = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(model.num_modes()));
  if (spec.alpha == InitialSpec::Alpha::File) {
    s.alpha = read_alpha_file(spec.alpha_file, model);
  } else if (spec.alpha == InitialSpec::Alpha::SingleMode) {
    bool found = false;
    for (std::size_t k = 0; k < model.num_modes(); ++k)
      if (model.modes()[k].n == spec.mode) {
        s.alpha.alpha[static_cast<Eigen::Index>(k)] = spec.value;
        found = true;
      }
    if (!found) throw ConfigError("initial.alpha.single_mode.k is not a retained mode");
  }
  return s;
}

std::vector<Theorem2Row> theorem2_scaling(const ExperimentConfig& config) {
  if (config.deltas.empty()) throw ConfigError("theorem2.deltas is empty");
  std::vector<Theorem2Row> rows;
  for (double delta : config.deltas) {
    ExperimentConfig c = config;
    c.params.delta_n = delta;
    const Model model(c.params);
    const SkgState init = make_initial_state(model, c.initial);
    const auto coupled = solve_skg(model, init, c.t_final, solve_options(c));
    const auto free = solve_free(model, init, c.t_final, solve_options(c));
    const double n = static_cast<double>(std::max(1, c.params.n_particles));
    for (std::size_t i = 0; i < coupled.samples.size(); ++i)
      rows.push_back({delta, coupled.samples[i].time,
                      projector_distance(model, coupled.samples[i].orbitals, free.samples[i].orbitals) / n});
  }
  return rows;
}

PropagationOptions propagation_options(const FockSettings& settings, double sample_interval) {
  PropagationOptions o;
  o.sample_interval = sample_interval;
  o.tolerance = settings.tolerance;
  o.krylov_dim = settings.krylov_dim;
  o.method = settings.method == "dense"    ? PropagationMethod::Dense
             : settings.method == "krylov" ? PropagationMethod::Krylov
                                           : PropagationMethod::Auto;
  return o;
}

FockVerifyResult fock_verify(const ExperimentConfig& config) {
  const Model model(config.params);
  const FockBasis basis(model, config.fock.budget);
  const FockHamiltonian h = build_hamiltonian(model, basis);
  const SkgState init = make_initial_state(model, config.initial);
  PreparedState prepared =
      prepare_slater_coherent(model, basis, init.orbitals, init.alpha, config.fock.truncation_threshold);

  const auto skg = solve_skg(model, init, config.t_final, solve_options(config));

  FockVerifyResult out;
  out.dim = basis.dim();
  out.truncation_weight = prepared.truncation_weight;
  out.skg_reports = skg.reports;
  const double interval = sample_interval_of(config);
  std::vector<FieldObservables> series;
  double e0 = 0.0;
  std::size_t index = 0;
  auto observer = [&](double t, const Eigen::VectorXcd& psi) {
    if (index >= skg.samples.size() || std::abs(skg.samples[index].time - t) > 1e-9 * std::max(1.0, t))
      throw NumericalError("Fock and SKG sample times are out of step");
    const SkgState& mf = skg.samples[index++];
    FockVerifyRow row;
    row.time = t;
    row.beta = beta_report(model, basis, psi, mf.orbitals, mf.alpha);
    row.norm = psi.norm();
    row.energy = h.expectation(psi);
    if (out.rows.empty()) e0 = row.energy;
    out.energy_drift = std::max(out.energy_drift, std::abs(row.energy - e0));
    out.rows.push_back(row);
    FieldObservables obs = field_observables(model, basis, psi, t);
    obs.energy = row.energy;
    series.push_back(std::move(obs));
  };
  out.stats = propagate(model, h, prepared.state, config.t_final,
                        propagation_options(config.fock, config.t_final > 0.0 ? interval : 0.0), observer);
  out.norm_drift = out.stats.max_norm_drift;
  out.ehrenfest = ehrenfest_check(model, series, Momentum{0.0, 0.0, 0.0});
  return out;
}

std::vector<double> fock_ehrenfest_refinement(const ExperimentConfig& config, double t_center,
                                              const std::vector<double>& spacings, const Momentum& x) {
  const Model model(config.params);
  const FockBasis basis(model, config.fock.budget);
  const FockHamiltonian h = build_hamiltonian(model, basis);
  const SkgState init = make_initial_state(model, config.initial);
  const PreparedState prepared =
      prepare_slater_coherent(model, basis, init.orbitals, init.alpha, config.fock.truncation_threshold);
  const PropagationOptions opt = propagation_options(config.fock, 0.0);
  Eigen::VectorXcd center = prepared.state.amplitudes;
  FockPropagator(model, h, opt).advance(center, t_center);

  std::vector<double> out;
  for (double spacing : spacings) {
    FockPropagator prop(model, h, opt);
    Eigen::VectorXcd psi = center;
    prop.advance(psi, -spacing);
    std::vector<FieldObservables> series;
    for (int i = -1; i <= 1; ++i) {
      series.push_back(field_observables(model, basis, psi, t_center + i * spacing));
      if (i < 1) prop.advance(psi, spacing);
    }
    out.push_back(ehrenfest_check(model, series, x).front().residual);
  }
  return out;
}

ConvergenceResult convergence_study(const ExperimentConfig& config) {
  const auto& dts = config.time_steps;
  if (dts.size() < 4) throw ConfigError("convergence.time_steps needs at least 4 values");
  for (std::size_t i = 1; i < dts.size(); ++i)
    if (std::abs(dts[i] - 0.5 * dts[i - 1]) > 1e-12 * dts[i - 1])
      throw ConfigError("convergence.time_steps must halve successively");

  ConvergenceResult out;
  std::vector<SkgState> finals;
  std::vector<double> residuals;
  for (double dt : dts) {
    ExperimentConfig c = config;
    c.params.time_step = dt;
    const Model model(c.params);
    const SkgState init = make_initial_state(model, c.initial);
    SolveOptions opt = solve_options(c);
    const auto traj = solve_skg(model, init, c.t_final, opt);
    finals.push_back(traj.samples.back());
    residuals.push_back(max_finite(traj.reports));
  }
  const Model model(config.params);
  for (std::size_t i = 0; i < dts.size(); ++i) {
    ConvergenceRow row;
    row.dt = dts[i];
    row.error = i + 1 < dts.size() ? state_distance(model, finals[i], finals[i + 1]) : kNaN;
    row.max_residual = residuals[i];
    row.order = kNaN;
    row.residual_order = i + 1 < dts.size() ? std::log2(residuals[i] / residuals[i + 1]) : kNaN;
    out.skg.push_back(row);
  }
  for (std::size_t i = 0; i + 1 < out.skg.size(); ++i) {
    if (i + 2 < dts.size()) out.skg[i].order = std::log2(out.skg[i].error / out.skg[i + 1].error);
    if (i + 2 < dts.size() && !(out.skg[i + 1].error < out.skg[i].error)) out.monotone = false;
  }

  if (config.convergence_fock) {
    const FockBasis basis(model, config.fock.budget);
    const FockHamiltonian h = build_hamiltonian(model, basis);
    const SkgState init = make_initial_state(model, config.initial);
    const PreparedState prepared =
        prepare_slater_coherent(model, basis, init.orbitals, init.alpha, config.fock.truncation_threshold);
    std::vector<Eigen::VectorXcd> results;
    for (double dt : dts) {
      ManyBodyState s = prepared.state;
      PropagationOptions opt = propagation_options(config.fock, dt);
      opt.method = PropagationMethod::Krylov;
      propagate(model, h, s, config.t_final, opt, nullptr);
      results.push_back(s.amplitudes);
    }
    for (std::size_t i = 0; i < dts.size(); ++i) out.fock.emplace_back(dts[i], (results[i] - results.back()).norm());
  }
  return out;
}

std::vector<std::string> run_experiment(const ExperimentConfig& config, const std::string& out_dir) {
  const fs::path out(out_dir);
  fs::create_directories(out);
  std::vector<std::string> files;
  switch (config.experiment) {
  case Experiment::SkgRun: files = run_skg(config, out); break;
  case Experiment::FreeCompare: files = run_free_compare(config, out); break;
  case Experiment::SemiclassicalScan: files = run_scan(config, out); break;
  case Experiment::FockVerify: files = run_fock(config, out); break;
  case Experiment::Theorem2Scaling: files = run_theorem2(config, out); break;
  case Experiment::ConvergenceStudy: files = run_convergence(config, out); break;
  }
  std::ofstream cfg(out / "config.json", std::ios::trunc);
  cfg << config_to_json(config).dump(2) << '\n';
  if (!cfg) throw ConfigError("failed writing config.json");
  files.insert(files.begin(), "config.json");
  return files;
}

void run_with_manifest(const ExperimentConfig& config, const std::string& out_dir) {
  const fs::path out(out_dir);
  fs::create_directories(out);
  fs::remove(out / "manifest.json");
  const auto start = std::chrono::system_clock::now();
  const auto files = run_experiment(config, out_dir);
  const auto end = std::chrono::system_clock::now();

  nlohmann::ordered_json m;
  m["experiment"] = experiment_name(config.experiment);
  m["config_hash"] = config_hash(config);
  m["code_version"] = NELSON_VERSION;
  m["seed"] = config.seed;
  m["start_time"] = iso_time(start);
  m["end_time"] = iso_time(end);
  m["files"] = files;
  const fs::path tmp = out / "manifest.json.tmp";
  {
    std::ofstream os(tmp, std::ios::trunc);
    os << m.dump(2) << '\n';
    if (!os) throw ConfigError("failed writing manifest");
  }
  fs::rename(tmp, out / "manifest.json");
}

} // namespace nelson
