#pragma once

#include "nelson/config.hpp"
#include "nelson/fock.hpp"
#include "nelson/skg.hpp"

#include <string>
#include <vector>

namespace nelson {

/// Initial orbitals and alpha described by the config.
SkgState make_initial_state(const Model& model, const InitialSpec& spec);

struct Theorem2Row {
  double delta = 0.0;
  double time = 0.0;
  double trace_distance = 0.0; // N^{-1} ||p^t - p~^t||_Tr
};
std::vector<Theorem2Row> theorem2_scaling(const ExperimentConfig& config);

struct FockVerifyRow {
  double time = 0.0;
  BetaReport beta;
  double norm = 0.0;
  double energy = 0.0;
};
struct FockVerifyResult {
  std::vector<FockVerifyRow> rows;
  std::vector<StepReport> skg_reports;
  std::size_t dim = 0;
  double truncation_weight = 0.0;
  double norm_drift = 0.0;
  double energy_drift = 0.0;
  PropagationStats stats;
  std::vector<EhrenfestPoint> ehrenfest;
};
FockVerifyResult fock_verify(const ExperimentConfig& config);

PropagationOptions propagation_options(const FockSettings& settings, double sample_interval);

struct ConvergenceRow {
  double dt = 0.0;
  double error = 0.0; // distance to the run with the next smaller dt (NaN for the last)
  double order = 0.0; // log2(error_i / error_{i+1}) (NaN where undefined)
  double max_residual = 0.0;
  double residual_order = 0.0;
};
struct ConvergenceResult {
  std::vector<ConvergenceRow> skg;
  bool monotone = true;
  /// Fock: restart interval and distance to the finest-interval result
  std::vector<std::pair<double, double>> fock;
};
ConvergenceResult convergence_study(const ExperimentConfig& config);

/// Field Ehrenfest residual at time t_center and point x, with the second time
/// derivative taken by central differences of spacing h, for each h in spacings.
std::vector<double> fock_ehrenfest_refinement(const ExperimentConfig& config, double t_center,
                                              const std::vector<double>& spacings, const Momentum& x);

/// Runs one experiment and returns the files written (paths relative to out_dir).
std::vector<std::string> run_experiment(const ExperimentConfig& config, const std::string& out_dir);

/// run_experiment plus the manifest: a stale manifest is removed first and the new one
/// is written atomically (temp file + rename) only after every output file exists.
void run_with_manifest(const ExperimentConfig& config, const std::string& out_dir);

} // namespace nelson
