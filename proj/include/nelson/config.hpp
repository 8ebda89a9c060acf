#pragma once

#include "nelson/model.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace nelson {

enum class Experiment { SkgRun, FreeCompare, SemiclassicalScan, FockVerify, Theorem2Scaling, ConvergenceStudy };

[[nodiscard]] std::string experiment_name(Experiment e);
/// Throws ConfigError for an unknown name.
[[nodiscard]] Experiment experiment_from_name(const std::string& name);

struct InitialSpec {
  enum class Orbitals { FermiBall, File };
  enum class Alpha { Zero, File, SingleMode };

  Orbitals orbitals = Orbitals::FermiBall;
  std::string orbitals_file;
  Alpha alpha = Alpha::Zero;
  std::string alpha_file;
  /// single-mode spec: alpha(k) = value at k = 2 pi n / L, zero elsewhere
  LatticeVector mode{};
  cplx value{0.0, 0.0};

  bool operator==(const InitialSpec&) const = default;
};

struct FockSettings {
  std::size_t budget = 200000;
  double truncation_threshold = 1e-6;
  double tolerance = 1e-13;
  int krylov_dim = 30;
  std::string method = "auto"; // auto | krylov | dense
  int bound_trials = 200;

  bool operator==(const FockSettings&) const = default;
};

struct ExperimentConfig {
  Experiment experiment = Experiment::SkgRun;
  ModelParams params;
  InitialSpec initial;
  double t_final = 1.0;
  double sample_interval = 0.1;
  std::string output_dir = "out";
  std::uint64_t seed = 0;
  /// also write the binary trajectory (skg-run, free-compare)
  bool checkpoint = false;

  /// theorem2-scaling: delta_N values
  std::vector<double> deltas{0.4, 0.2, 0.1};
  /// convergence-study: time steps, each half the previous
  std::vector<double> time_steps{0.02, 0.01, 0.005, 0.0025};
  /// convergence-study: also run the Fock propagator comparison
  bool convergence_fock = false;
  /// semiclassical-scan: explicit k list; unset means every retained mode
  std::optional<std::vector<LatticeVector>> k_list;
  FockSettings fock;

  bool operator==(const ExperimentConfig&) const = default;
};

nlohmann::ordered_json params_to_json(const ModelParams& p);
/// Unknown keys are errors; missing keys keep their defaults.
ModelParams params_from_json(const nlohmann::json& j);

/// Parses a config document. Relative file paths are resolved against base_dir.
ExperimentConfig config_from_json(const nlohmann::json& j, const std::string& base_dir = "");
nlohmann::ordered_json config_to_json(const ExperimentConfig& c);
ExperimentConfig load_config(const std::string& path);

/// FNV-1a (64 bit) of the canonical serialization, as 16 hex digits.
[[nodiscard]] std::string config_hash(const ExperimentConfig& c);

} // namespace nelson
