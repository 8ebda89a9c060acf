#pragma once

#include "nelson/model.hpp"

#include <functional>
#include <vector>

namespace nelson {

struct SkgState {
  OrbitalSet orbitals;
  FieldAmplitude alpha;
  double time = 0.0;
};

/// Diagnostics emitted at every sample time. Unavailable entries are NaN.
struct StepReport {
  double time = 0.0;
  double gram_deviation = 0.0;
  double alpha_norm = 0.0;
  /// ||alpha^0|| + ||eta|| t
  double alpha_bound = 0.0;
  double energy_drift = 0.0;
  double secondorder_residual = 0.0;
};

/// Switches for the three couplings of the effective equations. All on is the
/// full Schroedinger-Klein-Gordon flow.
struct CouplingSwitches {
  bool field_source = true;      // -i N^{-1} (2 pi)^{d/2} eta F[rho] in the alpha equation
  bool field_rotation = true;    // exp(-i N^{-1/3} delta_N omega t) on alpha
  bool fermion_potential = true; // Phi acting on the orbitals
};

/// One Strang step: half kinetic, (alpha, potential) over dt, half kinetic.
class SkgStepper {
public:
  SkgStepper(const Model& model, double dt, CouplingSwitches switches = {});

  void advance(SkgState& state) const;
  /// Same splitting with a fixed potential exp(-i N^{1/3} Phi_0 dt); alpha untouched.
  void advance_frozen(SkgState& state, const Eigen::VectorXcd& potential_phase) const;
  /// exp(-i N^{1/3} Phi(x) dt) for a given field.
  [[nodiscard]] Eigen::VectorXcd potential_phase(const Eigen::VectorXd& field) const;

  [[nodiscard]] double dt() const { return dt_; }

private:
  void kinetic_half(OrbitalSet& orbitals) const;
  void apply_potential(OrbitalSet& orbitals, const Eigen::VectorXcd& phase) const;

  const Model& model_;
  double dt_;
  CouplingSwitches switches_;
  Eigen::VectorXcd kinetic_phase_; // includes the 1/G of the inverse FFT
  Eigen::VectorXcd rotation_full_, rotation_half_;
  Eigen::VectorXd source_prefactor_;
};

/// Conserved functional of the coupled effective equations:
///   E = sum_j <phi_j, -Laplace phi_j> + N^{2/3} sum_x Phi rho Delta x^d
///       + delta_N N^{4/3} sum_kappa Delta k^d omega |alpha|^2
[[nodiscard]] double skg_energy(const Model& model, const SkgState& state);
/// Conserved functional of the frozen-potential flow: kinetic + N^{2/3} <Phi_0, rho>.
[[nodiscard]] double free_energy(const Model& model, const SkgState& state, const Eigen::VectorXd& frozen_field);

struct SolveOptions {
  /// Report interval; snapped to a whole number of steps. 0 means every step.
  double sample_interval = 0.0;
  CouplingSwitches switches{};
  bool keep_states = true;
  /// Called once per sample (after the residual for that sample is known).
  std::function<void(const SkgState&, const StepReport&)> on_sample;
};

struct SkgTrajectory {
  std::vector<SkgState> samples;
  std::vector<StepReport> reports;
};

/// Integrates the coupled system with params.time_step up to t_final.
SkgTrajectory solve_skg(const Model& model, const SkgState& initial, double t_final, const SolveOptions& options = {});
/// Orbitals in the static potential Phi(., 0); alpha is carried along unchanged.
SkgTrajectory solve_free(const Model& model, const SkgState& initial, double t_final, const SolveOptions& options = {});

/// Max-norm residual of the second-order field equation at each interior sample
/// of a uniformly spaced trajectory (central difference in time). Entry i belongs
/// to samples[i + 1].
std::vector<double> ehrenfest_residual_effective(const Model& model, const std::vector<SkgState>& samples);

/// Residual field at the middle of three consecutive states separated by h.
Eigen::VectorXd secondorder_residual_field(const Model& model, const Eigen::VectorXd& field_prev,
                                           const SkgState& mid, const Eigen::VectorXd& field_next, double h);

/// The N plane waves with smallest |k|; ties broken lexicographically on integer coordinates.
OrbitalSet build_fermi_ball(const Model& model);
/// The lattice vectors used by build_fermi_ball, in order.
std::vector<LatticeVector> fermi_ball_momenta(const Model& model, int count);

/// Number of whole steps of size dt in t; throws ConfigError if t is not a multiple of dt.
long steps_for(double t, double dt);

} // namespace nelson
