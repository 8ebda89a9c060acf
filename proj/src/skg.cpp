#include "nelson/skg.hpp"

#include "nelson/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

namespace nelson {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kGramFailure = 1e-6;

double n_pow(const Model& model, double exponent) {
  return std::pow(static_cast<double>(model.params().n_particles), exponent);
}

void check_state(const Model& model, const SkgState& state) {
  if (!state.orbitals.phi.allFinite() || !state.alpha.alpha.allFinite())
    throw NumericalError("non-finite value in SKG state at t = " + std::to_string(state.time));
  const double dev = model.gram_deviation(state.orbitals);
  if (dev > kGramFailure)
    throw NumericalError("orbital Gram deviation " + std::to_string(dev) + " at t = " + std::to_string(state.time) +
                         " exceeds 1e-6; time step too large");
}

double kinetic_energy(const Model& model, const OrbitalSet& orbitals) {
  double e = 0.0;
  for (int j = 0; j < orbitals.count(); ++j) {
    const Eigen::VectorXcd c = model.plane_wave_coefficients(orbitals.phi.col(j));
    for (Eigen::Index m = 0; m < c.size(); ++m) e += model.grid_k2(static_cast<std::size_t>(m)) * std::norm(c[m]);
  }
  return e;
}

} // namespace

long steps_for(double t, double dt) {
  if (!(t >= 0.0)) throw ConfigError("negative duration");
  const double ratio = t / dt;
  const long n = std::lround(ratio);
  if (std::abs(ratio - static_cast<double>(n)) > 1e-9 * std::max(1.0, ratio))
    throw ConfigError("duration " + std::to_string(t) + " is not a multiple of the time step " + std::to_string(dt));
  return n;
}

SkgStepper::SkgStepper(const Model& model, double dt, CouplingSwitches switches)
    : model_(model), dt_(dt), switches_(switches) {
  if (!(dt > 0.0)) throw ConfigError("time step must be positive");
  const auto& p = model.params();
  const double g = static_cast<double>(model.grid_size());
  const double kin = n_pow(model, -1.0 / 3.0);
  kinetic_phase_.resize(static_cast<Eigen::Index>(model.grid_size()));
  for (std::size_t i = 0; i < model.grid_size(); ++i)
    kinetic_phase_[static_cast<Eigen::Index>(i)] = std::polar(1.0 / g, -kin * model.grid_k2(i) * 0.5 * dt);

  const auto nm = static_cast<Eigen::Index>(model.num_modes());
  rotation_full_ = Eigen::VectorXcd::Ones(nm);
  rotation_half_ = Eigen::VectorXcd::Ones(nm);
  source_prefactor_ = Eigen::VectorXd::Zero(nm);
  const double rate = kin * p.delta_n;
  for (Eigen::Index j = 0; j < nm; ++j) {
    const auto& mode = model.modes()[static_cast<std::size_t>(j)];
    if (switches_.field_rotation) {
      rotation_full_[j] = std::polar(1.0, -rate * mode.omega * dt);
      rotation_half_[j] = std::polar(1.0, -rate * mode.omega * 0.5 * dt);
    }
    if (p.n_particles > 0)
      source_prefactor_[j] = std::pow(kTwoPi, 0.5 * p.dim) * mode.form_factor / p.n_particles;
  }
}

Eigen::VectorXcd SkgStepper::potential_phase(const Eigen::VectorXd& field) const {
  const double scale = n_pow(model_, 1.0 / 3.0) * dt_;
  Eigen::VectorXcd phase(field.size());
  for (Eigen::Index i = 0; i < field.size(); ++i) phase[i] = std::polar(1.0, -scale * field[i]);
  return phase;
}

void SkgStepper::kinetic_half(OrbitalSet& orbitals) const {
  const auto size = model_.grid_size();
  const int n = orbitals.count();
#pragma omp parallel for schedule(static)
  for (int j = 0; j < n; ++j) {
    std::span<cplx> col(orbitals.phi.col(j).data(), size);
    model_.fft().forward(col);
    for (std::size_t i = 0; i < size; ++i) col[i] *= kinetic_phase_[static_cast<Eigen::Index>(i)];
    model_.fft().backward(col);
  }
}

void SkgStepper::apply_potential(OrbitalSet& orbitals, const Eigen::VectorXcd& phase) const {
  const int n = orbitals.count();
#pragma omp parallel for schedule(static)
  for (int j = 0; j < n; ++j) orbitals.phi.col(j).array() *= phase.array();
}

void SkgStepper::advance(SkgState& state) const {
  kinetic_half(state.orbitals);

  const Eigen::VectorXcd alpha_old = state.alpha.alpha;
  Eigen::VectorXcd alpha_new = rotation_full_.cwiseProduct(alpha_old);
  if (switches_.field_source) {
    // |phi| is invariant under the potential substep, so rho here is the midpoint density.
    const Eigen::VectorXcd f_rho = fourier_density(model_, density(model_, state.orbitals));
    const cplx minus_i_dt(0.0, -dt_);
    alpha_new += minus_i_dt * rotation_half_.cwiseProduct(source_prefactor_.cast<cplx>().cwiseProduct(f_rho));
  }
  if (switches_.fermion_potential) {
    const FieldAmplitude mean{(alpha_old + alpha_new) / 2.0};
    apply_potential(state.orbitals, potential_phase(field_from_alpha(model_, mean)));
  }
  state.alpha.alpha = std::move(alpha_new);

  kinetic_half(state.orbitals);
  state.time += dt_;
}

void SkgStepper::advance_frozen(SkgState& state, const Eigen::VectorXcd& potential_phase) const {
  kinetic_half(state.orbitals);
  apply_potential(state.orbitals, potential_phase);
  kinetic_half(state.orbitals);
  state.time += dt_;
}

double skg_energy(const Model& model, const SkgState& state) {
  const auto& p = model.params();
  const Eigen::VectorXd rho = density(model, state.orbitals);
  const Eigen::VectorXd field = field_from_alpha(model, state.alpha);
  double field_energy = 0.0;
  for (std::size_t j = 0; j < model.num_modes(); ++j)
    field_energy += model.modes()[j].omega * std::norm(state.alpha.alpha[static_cast<Eigen::Index>(j)]);
  field_energy *= model.mode_weight() * p.delta_n * n_pow(model, 4.0 / 3.0);
  return kinetic_energy(model, state.orbitals) + n_pow(model, 2.0 / 3.0) * field.dot(rho) * model.cell_volume() +
         field_energy;
}

double free_energy(const Model& model, const SkgState& state, const Eigen::VectorXd& frozen_field) {
  const Eigen::VectorXd rho = density(model, state.orbitals);
  return kinetic_energy(model, state.orbitals) + n_pow(model, 2.0 / 3.0) * frozen_field.dot(rho) * model.cell_volume();
}

Eigen::VectorXd secondorder_residual_field(const Model& model, const Eigen::VectorXd& field_prev, const SkgState& mid,
                                           const Eigen::VectorXd& field_next, double h) {
  const auto& p = model.params();
  const Eigen::VectorXd field_mid = field_from_alpha(model, mid.alpha);
  Eigen::VectorXd residual = (field_next - 2.0 * field_mid + field_prev) / (h * h);

  // (-Laplace + m^2) acts as omega^2 on every mode term of Phi.
  FieldAmplitude weighted{mid.alpha.alpha};
  for (std::size_t j = 0; j < model.num_modes(); ++j)
    weighted.alpha[static_cast<Eigen::Index>(j)] *= model.modes()[j].omega * model.modes()[j].omega;
  const double wave = n_pow(model, -2.0 / 3.0) * p.delta_n * p.delta_n;
  residual += wave * field_from_alpha(model, weighted);

  if (p.n_particles > 0) {
    const Eigen::VectorXcd f_rho = fourier_density(model, density(model, mid.orbitals));
    Eigen::VectorXcd coeff = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(model.grid_size()));
    for (std::size_t j = 0; j < model.num_modes(); ++j)
      coeff[static_cast<Eigen::Index>(model.modes()[j].grid_index)] = f_rho[static_cast<Eigen::Index>(j)];
    model.fft().backward({coeff.data(), static_cast<std::size_t>(coeff.size())});
    const double source = n_pow(model, -1.0 / 3.0) * p.delta_n * std::pow(kTwoPi, -0.5 * p.dim) *
                          model.mode_weight() / p.n_particles;
    residual += source * coeff.real();
  }
  return residual;
}

std::vector<double> ehrenfest_residual_effective(const Model& model, const std::vector<SkgState>& samples) {
  if (samples.size() < 3) throw ConfigError("second-order residual needs at least 3 samples");
  std::vector<Eigen::VectorXd> fields;
  fields.reserve(samples.size());
  for (const auto& s : samples) fields.push_back(field_from_alpha(model, s.alpha));
  std::vector<double> out;
  for (std::size_t i = 1; i + 1 < samples.size(); ++i) {
    const double h = samples[i + 1].time - samples[i].time;
    out.push_back(secondorder_residual_field(model, fields[i - 1], samples[i], fields[i + 1], h)
                      .cwiseAbs()
                      .maxCoeff());
  }
  return out;
}

namespace {

enum class Flow { Coupled, Frozen };

SkgTrajectory integrate(const Model& model, const SkgState& initial, double t_final, const SolveOptions& options,
                        Flow flow) {
  const double dt = model.params().time_step;
  const long n_steps = steps_for(t_final, dt);
  const long every = options.sample_interval > 0.0 ? steps_for(options.sample_interval, dt) : 1;
  if (every < 1) throw ConfigError("sample interval shorter than the time step");

  const CouplingSwitches switches = flow == Flow::Frozen ? CouplingSwitches{false, false, true} : options.switches;
  const SkgStepper stepper(model, dt, switches);
  const double alpha0 = model.alpha_norm(initial.alpha);
  const double eta_norm = model.form_factor_norm();

  const Eigen::VectorXd frozen_field = field_from_alpha(model, initial.alpha);
  const Eigen::VectorXcd frozen_phase = stepper.potential_phase(frozen_field);
  const bool full_coupling = switches.field_source && switches.field_rotation && switches.fermion_potential;
  auto energy = [&](const SkgState& s) {
    if (flow == Flow::Frozen) return free_energy(model, s, frozen_field);
    return full_coupling ? skg_energy(model, s) : kNaN;
  };

  SkgState state = initial;
  state.time = 0.0;
  check_state(model, state);
  const double e0 = energy(state);

  SkgTrajectory traj;
  struct Pending {
    SkgState state;
    StepReport report;
    std::optional<Eigen::VectorXd> field_prev;
  };
  std::optional<Pending> pending;
  auto emit = [&](Pending& p) {
    if (options.on_sample) options.on_sample(p.state, p.report);
    traj.reports.push_back(p.report);
    if (options.keep_states) traj.samples.push_back(std::move(p.state));
  };

  Eigen::VectorXd field_last;
  Eigen::VectorXd field_cur = field_from_alpha(model, state.alpha);
  for (long s = 0; s <= n_steps; ++s) {
    if (s > 0) {
      if (flow == Flow::Frozen)
        stepper.advance_frozen(state, frozen_phase);
      else
        stepper.advance(state);
      state.time = static_cast<double>(s) * dt;
      check_state(model, state);
      field_last = std::move(field_cur);
      field_cur = field_from_alpha(model, state.alpha);
      if (pending) {
        if (pending->field_prev)
          pending->report.secondorder_residual =
              secondorder_residual_field(model, *pending->field_prev, pending->state, field_cur, dt)
                  .cwiseAbs()
                  .maxCoeff();
        emit(*pending);
        pending.reset();
      }
    }
    if (s % every == 0) {
      StepReport r;
      r.time = state.time;
      r.gram_deviation = model.gram_deviation(state.orbitals);
      r.alpha_norm = model.alpha_norm(state.alpha);
      r.alpha_bound = alpha0 + eta_norm * state.time;
      const double e = energy(state);
      r.energy_drift = std::abs(e - e0) / std::max(1.0, std::abs(e0));
      r.secondorder_residual = kNaN;
      pending = Pending{state, r, s > 0 ? std::optional<Eigen::VectorXd>(field_last) : std::nullopt};
    }
  }
  if (pending) emit(*pending);
  return traj;
}

} // namespace

SkgTrajectory solve_skg(const Model& model, const SkgState& initial, double t_final, const SolveOptions& options) {
  return integrate(model, initial, t_final, options, Flow::Coupled);
}

SkgTrajectory solve_free(const Model& model, const SkgState& initial, double t_final, const SolveOptions& options) {
  return integrate(model, initial, t_final, options, Flow::Frozen);
}

std::vector<LatticeVector> fermi_ball_momenta(const Model& model, int count) {
  if (count < 0 || static_cast<std::size_t>(count) > model.grid_size())
    throw ConfigError("Fermi ball larger than the grid");
  std::vector<LatticeVector> all;
  all.reserve(model.grid_size());
  for (std::size_t i = 0; i < model.grid_size(); ++i) all.push_back(model.grid_lattice(i));
  auto norm2 = [](const LatticeVector& v) { return v[0] * v[0] + v[1] * v[1] + v[2] * v[2]; };
  std::sort(all.begin(), all.end(), [&](const LatticeVector& a, const LatticeVector& b) {
    const int na = norm2(a), nb = norm2(b);
    return na != nb ? na < nb : a < b;
  });
  all.resize(static_cast<std::size_t>(count));
  return all;
}

OrbitalSet build_fermi_ball(const Model& model) {
  const int n = model.params().n_particles;
  const auto momenta = fermi_ball_momenta(model, n);
  OrbitalSet out;
  out.phi.resize(static_cast<Eigen::Index>(model.grid_size()), n);
  for (int j = 0; j < n; ++j) out.phi.col(j) = model.plane_wave(momenta[static_cast<std::size_t>(j)]);
  return out;
}

} // namespace nelson
