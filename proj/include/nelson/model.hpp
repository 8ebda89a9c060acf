#pragma once

#include "nelson/fft.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <memory>
#include <numbers>
#include <vector>

namespace nelson {

using Momentum = std::array<double, 3>;
using LatticeVector = std::array<int, 3>;

/// Physical and numerical parameters. Units hbar = c = 1.
struct ModelParams {
  int n_particles = 2;     // N
  double cutoff = 2.0;     // Lambda, >= 1
  double delta_n = 1.0;    // scaling of the free field energy
  double boson_mass = 1.0; // m >= 0
  int dim = 1;             // spatial dimension, 1..3
  double box_length = 2.0 * std::numbers::pi;
  int grid_points = 16; // per axis, power of two
  double time_step = 1e-3;
  int fock_n_max = 2; // photons per mode in the truncated Fock space

  /// Throws ConfigError on violation.
  void validate() const;

  bool operator==(const ModelParams&) const = default;
};

/// One retained boson mode k = 2 pi n / L with |k| <= Lambda.
struct BosonMode {
  LatticeVector n{};
  Momentum k{};
  double k_abs = 0.0;
  double omega = 0.0;
  double form_factor = 0.0;
  std::size_t grid_index = 0; // position of k in the FFT-ordered lattice array
  std::size_t partner = 0;    // index of the mode -k
};

/// N orbitals stored as the columns of a (grid size) x N matrix.
struct OrbitalSet {
  Eigen::MatrixXcd phi;

  [[nodiscard]] int count() const { return static_cast<int>(phi.cols()); }
};

/// Samples alpha(k_kappa) of the continuum field amplitude on the retained modes.
struct FieldAmplitude {
  Eigen::VectorXcd alpha;
};

/// Immutable discretized model: periodic grid, momentum lattice, retained modes.
class Model {
public:
  explicit Model(const ModelParams& params);

  [[nodiscard]] const ModelParams& params() const { return params_; }
  [[nodiscard]] int dim() const { return params_.dim; }
  [[nodiscard]] int points_per_axis() const { return params_.grid_points; }
  [[nodiscard]] std::size_t grid_size() const { return grid_size_; }
  [[nodiscard]] double dx() const { return dx_; }
  /// Delta x^d
  [[nodiscard]] double cell_volume() const { return cell_volume_; }
  [[nodiscard]] double dk() const { return dk_; }
  /// Delta k^d, the weight replacing d^dk
  [[nodiscard]] double mode_weight() const { return mode_weight_; }
  /// L^d
  [[nodiscard]] double volume() const { return volume_; }

  [[nodiscard]] const std::vector<BosonMode>& modes() const { return modes_; }
  [[nodiscard]] std::size_t num_modes() const { return modes_.size(); }

  /// Integer lattice coordinates (FFT ordering, in [-n/2, n/2)) of grid array index idx.
  [[nodiscard]] LatticeVector grid_lattice(std::size_t idx) const;
  [[nodiscard]] Momentum grid_momentum(std::size_t idx) const;
  [[nodiscard]] double grid_k2(std::size_t idx) const { return k2_[idx]; }
  /// Array index of an integer lattice vector, periodically wrapped.
  [[nodiscard]] std::size_t grid_index_of(const LatticeVector& n) const;
  [[nodiscard]] Momentum position(std::size_t idx) const;

  /// sqrt(sum_kappa Delta k^d eta(k_kappa)^2)
  [[nodiscard]] double form_factor_norm() const;

  [[nodiscard]] const FftPlan& fft() const { return *fft_; }

  /// <f, g> = sum_x conj(f) g Delta x^d
  [[nodiscard]] cplx inner(const Eigen::Ref<const Eigen::VectorXcd>& f,
                           const Eigen::Ref<const Eigen::VectorXcd>& g) const;
  /// Gram matrix G_ij = <phi_i, phi_j>.
  [[nodiscard]] Eigen::MatrixXcd gram(const OrbitalSet& orbitals) const;
  /// max_ij |G_ij - delta_ij|
  [[nodiscard]] double gram_deviation(const OrbitalSet& orbitals) const;
  /// sqrt(sum_kappa Delta k^d |alpha_kappa|^2)
  [[nodiscard]] double alpha_norm(const FieldAmplitude& alpha) const;

  /// Momentum-space coefficients <e_m, f> in the plane-wave basis
  /// e_m(x) = exp(i k_m x) / sqrt(L^d), indexed by grid array index.
  [[nodiscard]] Eigen::VectorXcd plane_wave_coefficients(const Eigen::Ref<const Eigen::VectorXcd>& f) const;
  /// Inverse of plane_wave_coefficients.
  [[nodiscard]] Eigen::VectorXcd from_plane_wave_coefficients(const Eigen::Ref<const Eigen::VectorXcd>& c) const;
  /// The normalized plane wave exp(i k x)/sqrt(L^d) for the lattice vector n.
  [[nodiscard]] Eigen::VectorXcd plane_wave(const LatticeVector& n) const;

private:
  ModelParams params_;
  std::size_t grid_size_ = 0;
  double dx_ = 0, cell_volume_ = 0, dk_ = 0, mode_weight_ = 0, volume_ = 0;
  std::vector<double> k2_;
  std::vector<BosonMode> modes_;
  std::shared_ptr<const FftPlan> fft_;
};

/// omega(k) = sqrt(|k|^2 + m^2)
[[nodiscard]] double dispersion(const Momentum& k, double mass);

/// (2 pi)^{-d/2} / sqrt(2 omega(k)) for |k| <= Lambda, else 0.
/// Throws ConfigError if omega(k) = 0 (the excluded zero mode at m = 0).
[[nodiscard]] double form_factor(const Momentum& k, const ModelParams& params);

/// Phi(x) = sum_kappa Delta k^d eta(k) (exp(i k x) alpha_kappa + exp(-i k x) conj(alpha_kappa)).
[[nodiscard]] Eigen::VectorXd field_from_alpha(const Model& model, const FieldAmplitude& alpha);

/// rho(x) = sum_j |phi_j(x)|^2
[[nodiscard]] Eigen::VectorXd density(const OrbitalSet& orbitals, std::size_t grid_size);
[[nodiscard]] Eigen::VectorXd density(const Model& model, const OrbitalSet& orbitals);

/// F[f](k) = (2 pi)^{-d/2} sum_x exp(-i k x) f(x) Delta x^d on the full lattice (FFT order).
[[nodiscard]] Eigen::VectorXcd fourier_transform(const Model& model, const Eigen::VectorXd& f);

/// fourier_transform restricted to the retained boson modes (mode order).
[[nodiscard]] Eigen::VectorXcd fourier_density(const Model& model, const Eigen::VectorXd& rho);

} // namespace nelson
