#pragma once

#include "nelson/model.hpp"

#include <Eigen/Sparse>

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace nelson {

/// Truncated many-body basis: N-subsets of the M grid plane-wave modes (bitmasks,
/// colex order) times boson occupations n_kappa in {0..n_max} (mixed radix, mode 0
/// fastest). Full index = fermion_rank * boson_dim + boson_index.
class FockBasis {
public:
  static constexpr std::size_t kDefaultBudget = 200000;

  /// Throws BudgetError if the dimension exceeds the budget.
  FockBasis(const Model& model, std::size_t budget = kDefaultBudget);

  [[nodiscard]] int num_fermion_modes() const { return num_fermion_modes_; }
  [[nodiscard]] int n_particles() const { return n_particles_; }
  [[nodiscard]] int n_max() const { return n_max_; }
  [[nodiscard]] std::size_t num_boson_modes() const { return num_boson_modes_; }
  [[nodiscard]] std::size_t fermion_dim() const { return configs_.size(); }
  [[nodiscard]] std::size_t boson_dim() const { return boson_dim_; }
  [[nodiscard]] std::size_t dim() const { return configs_.size() * boson_dim_; }

  [[nodiscard]] std::uint64_t fermion_config(std::size_t rank) const { return configs_[rank]; }
  [[nodiscard]] std::size_t fermion_rank(std::uint64_t mask) const;
  [[nodiscard]] std::size_t boson_stride(std::size_t mode) const { return strides_[mode]; }
  [[nodiscard]] int occupation(std::size_t boson_index, std::size_t mode) const {
    return static_cast<int>((boson_index / strides_[mode]) % static_cast<std::size_t>(n_max_ + 1));
  }
  [[nodiscard]] std::size_t boson_index(std::span<const int> occupations) const;
  [[nodiscard]] std::size_t index(std::size_t fermion_rank, std::size_t boson_index) const {
    return fermion_rank * boson_dim_ + boson_index;
  }

private:
  int num_fermion_modes_;
  int n_particles_;
  int n_max_;
  std::size_t num_boson_modes_;
  std::size_t boson_dim_;
  std::vector<std::size_t> strides_;
  std::vector<std::uint64_t> configs_;
  std::vector<std::vector<std::size_t>> binomial_;
};

/// Result of c+_to c_from on a configuration; sign 0 means the zero vector.
struct Hop {
  std::uint64_t mask = 0;
  int sign = 0;
};
[[nodiscard]] Hop fermion_hop(std::uint64_t mask, int to, int from);

struct ManyBodyState {
  Eigen::VectorXcd amplitudes;
  [[nodiscard]] double norm() const { return amplitudes.norm(); }
};

/// a_kappa psi
[[nodiscard]] Eigen::VectorXcd apply_annihilation(const FockBasis& basis, const Eigen::VectorXcd& psi,
                                                  std::size_t mode);

struct LadderResult {
  Eigen::VectorXcd amplitudes;
  /// Norm^2 of the component that would have left the truncated space.
  double truncation_loss = 0.0;
};
/// a+_kappa psi; creation out of n_max maps to zero.
[[nodiscard]] LadderResult apply_creation(const FockBasis& basis, const Eigen::VectorXcd& psi, std::size_t mode);

using SparseMatrixC = Eigen::SparseMatrix<cplx, Eigen::RowMajor, std::int64_t>;

/// H_N = sum_j (-Laplace_j + Phi(x_j)) + delta_N H_f on the truncated basis.
struct FockHamiltonian {
  SparseMatrixC matrix;

  /// y = H x, rows in parallel.
  void apply(const Eigen::VectorXcd& x, Eigen::VectorXcd& y) const;
  [[nodiscard]] double expectation(const Eigen::VectorXcd& psi) const;
  [[nodiscard]] std::size_t dim() const { return static_cast<std::size_t>(matrix.rows()); }
};

/// coupling = false drops the field operator term (eta -> 0).
FockHamiltonian build_hamiltonian(const Model& model, const FockBasis& basis, bool coupling = true);

/// Plane-wave coefficients C(m, j) = <e_m, phi_j>, m = grid array index.
[[nodiscard]] Eigen::MatrixXcd orbital_mode_coefficients(const Model& model, const OrbitalSet& orbitals);
/// The discrete coherent amplitude of each mode: f = N^{2/3} alpha sqrt(Delta k^d).
[[nodiscard]] Eigen::VectorXcd coherent_amplitudes(const Model& model, const FieldAmplitude& alpha);

struct PreparedState {
  ManyBodyState state;
  /// 1 - (norm^2 of the truncated coherent factor) before renormalization.
  double truncation_weight = 0.0;
};

/// Slater determinant of the orbitals times the truncated coherent state W(N^{2/3} alpha) Omega.
/// Throws BudgetError if the truncation weight exceeds the threshold.
PreparedState prepare_slater_coherent(const Model& model, const FockBasis& basis, const OrbitalSet& orbitals,
                                      const FieldAmplitude& alpha, double truncation_threshold = 1e-6);

enum class PropagationMethod { Auto, Krylov, Dense };

struct PropagationOptions {
  double sample_interval = 0.0; // 0: only the final state is reported
  PropagationMethod method = PropagationMethod::Auto;
  /// Accepted a-posteriori error per substep (vector 2-norm).
  double tolerance = 1e-13;
  int krylov_dim = 30;
  std::size_t dense_limit = 2000;
};

struct PropagationStats {
  long substeps = 0;
  long matvecs = 0;
  double max_error_estimate = 0.0;
  double max_norm_drift = 0.0;
  bool used_dense = false;
};

/// exp(-i N^{-1/3} H t) by residual-controlled Arnoldi steps or by dense
/// diagonalization (small dimensions).
class FockPropagator {
public:
  FockPropagator(const Model& model, const FockHamiltonian& hamiltonian, PropagationOptions options = {});

  /// Advance psi by time t.
  void advance(Eigen::VectorXcd& psi, double t);
  [[nodiscard]] const PropagationStats& stats() const { return stats_; }
  [[nodiscard]] bool dense() const { return dense_; }

private:
  void advance_krylov(Eigen::VectorXcd& psi, double t);
  void advance_dense(Eigen::VectorXcd& psi, double t) const;

  const FockHamiltonian& h_;
  double scale_;
  PropagationOptions options_;
  PropagationStats stats_;
  bool dense_ = false;
  Eigen::MatrixXcd eigvecs_;
  Eigen::VectorXd eigvals_;
  double step_guess_ = 0.0;
};

/// Propagates to t_final, calling observer(t, psi) at t = 0 and every sample.
/// Throws NumericalError if the norm drifts by more than 1e-8.
PropagationStats propagate(const Model& model, const FockHamiltonian& hamiltonian, ManyBodyState& state,
                           double t_final, const PropagationOptions& options,
                           const std::function<void(double, const Eigen::VectorXcd&)>& observer);

/// Fermion reduced matrix D(S, S') = sum_b psi(S, b) conj(psi(S', b)).
[[nodiscard]] Eigen::MatrixXcd fermion_configuration_matrix(const FockBasis& basis, const Eigen::VectorXcd& psi);

struct ReducedDensities {
  /// gamma^{(1,0)}(m, m') = N^{-1} <c+_m' c_m>, trace 1
  Eigen::MatrixXcd gamma_f;
  /// gamma^{(2,0)}[(c,d),(a,b)] = <c+_a c+_b c_d c_c> / (N(N-1)), trace 1; empty for N < 2
  Eigen::MatrixXcd gamma_f2;
  /// gamma^{(0,1)}(kappa, kappa') = N^{-4/3} <a+_kappa' a_kappa> / Delta k^d
  Eigen::MatrixXcd gamma_b;
  /// <N>, the photon number
  double photon_number = 0.0;
};

ReducedDensities reduced_densities(const Model& model, const FockBasis& basis, const Eigen::VectorXcd& psi,
                                   bool with_two_body = true);

struct BetaReport {
  double beta_a1 = 0.0;
  double beta_a2 = 0.0;
  double beta_b = 0.0;
  double beta_total = 0.0;
  /// ||gamma^{(1,0)} - N^{-1} p||_Tr
  double tn_gamma_f = 0.0;
  /// ||gamma^{(0,1)} - |alpha><alpha| ||_Tr
  double tn_gamma_b = 0.0;
  double alpha_norm = 0.0;
  /// tn_gamma_f - 2 beta_a1
  double margin_f_lower = 0.0;
  /// sqrt(8 beta_a1) - tn_gamma_f
  double margin_f_upper = 0.0;
  /// 3 N^{-1/3} beta_b + 6 ||alpha|| sqrt(N^{-1/3} beta_b) - tn_gamma_b
  double margin_b = 0.0;
  /// N^{-1} <W^{-1} psi, N W^{-1} psi> with W materialized on the truncated space
  double beta_b_weyl = 0.0;
};

BetaReport beta_report(const Model& model, const FockBasis& basis, const Eigen::VectorXcd& psi,
                       const OrbitalSet& orbitals, const FieldAmplitude& alpha);

/// dGamma(h) on the fermion configurations as a dense F x F matrix (h in the mode basis).
[[nodiscard]] Eigen::MatrixXcd second_quantized_one_body(const FockBasis& basis, const Eigen::MatrixXcd& h);
/// (dGamma(h) (x) 1_bosons) psi
[[nodiscard]] Eigen::VectorXcd apply_one_body(const FockBasis& basis, const Eigen::MatrixXcd& h,
                                              const Eigen::VectorXcd& psi);

/// W(f) = exp(f a+ - conj(f) a) on the truncated single-mode space {0..n_max}.
[[nodiscard]] Eigen::MatrixXcd truncated_weyl(int n_max, cplx f);
/// Applies the single-mode matrix to every boson mode: (x)_kappa w[kappa].
[[nodiscard]] Eigen::VectorXcd apply_mode_product(const FockBasis& basis, const std::vector<Eigen::MatrixXcd>& w,
                                                  const Eigen::VectorXcd& psi);

/// Mean field and mean density modes extracted from a many-body state.
struct FieldObservables {
  double time = 0.0;
  Eigen::VectorXcd a_mean;   // <a_kappa>
  Eigen::VectorXcd rho_mean; // <sum_j exp(i k_kappa x_j)>
  double energy = 0.0;
  double norm = 0.0;
};

FieldObservables field_observables(const Model& model, const FockBasis& basis, const Eigen::VectorXcd& psi,
                                   double time);

/// <Phi(x)> = sum_kappa sqrt(Delta k^d) eta (exp(ikx) <a> + c.c.)
[[nodiscard]] double mean_field_at(const Model& model, const FieldObservables& obs, const Momentum& x);

struct EhrenfestPoint {
  double time = 0.0;
  double lhs = 0.0;
  double rhs = 0.0;
  double residual = 0.0;
};

/// Field Ehrenfest identity at x for every interior sample of a uniformly spaced series.
std::vector<EhrenfestPoint> ehrenfest_check(const Model& model, const std::vector<FieldObservables>& series,
                                            const Momentum& x);

struct AntisymmetricBoundReport {
  int trials = 0;
  double max_ratio = 0.0;
  int violations = 0;
};

/// Randomized check of |<psi, A_1 psi'>| <= (N-j)^{-1} ||A||_Tr ||psi|| ||psi'|| on
/// first-quantized tensors antisymmetric in slot 1 and all but j other slots.
AntisymmetricBoundReport antisymmetric_bound_check(int num_trials, int n_particles, int one_particle_dim,
                                                   int boson_dim, std::uint64_t seed);

struct ComplementProjectorReport {
  double max_commutator = 0.0;    // max_jk ||[Q^{chi_j}, Q^{chi_k}]||_max
  double sum_identity_error = 0.0; // ||sum_j Q^{chi_j} - sum_m q_m||_max
  double idempotency_error = 0.0;  // max_j ||(P^{chi_j})^2 - P^{chi_j}||_max
};

/// chi = phi * rotation (unitary N x N).
ComplementProjectorReport complement_projector_check(const Model& model, const FockBasis& basis,
                                                     const OrbitalSet& orbitals, const Eigen::MatrixXcd& rotation);

/// Snapshot: magic, header (M, N, dim, n_max, mode list), amplitudes as LE f64 pairs.
void write_snapshot(const std::string& path, const Model& model, const FockBasis& basis, const ManyBodyState& state);
ManyBodyState read_snapshot(const std::string& path, const Model& model, const FockBasis& basis);

} // namespace nelson
