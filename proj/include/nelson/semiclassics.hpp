#pragma once

#include "nelson/model.hpp"
#include "nelson/skg.hpp"

#include <variant>
#include <vector>

namespace nelson {

/// The rank-N projector p = sum_j |phi_j><phi_j| of an orthonormal orbital family.
class SlaterProjector {
public:
  /// Throws NumericalError if the Gram deviation exceeds 1e-6.
  SlaterProjector(const Model& model, OrbitalSet orbitals);

  [[nodiscard]] const Model& model() const { return *model_; }
  [[nodiscard]] const OrbitalSet& orbitals() const { return orbitals_; }
  [[nodiscard]] int rank() const { return orbitals_.count(); }

  /// p f
  [[nodiscard]] Eigen::VectorXcd apply(const Eigen::Ref<const Eigen::VectorXcd>& f) const;
  /// q f = f - p f
  [[nodiscard]] Eigen::VectorXcd apply_complement(const Eigen::Ref<const Eigen::VectorXcd>& f) const;

private:
  const Model* model_;
  OrbitalSet orbitals_;
};

/// Multiplication by exp(i k.x), k = 2 pi n / L.
struct PlaneWaveOp {
  LatticeVector n{};
};
/// The gradient, by exact Fourier differentiation.
struct GradientOp {};
using OneBodyOp = std::variant<PlaneWaveOp, GradientOp>;

/// ||p A q||_Tr from the N x N (N d x N d for the gradient) Gram matrix of q A* phi_j.
[[nodiscard]] double trace_norm_p_op_q(const SlaterProjector& proj, const OneBodyOp& op);
/// ||p A q||_HS
[[nodiscard]] double hs_norm_p_op_q(const SlaterProjector& proj, const OneBodyOp& op);
/// ||[p, exp(i k x)]||_Tr from the singular values of its nonzero block.
[[nodiscard]] double commutator_trace_norm(const SlaterProjector& proj, const LatticeVector& n);

struct TraceNormReport {
  double time = 0.0;
  LatticeVector n{};
  double k_abs = 0.0;
  double tn_peq = 0.0;
  double tn_commutator = 0.0;
  double tn_pgradq = 0.0;
  double hs_peq = 0.0;
};

[[nodiscard]] TraceNormReport trace_norm_report(const SlaterProjector& proj, const LatticeVector& n, double time);

/// Default k list: every retained boson mode.
[[nodiscard]] std::vector<LatticeVector> default_k_list(const Model& model);

struct ScanResult {
  std::vector<TraceNormReport> reports;
  /// time and sup_k (1+|k|)^{-1} tn_peq + N^{-1/3} tn_pgradq, one entry per sample
  std::vector<std::pair<double, double>> combined;
};

ScanResult semiclassical_scan(const Model& model, const std::vector<SkgState>& samples,
                              const std::vector<LatticeVector>& k_list);

/// Least-squares fit of log(y) = log(A) + B t^2.
struct GrowthFit {
  double prefactor = 0.0; // A
  double rate = 0.0;      // B
  double rms_log_residual = 0.0;
  int points = 0;
};
GrowthFit fit_growth(const std::vector<std::pair<double, double>>& series);

struct CosDiagonalization {
  Eigen::VectorXd eigenvalues;
  /// Column j holds the coefficients of chi_j in the orbital basis.
  Eigen::MatrixXcd coefficients;
};

/// Spectral decomposition of p cos(k x) p restricted to span{phi_j}.
CosDiagonalization diagonalize_p_cos(const SlaterProjector& proj, const LatticeVector& n);

/// ||p_a - p_b||_Tr for two orthonormal families of equal size.
[[nodiscard]] double projector_distance(const Model& model, const OrbitalSet& a, const OrbitalSet& b);

/// exp(i k x) f on the grid.
[[nodiscard]] Eigen::VectorXcd multiply_plane_wave(const Model& model, const LatticeVector& n,
                                                   const Eigen::Ref<const Eigen::VectorXcd>& f);
/// d f / d x_axis by Fourier differentiation.
[[nodiscard]] Eigen::VectorXcd gradient_component(const Model& model, int axis,
                                                  const Eigen::Ref<const Eigen::VectorXcd>& f);

} // namespace nelson
