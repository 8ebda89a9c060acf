#include "nelson/errors.hpp"
#include "nelson/fock.hpp"
#include "nelson/skg.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace nelson {

FockPropagator::FockPropagator(const Model& model, const FockHamiltonian& hamiltonian, PropagationOptions options)
    : h_(hamiltonian), scale_(std::pow(static_cast<double>(model.params().n_particles), -1.0 / 3.0)),
      options_(options) {
  if (options_.krylov_dim < 2) throw ConfigError("krylov_dim must be at least 2");
  if (!(options_.tolerance > 0.0)) throw ConfigError("propagation tolerance must be positive");
  dense_ = options_.method == PropagationMethod::Dense ||
           (options_.method == PropagationMethod::Auto && h_.dim() <= options_.dense_limit);
  if (dense_) {
    Eigen::MatrixXcd full = Eigen::MatrixXcd(h_.matrix);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(full);
    if (eig.info() != Eigen::Success) throw NumericalError("dense diagonalization of H failed");
    eigvecs_ = eig.eigenvectors();
    eigvals_ = eig.eigenvalues();
    stats_.used_dense = true;
  }
}

void FockPropagator::advance(Eigen::VectorXcd& psi, double t) {
  if (t == 0.0) return;
  if (dense_)
    advance_dense(psi, t);
  else
    advance_krylov(psi, t);
}

void FockPropagator::advance_dense(Eigen::VectorXcd& psi, double t) const {
  Eigen::VectorXcd c = eigvecs_.adjoint() * psi;
  for (Eigen::Index i = 0; i < c.size(); ++i) c[i] *= std::exp(cplx(0.0, -scale_ * eigvals_[i] * t));
  psi = eigvecs_ * c;
}

void FockPropagator::advance_krylov(Eigen::VectorXcd& psi, double t) {
  const auto n = static_cast<Eigen::Index>(h_.dim());
  const int m_max = static_cast<int>(std::min<Eigen::Index>(options_.krylov_dim, n));
  const double direction = t < 0 ? -1.0 : 1.0;
  double remaining = std::abs(t);
  if (step_guess_ <= 0.0) step_guess_ = remaining;

  Eigen::MatrixXcd v(n, m_max + 1);
  Eigen::MatrixXcd hess = Eigen::MatrixXcd::Zero(m_max + 1, m_max);
  Eigen::VectorXcd w;

  // exp(-i scale H tau) e_1 in the current Krylov space and its a-posteriori error
  auto small_exp = [&](int m, double beta, double h_next, double tau, Eigen::VectorXcd& y) {
    Eigen::MatrixXcd tm = hess.topLeftCorner(m, m);
    // H is Hermitian, so the projected matrix is Hermitian up to roundoff.
    tm = 0.5 * (tm + tm.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(tm);
    Eigen::VectorXcd c = eig.eigenvectors().row(0).adjoint();
    for (int i = 0; i < m; ++i) c[i] *= std::exp(cplx(0.0, -direction * scale_ * eig.eigenvalues()[i] * tau));
    y = eig.eigenvectors() * c;
    return beta * h_next * std::abs(y[m - 1]);
  };

  while (remaining > 0.0) {
    const double beta = psi.norm();
    if (beta == 0.0) return;
    v.col(0) = psi / beta;
    hess.setZero();
    double tau = std::min(remaining, step_guess_);
    Eigen::VectorXcd y;
    double err = std::numeric_limits<double>::infinity();
    int m = 0;
    for (int j = 0; j < m_max; ++j) {
      h_.apply(v.col(j), w);
      ++stats_.matvecs;
      // two passes of classical Gram-Schmidt
      for (int pass = 0; pass < 2; ++pass) {
        const Eigen::VectorXcd proj = v.leftCols(j + 1).adjoint() * w;
        w.noalias() -= v.leftCols(j + 1) * proj;
        hess.col(j).head(j + 1) += proj;
      }
      const double hn = w.norm();
      hess(j + 1, j) = hn;
      m = j + 1;
      const bool breakdown = hn < 1e-14 * std::max(1.0, hess.col(j).head(j + 1).norm());
      if (!breakdown) v.col(j + 1) = w / hn;
      err = small_exp(m, beta, breakdown ? 0.0 : hn, tau, y);
      if (breakdown || err <= options_.tolerance) break;
    }
    for (int attempt = 0; err > options_.tolerance && attempt < 60; ++attempt) {
      tau *= std::clamp(0.9 * std::pow(options_.tolerance / err, 1.0 / m), 0.1, 0.9);
      err = small_exp(m, beta, std::abs(hess(m, m - 1)), tau, y);
    }
    if (err > options_.tolerance) throw NumericalError("Krylov step failed to reach the requested tolerance");

    psi.noalias() = beta * (v.leftCols(m) * y);
    remaining -= tau;
    if (remaining < 1e-15 * std::abs(t)) remaining = 0.0;
    ++stats_.substeps;
    stats_.max_error_estimate = std::max(stats_.max_error_estimate, err);
    step_guess_ = m < m_max || err < 0.1 * options_.tolerance ? 2.0 * tau : tau;
  }
}

PropagationStats propagate(const Model& model, const FockHamiltonian& hamiltonian, ManyBodyState& state,
                           double t_final, const PropagationOptions& options,
                           const std::function<void(double, const Eigen::VectorXcd&)>& observer) {
  FockPropagator prop(model, hamiltonian, options);
  const double norm0 = state.norm();
  const double interval = options.sample_interval > 0.0 ? options.sample_interval : t_final;
  const long samples = t_final > 0.0 ? steps_for(t_final, interval) : 0;
  double drift = 0.0;
  if (observer) observer(0.0, state.amplitudes);
  for (long s = 1; s <= samples; ++s) {
    prop.advance(state.amplitudes, interval);
    drift = std::max(drift, std::abs(state.norm() - norm0));
    if (!std::isfinite(drift) || drift > 1e-8)
      throw NumericalError("many-body norm drifted by " + std::to_string(drift));
    if (observer) observer(static_cast<double>(s) * interval, state.amplitudes);
  }
  PropagationStats stats = prop.stats();
  stats.max_norm_drift = drift;
  return stats;
}

} // namespace nelson
