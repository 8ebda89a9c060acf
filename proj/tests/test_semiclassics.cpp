#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nelson/errors.hpp"
#include "nelson/semiclassics.hpp"
#include "oracles.hpp"

#include <cmath>
#include <random>

using namespace nelson;

namespace {

ModelParams small_params(int dim) {
  ModelParams p;
  p.dim = dim;
  p.grid_points = dim == 1 ? 16 : 8;
  p.box_length = dim == 1 ? 5.0 : 3.0;
  return p;
}

struct Dense {
  double tn_peq, hs_peq, tn_comm, tn_grad;
};

Dense dense_norms(const Model& m, const OrbitalSet& orb, const LatticeVector& n) {
  const Eigen::MatrixXcd p = oracle::projector(m, orb);
  const auto g = static_cast<Eigen::Index>(m.grid_size());
  const Eigen::MatrixXcd q = Eigen::MatrixXcd::Identity(g, g) - p;
  const Eigen::MatrixXcd e = oracle::plane_wave_matrix(m, n);
  // p grad q maps into d copies of the grid: stack the components vertically
  Eigen::MatrixXcd grad(g * m.dim(), g);
  for (int a = 0; a < m.dim(); ++a) grad.middleRows(a * g, g) = p * oracle::derivative_matrix(m, a) * q;
  const Eigen::MatrixXcd peq = p * e * q;
  return {oracle::trace_norm(peq), oracle::hs_norm(peq), oracle::trace_norm(p * e - e * p),
          oracle::trace_norm(grad)};
}

} // namespace

TEST_CASE("trace norms agree with the dense oracle on random cases") {
  std::mt19937_64 rng(11);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int dim = trial % 2 == 0 ? 1 : 2;
    const Model m(small_params(dim));
    const int count = 1 + trial % 4;
    const OrbitalSet orb = oracle::random_orbitals(m, count, rng);
    const LatticeVector n = oracle::random_lattice(m, 3, rng);
    const SlaterProjector proj(m, orb);
    const Dense d = dense_norms(m, orb, n);
    const TraceNormReport r = trace_norm_report(proj, n, 0.0);
    worst = std::max({worst, std::abs(r.tn_peq - d.tn_peq), std::abs(r.hs_peq - d.hs_peq),
                      std::abs(r.tn_commutator - d.tn_comm), std::abs(r.tn_pgradq - d.tn_grad) / (1.0 + d.tn_grad)});
  }
  CHECK(worst < 1e-8);
}

TEST_CASE("plane-wave Slater determinant has integer trace norms") {
  // p = projector onto momenta {0, -1}; p e_k q counts ball momenta reachable from outside.
  const Model m{ModelParams{}};
  const SlaterProjector proj(m, build_fermi_ball(m));
  CHECK(trace_norm_p_op_q(proj, PlaneWaveOp{{1, 0, 0}}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(trace_norm_p_op_q(proj, PlaneWaveOp{{2, 0, 0}}) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(commutator_trace_norm(proj, {1, 0, 0}) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(trace_norm_p_op_q(proj, PlaneWaveOp{{0, 0, 0}}) < 1e-12);
  // plane waves are eigenfunctions of the gradient
  CHECK(trace_norm_p_op_q(proj, GradientOp{}) < 1e-10);
}

TEST_CASE("norm inequalities") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const Model m(small_params(1));
    const OrbitalSet orb = oracle::random_orbitals(m, 3, rng);
    const SlaterProjector proj(m, orb);
    const LatticeVector n = oracle::random_lattice(m, 4, rng);
    const LatticeVector minus{-n[0], -n[1], -n[2]};
    const TraceNormReport r = trace_norm_report(proj, n, 0.0);
    // singular values of p e q are at most one
    CHECK(r.hs_peq * r.hs_peq <= r.tn_peq + 1e-12);
    CHECK(r.hs_peq <= r.tn_peq + 1e-12);
    // [p, e] = p e q - q e p with orthogonal ranges and co-ranges
    const double back = trace_norm_p_op_q(proj, PlaneWaveOp{minus});
    CHECK(r.tn_commutator == doctest::Approx(r.tn_peq + back).epsilon(1e-10));
    CHECK(r.tn_peq <= r.tn_commutator + 1e-12);
    CHECK(r.tn_commutator <= 2.0 * 3 + 1e-12);
  }
}

TEST_CASE("trace norms are invariant under orbital rotations") {
  std::mt19937_64 rng(8);
  const Model m(small_params(2));
  const OrbitalSet orb = oracle::random_orbitals(m, 4, rng);
  OrbitalSet rotated;
  rotated.phi = orb.phi * oracle::random_unitary(4, rng);
  const SlaterProjector a(m, orb), b(m, rotated);
  const LatticeVector n{1, -1, 0};
  const TraceNormReport ra = trace_norm_report(a, n, 0.0), rb = trace_norm_report(b, n, 0.0);
  CHECK(ra.tn_peq == doctest::Approx(rb.tn_peq).epsilon(1e-10));
  CHECK(ra.tn_commutator == doctest::Approx(rb.tn_commutator).epsilon(1e-10));
  CHECK(ra.tn_pgradq == doctest::Approx(rb.tn_pgradq).epsilon(1e-10));
  CHECK(projector_distance(m, orb, rotated) < 1e-10);
}

TEST_CASE("projector distance matches the dense oracle") {
  std::mt19937_64 rng(21);
  const Model m(small_params(1));
  for (int trial = 0; trial < 10; ++trial) {
    const OrbitalSet a = oracle::random_orbitals(m, 3, rng);
    const OrbitalSet b = oracle::random_orbitals(m, 3, rng);
    const double dense = oracle::trace_norm(oracle::projector(m, a) - oracle::projector(m, b));
    CHECK(projector_distance(m, a, b) == doctest::Approx(dense).epsilon(1e-10));
  }
  // orthogonal ranges: distance 2N
  const OrbitalSet ball = build_fermi_ball(m);
  OrbitalSet far;
  far.phi.resize(16, 2);
  far.phi.col(0) = m.plane_wave({3, 0, 0});
  far.phi.col(1) = m.plane_wave({4, 0, 0});
  CHECK(projector_distance(m, ball, far) == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("diagonalization of p cos(kx) p") {
  std::mt19937_64 rng(2);
  const Model m(small_params(1));
  const OrbitalSet orb = oracle::random_orbitals(m, 4, rng);
  const SlaterProjector proj(m, orb);
  const LatticeVector n{2, 0, 0};
  const CosDiagonalization diag = diagonalize_p_cos(proj, n);
  REQUIRE(diag.eigenvalues.size() == 4);
  CHECK(diag.eigenvalues.cwiseAbs().maxCoeff() <= 1.0 + 1e-12);
  CHECK((diag.coefficients.adjoint() * diag.coefficients - Eigen::MatrixXcd::Identity(4, 4)).norm() < 1e-12);

  // oracle: cos(kx) = (e + e*)/2 compressed to the orbital span
  const Eigen::MatrixXcd u = orb.phi * std::sqrt(m.cell_volume());
  const Eigen::MatrixXcd e = oracle::plane_wave_matrix(m, n);
  const Eigen::MatrixXcd h = u.adjoint() * (0.5 * (e + e.adjoint())) * u;
  const Eigen::MatrixXcd chi = diag.coefficients.adjoint() * h * diag.coefficients;
  CHECK((chi - Eigen::MatrixXcd(diag.eigenvalues.cast<cplx>().asDiagonal())).norm() < 1e-12);
}

TEST_CASE("growth fit") {
  std::vector<std::pair<double, double>> series;
  for (int i = 0; i <= 10; ++i) {
    const double t = 0.1 * i;
    series.emplace_back(t, 0.3 * std::exp(1.7 * t * t));
  }
  series.emplace_back(2.0, 0.0); // non-positive values are skipped
  const GrowthFit fit = fit_growth(series);
  CHECK(fit.points == 11);
  CHECK(fit.prefactor == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(fit.rate == doctest::Approx(1.7).epsilon(1e-12));
  CHECK(fit.rms_log_residual < 1e-12);
  CHECK(fit_growth({}).points == 0);
}

TEST_CASE("non-orthonormal orbitals are rejected") {
  const Model m{ModelParams{}};
  OrbitalSet bad = build_fermi_ball(m);
  bad.phi.col(1) = bad.phi.col(0);
  CHECK_THROWS_AS(SlaterProjector(m, bad), NumericalError);
}

TEST_CASE("scan over the default k list") {
  const Model m{ModelParams{}};
  SkgState s;
  s.orbitals = build_fermi_ball(m);
  s.alpha.alpha = Eigen::VectorXcd::Zero(5);
  const auto ks = default_k_list(m);
  CHECK(ks.size() == 5);
  const ScanResult r = semiclassical_scan(m, {s}, ks);
  CHECK(r.reports.size() == 5);
  REQUIRE(r.combined.size() == 1);
  // sup over |n| <= 2 of tn / (1 + |k|): n = 2 gives 2/3, n = -2 gives 2/3
  CHECK(r.combined[0].second == doctest::Approx(2.0 / 3.0).epsilon(1e-10));
}
