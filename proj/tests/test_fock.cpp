#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nelson/errors.hpp"
#include "nelson/fock.hpp"
#include "nelson/skg.hpp"
#include "oracles.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <bit>
#include <cmath>
#include <filesystem>
#include <random>

using namespace nelson;

namespace {

// N = 2 on 8 grid points with the three modes |n| <= 1: 28 fermion configurations, 3^3 boson states.
ModelParams small_params(int n_max = 2) {
  ModelParams p;
  p.n_particles = 2;
  p.cutoff = 1.0;
  p.grid_points = 8;
  p.fock_n_max = n_max;
  return p;
}

FieldAmplitude single_mode(const Model& m, int mode, cplx value) {
  FieldAmplitude a{Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(m.num_modes()))};
  a.alpha[mode] = value;
  return a;
}

Eigen::VectorXcd random_state(std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::VectorXcd v(static_cast<Eigen::Index>(dim));
  for (auto& x : v) x = cplx(g(rng), g(rng));
  return v.normalized();
}

Eigen::MatrixXcd random_hermitian(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::MatrixXcd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = cplx(g(rng), g(rng));
  return a + a.adjoint();
}

} // namespace

TEST_CASE("basis enumeration and ranking") {
  const Model m(small_params());
  const FockBasis basis(m);
  CHECK(basis.fermion_dim() == 28);
  CHECK(basis.boson_dim() == 27);
  CHECK(basis.dim() == 756);
  for (std::size_t r = 0; r < basis.fermion_dim(); ++r) {
    CHECK(std::popcount(basis.fermion_config(r)) == 2);
    CHECK(basis.fermion_rank(basis.fermion_config(r)) == r);
    if (r > 0) CHECK(basis.fermion_config(r) > basis.fermion_config(r - 1));
  }
  for (std::size_t b = 0; b < basis.boson_dim(); ++b) {
    std::vector<int> occ;
    for (std::size_t k = 0; k < 3; ++k) occ.push_back(basis.occupation(b, k));
    CHECK(basis.boson_index(occ) == b);
  }
  CHECK(basis.occupation(1, 0) == 1);
  CHECK(basis.occupation(3, 1) == 1);
  CHECK_THROWS_AS(FockBasis(m, 755), BudgetError);
  CHECK_NOTHROW(FockBasis(m, 756));
}

TEST_CASE("one-body operators satisfy the canonical commutation relations") {
  // [dGamma(A), dGamma(B)] = dGamma([A, B]) tests every hop sign.
  std::mt19937_64 rng(4);
  ModelParams p = small_params();
  p.n_particles = 3;
  const Model m(p);
  const FockBasis basis(m);
  const Eigen::MatrixXcd a = random_hermitian(8, rng), b = random_hermitian(8, rng);
  const Eigen::MatrixXcd da = second_quantized_one_body(basis, a);
  const Eigen::MatrixXcd db = second_quantized_one_body(basis, b);
  CHECK((da * db - db * da - second_quantized_one_body(basis, a * b - b * a)).cwiseAbs().maxCoeff() < 1e-10);
  // dGamma(1) = N
  const Eigen::MatrixXcd number = second_quantized_one_body(basis, Eigen::MatrixXcd::Identity(8, 8));
  CHECK((number - 3.0 * Eigen::MatrixXcd::Identity(56, 56)).cwiseAbs().maxCoeff() < 1e-14);
  // c+_1 c_2 |0 2> = -c+_1 c+_0 |0> = |0 1>
  const Hop h = fermion_hop(0b101, 1, 2);
  CHECK(h.mask == 0b011);
  CHECK(h.sign == 1);
  CHECK(fermion_hop(0b101, 0, 2).sign == 0);
  CHECK(fermion_hop(0b101, 3, 1).sign == 0);
  // c+_0 c_2 |1 2> = -c+_0 c+_1 |0> = -|0 1>
  CHECK(fermion_hop(0b0110, 0, 2).mask == 0b0011);
  CHECK(fermion_hop(0b0110, 0, 2).sign == -1);
}

TEST_CASE("boson ladders") {
  const Model m(small_params());
  const FockBasis basis(m);
  std::mt19937_64 rng(9);
  const Eigen::VectorXcd psi = random_state(basis.dim(), rng);
  for (std::size_t k = 0; k < 3; ++k) {
    const LadderResult up = apply_creation(basis, psi, k);
    const Eigen::VectorXcd comm = apply_annihilation(basis, up.amplitudes, k) -
                                  apply_creation(basis, apply_annihilation(basis, psi, k), k).amplitudes;
    // [a, a+] = 1 below n_max and 1 - (n_max + 1) at n_max
    for (std::size_t f = 0; f < basis.fermion_dim(); ++f)
      for (std::size_t b = 0; b < basis.boson_dim(); ++b) {
        const auto i = static_cast<Eigen::Index>(basis.index(f, b));
        const double expect = basis.occupation(b, k) < basis.n_max() ? 1.0 : -2.0;
        CHECK(std::abs(comm[i] - expect * psi[i]) < 1e-12);
      }
    double loss = 0.0;
    for (std::size_t f = 0; f < basis.fermion_dim(); ++f)
      for (std::size_t b = 0; b < basis.boson_dim(); ++b)
        if (basis.occupation(b, k) == 2) loss += 3.0 * std::norm(psi[static_cast<Eigen::Index>(basis.index(f, b))]);
    CHECK(up.truncation_loss == doctest::Approx(loss).epsilon(1e-12));
  }
}

TEST_CASE("Hamiltonian structure") {
  const Model m(small_params());
  const FockBasis basis(m);
  const FockHamiltonian h = build_hamiltonian(m, basis);
  const SparseMatrixC adj = h.matrix.adjoint();
  CHECK((h.matrix - adj).norm() == 0.0);

  const FockHamiltonian free = build_hamiltonian(m, basis, false);
  CHECK(free.matrix.nonZeros() == static_cast<std::int64_t>(basis.dim()));
  for (std::size_t f = 0; f < basis.fermion_dim(); ++f) {
    double kin = 0.0;
    for (std::uint64_t s = basis.fermion_config(f); s; s &= s - 1) {
      const double k = m.grid_lattice(static_cast<std::size_t>(std::countr_zero(s)))[0];
      kin += k * k;
    }
    for (std::size_t b = 0; b < basis.boson_dim(); b += 5) {
      double field = 0.0;
      for (std::size_t k = 0; k < 3; ++k) field += m.modes()[k].omega * basis.occupation(b, k);
      const auto i = static_cast<std::int64_t>(basis.index(f, b));
      CHECK(free.matrix.coeff(i, i).real() == doctest::Approx(kin + field).epsilon(1e-14));
    }
  }
}

TEST_CASE("emission matrix element") {
  // One fermion at momentum 0, vacuum; a+_kappa rho*_kappa moves it to -k and adds a boson with weight g.
  ModelParams p = small_params();
  p.n_particles = 1;
  const Model m(p);
  const FockBasis basis(m);
  const FockHamiltonian h = build_hamiltonian(m, basis);
  const std::size_t from = basis.index(basis.fermion_rank(1), 0);
  for (std::size_t k = 0; k < m.num_modes(); ++k) {
    const auto& mode = m.modes()[k];
    const std::uint64_t to_mask = std::uint64_t{1} << m.grid_index_of({-mode.n[0], 0, 0});
    const std::size_t to = basis.index(basis.fermion_rank(to_mask), basis.boson_stride(k));
    const double g = std::sqrt(m.mode_weight()) / std::sqrt(2 * std::numbers::pi) / std::sqrt(2 * mode.omega);
    CHECK(h.matrix.coeff(static_cast<std::int64_t>(to), static_cast<std::int64_t>(from)).real() ==
          doctest::Approx(g).epsilon(1e-14));
  }
}

TEST_CASE("Slater times coherent preparation") {
  const Model m(small_params());
  const FockBasis basis(m);
  const OrbitalSet ball = build_fermi_ball(m);

  const PreparedState vac = prepare_slater_coherent(m, basis, ball, single_mode(m, 0, 0.0));
  CHECK(vac.truncation_weight == 0.0);
  CHECK(vac.state.norm() == doctest::Approx(1.0).epsilon(1e-14));
  // momenta {0, -1}: grid indices 0 and 7
  const std::uint64_t mask = 1u | (1u << 7);
  CHECK(std::abs(vac.state.amplitudes[static_cast<Eigen::Index>(basis.index(basis.fermion_rank(mask), 0))]) ==
        doctest::Approx(1.0).epsilon(1e-12));

  const FieldAmplitude alpha = single_mode(m, 2, cplx(0.03, 0.02));
  const PreparedState coh = prepare_slater_coherent(m, basis, ball, alpha);
  CHECK(coh.truncation_weight > 0.0);
  CHECK(coh.truncation_weight < 1e-6);
  const ReducedDensities rd = reduced_densities(m, basis, coh.state.amplitudes);
  const Eigen::VectorXcd f = coherent_amplitudes(m, alpha);
  CHECK(rd.photon_number == doctest::Approx(f.squaredNorm()).epsilon(1e-5));
  // trace of the boson density matrix is N^{-4/3} <N> / Delta k^d
  CHECK(rd.gamma_b.trace().real() == doctest::Approx(std::pow(2.0, -4.0 / 3.0) * rd.photon_number / m.mode_weight()));

  CHECK_THROWS_AS(prepare_slater_coherent(m, basis, ball, single_mode(m, 1, 1.0)), BudgetError);
}

TEST_CASE("fermion reduced densities of Slater determinants") {
  std::mt19937_64 rng(6);
  const Model m(small_params());
  const FockBasis basis(m);
  const OrbitalSet orb = oracle::random_orbitals(m, 3, rng);
  OrbitalSet ref, excited;
  ref.phi = orb.phi.leftCols(2);
  excited.phi.resize(8, 2);
  excited.phi.col(0) = orb.phi.col(0);
  excited.phi.col(1) = orb.phi.col(2);
  const FieldAmplitude zero = single_mode(m, 0, 0.0);

  const PreparedState s = prepare_slater_coherent(m, basis, ref, zero);
  const ReducedDensities rd = reduced_densities(m, basis, s.state.amplitudes);
  const Eigen::MatrixXcd c = orbital_mode_coefficients(m, ref);
  CHECK((rd.gamma_f - c * c.adjoint() / 2.0).cwiseAbs().maxCoeff() < 1e-13);
  CHECK(rd.gamma_f2.trace().real() == doctest::Approx(1.0).epsilon(1e-13));
  const BetaReport b0 = beta_report(m, basis, s.state.amplitudes, ref, zero);
  CHECK(std::abs(b0.beta_a1) < 1e-13);
  CHECK(std::abs(b0.beta_a2) < 1e-13);
  CHECK(std::abs(b0.beta_b) < 1e-13);

  // one orbital replaced by an orthogonal one
  const PreparedState e = prepare_slater_coherent(m, basis, excited, zero);
  const BetaReport b1 = beta_report(m, basis, e.state.amplitudes, ref, zero);
  CHECK(b1.beta_a1 == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(b1.tn_gamma_f == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(b1.margin_f_lower >= -1e-12);
  CHECK(b1.margin_f_upper >= -1e-12);
}

TEST_CASE("two-body beta against second quantized q") {
  std::mt19937_64 rng(12);
  ModelParams p = small_params();
  p.n_particles = 3;
  p.fock_n_max = 1;
  const Model m(p);
  const FockBasis basis(m);
  const OrbitalSet orb = oracle::random_orbitals(m, 3, rng);
  const Eigen::VectorXcd psi = random_state(basis.dim(), rng);
  const BetaReport r = beta_report(m, basis, psi, orb, single_mode(m, 0, 0.0));

  const Eigen::MatrixXcd c = orbital_mode_coefficients(m, orb);
  const Eigen::MatrixXcd q = Eigen::MatrixXcd::Identity(8, 8) - c * c.adjoint();
  const Eigen::VectorXcd nq = apply_one_body(basis, q, psi);
  const double first = psi.dot(nq).real();
  const double second = nq.squaredNorm();
  // <c+_a c+_b c_d c_c> q_ac q_bd = <dGamma(q)^2> - <dGamma(q)>
  CHECK(r.beta_a2 == doctest::Approx(std::cbrt(3.0) * (second - first) / 6.0).epsilon(1e-12));
  CHECK(r.beta_a1 == doctest::Approx(first / 3.0).epsilon(1e-12));
  CHECK(r.tn_gamma_f >= 0.0);
}

TEST_CASE("boson beta: shifted number against the Weyl form") {
  const Model m(small_params(4));
  const FockBasis basis(m);
  const OrbitalSet ball = build_fermi_ball(m);
  const FieldAmplitude zero = single_mode(m, 0, 0.0);
  const FieldAmplitude alpha = single_mode(m, 1, cplx(0.02, -0.01));
  const Eigen::VectorXcd f = coherent_amplitudes(m, alpha);

  // vacuum against a coherent reference: a psi = 0, so beta_b = |f|^2 / N
  const PreparedState vac = prepare_slater_coherent(m, basis, ball, zero);
  const BetaReport r = beta_report(m, basis, vac.state.amplitudes, ball, alpha);
  CHECK(r.beta_b == doctest::Approx(f.squaredNorm() / 2.0).epsilon(1e-14));
  CHECK(r.beta_b_weyl == doctest::Approx(r.beta_b).epsilon(1e-6));
  CHECK(r.margin_b >= -1e-12);

  const PreparedState coh = prepare_slater_coherent(m, basis, ball, alpha);
  const BetaReport rc = beta_report(m, basis, coh.state.amplitudes, ball, alpha);
  CHECK(rc.beta_b < 1e-9);
  CHECK(rc.beta_b_weyl < 1e-9);

  // truncated Weyl operators are unitary and W(f) W(-f) = 1
  const Eigen::MatrixXcd w = truncated_weyl(4, cplx(0.3, 0.1));
  CHECK((w.adjoint() * w - Eigen::MatrixXcd::Identity(5, 5)).norm() < 1e-13);
  CHECK((w * truncated_weyl(4, cplx(-0.3, -0.1)) - Eigen::MatrixXcd::Identity(5, 5)).norm() < 1e-13);
}

TEST_CASE("Krylov and dense propagation agree with the matrix exponential") {
  const Model m(small_params());
  const FockBasis basis(m);
  const FockHamiltonian h = build_hamiltonian(m, basis);
  std::mt19937_64 rng(1);
  const Eigen::VectorXcd psi0 = random_state(basis.dim(), rng);
  const double t = 0.7;
  const Eigen::MatrixXcd dense = Eigen::MatrixXcd(h.matrix.cast<cplx>());
  const Eigen::MatrixXcd u = (cplx(0.0, -t / std::cbrt(2.0)) * dense).exp();
  const Eigen::VectorXcd expect = u * psi0;

  for (const auto method : {PropagationMethod::Krylov, PropagationMethod::Dense}) {
    PropagationOptions opt;
    opt.method = method;
    FockPropagator prop(m, h, opt);
    Eigen::VectorXcd psi = psi0;
    prop.advance(psi, t);
    CHECK((psi - expect).norm() < 1e-11);
    CHECK(prop.dense() == (method == PropagationMethod::Dense));
  }

  // propagate reports t = 0 and every sample
  ManyBodyState state{psi0};
  std::vector<double> times;
  PropagationOptions opt;
  opt.sample_interval = 0.1;
  const PropagationStats stats =
      propagate(m, h, state, 0.3, opt, [&](double time, const Eigen::VectorXcd&) { times.push_back(time); });
  CHECK(times.size() == 4);
  CHECK(times.back() == doctest::Approx(0.3));
  CHECK(stats.max_norm_drift < 1e-12);
}

TEST_CASE("without coupling occupations are conserved") {
  const Model m(small_params());
  const FockBasis basis(m);
  const FockHamiltonian h = build_hamiltonian(m, basis, false);
  std::mt19937_64 rng(3);
  const Eigen::VectorXcd psi0 = random_state(basis.dim(), rng);
  const ReducedDensities before = reduced_densities(m, basis, psi0, false);
  PropagationOptions opt;
  opt.method = PropagationMethod::Krylov;
  FockPropagator prop(m, h, opt);
  Eigen::VectorXcd psi = psi0;
  prop.advance(psi, 1.3);
  const ReducedDensities after = reduced_densities(m, basis, psi, false);
  CHECK(std::abs(after.photon_number - before.photon_number) < 1e-11);
  CHECK((after.gamma_f.diagonal() - before.gamma_f.diagonal()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((after.gamma_b.diagonal() - before.gamma_b.diagonal()).cwiseAbs().maxCoeff() < 1e-11);
}

TEST_CASE("field Ehrenfest identity holds up to the finite-difference error") {
  // n_max = 5 keeps the photon cap out of the commutators at this coupling
  const Model m(small_params(5));
  const FockBasis basis(m);
  const FockHamiltonian h = build_hamiltonian(m, basis);
  const PreparedState init =
      prepare_slater_coherent(m, basis, build_fermi_ball(m), single_mode(m, 2, cplx(0.05, 0.0)));
  const Momentum x{0.3, 0.0, 0.0};
  const double t0 = 0.5;
  PropagationOptions opt;
  opt.method = PropagationMethod::Krylov;
  FockPropagator prop(m, h, opt);
  std::vector<double> residuals;
  for (double step : {0.1, 0.05, 0.025, 0.0125}) {
    Eigen::VectorXcd psi = init.state.amplitudes;
    prop.advance(psi, t0 - step);
    std::vector<FieldObservables> series;
    for (int i = 0; i < 3; ++i) {
      if (i > 0) prop.advance(psi, step);
      series.push_back(field_observables(m, basis, psi, t0 + (i - 1) * step));
    }
    const auto pts = ehrenfest_check(m, series, x);
    REQUIRE(pts.size() == 1);
    residuals.push_back(pts[0].residual);
  }
  CHECK(std::log2(residuals[0] / residuals[1]) == doctest::Approx(2.0).epsilon(0.05));
  CHECK(std::log2(residuals[1] / residuals[2]) == doctest::Approx(2.0).epsilon(0.05));
  CHECK(std::log2(residuals[2] / residuals[3]) == doctest::Approx(2.0).epsilon(0.05));
  CHECK(ehrenfest_check(m, {}, x).empty());
}

TEST_CASE("trace-norm bound on antisymmetric tensors") {
  const AntisymmetricBoundReport r = antisymmetric_bound_check(60, 3, 4, 2, 17);
  CHECK(r.trials == 60);
  CHECK(r.violations == 0);
  CHECK(r.max_ratio <= 1.0 + 1e-10);
  CHECK(r.max_ratio > 0.999); // saturating cases reach the bound
  CHECK_THROWS_AS(antisymmetric_bound_check(1, 5, 4, 2, 1), ConfigError);
}

TEST_CASE("rotated complement projectors") {
  std::mt19937_64 rng(30);
  const Model m(small_params());
  const FockBasis basis(m);
  const OrbitalSet orb = oracle::random_orbitals(m, 2, rng);
  const ComplementProjectorReport r =
      complement_projector_check(m, basis, orb, oracle::random_unitary(2, rng));
  CHECK(r.max_commutator < 1e-12);
  CHECK(r.sum_identity_error < 1e-12);
  CHECK(r.idempotency_error < 1e-12);
  CHECK_THROWS_AS(complement_projector_check(m, basis, orb, Eigen::MatrixXcd::Ones(2, 2)), ConfigError);
}

TEST_CASE("snapshot round trip") {
  const Model m(small_params());
  const FockBasis basis(m);
  std::mt19937_64 rng(2);
  const ManyBodyState s{random_state(basis.dim(), rng)};
  const auto path = (std::filesystem::temp_directory_path() / "nelson_fock_snapshot.bin").string();
  write_snapshot(path, m, basis, s);
  CHECK(std::filesystem::file_size(path) == 8 * (6 + 3 * 3) + 16 * basis.dim());
  const ManyBodyState back = read_snapshot(path, m, basis);
  CHECK(back.amplitudes == s.amplitudes);
  const Model other(small_params(1));
  CHECK_THROWS_AS(read_snapshot(path, other, FockBasis(other)), ConfigError);
}
