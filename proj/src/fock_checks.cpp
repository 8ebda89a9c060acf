#include "nelson/errors.hpp"
#include "nelson/fock.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

namespace nelson {

namespace {

using RowMajorC = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::VectorXcd random_vector(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> g;
  Eigen::VectorXcd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = cplx(g(rng), g(rng));
  return v;
}

// Antisymmetrizes over the leading `k` slots of an (M^slots x B) tensor, slot 0 most significant.
Eigen::VectorXcd antisymmetrize(const Eigen::VectorXcd& x, int slots, int k, int m, int b) {
  std::vector<int> perm(static_cast<std::size_t>(k));
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<long> weight(static_cast<std::size_t>(slots));
  long w = b;
  for (int s = slots - 1; s >= 0; --s) {
    weight[static_cast<std::size_t>(s)] = w;
    w *= m;
  }
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(x.size());
  std::vector<int> digits(static_cast<std::size_t>(slots));
  double count = 0.0;
  do {
    int inversions = 0;
    for (int i = 0; i < k; ++i)
      for (int j = i + 1; j < k; ++j) inversions += perm[static_cast<std::size_t>(i)] > perm[static_cast<std::size_t>(j)];
    const double sign = (inversions & 1) ? -1.0 : 1.0;
    for (Eigen::Index idx = 0; idx < x.size(); ++idx) {
      long rest = idx;
      for (int s = 0; s < slots; ++s) {
        digits[static_cast<std::size_t>(s)] = static_cast<int>(rest / weight[static_cast<std::size_t>(s)]);
        rest %= weight[static_cast<std::size_t>(s)];
      }
      long target = rest;
      for (int s = 0; s < slots; ++s) {
        const int src = s < k ? perm[static_cast<std::size_t>(s)] : s;
        target += digits[static_cast<std::size_t>(src)] * weight[static_cast<std::size_t>(s)];
      }
      out[target] += sign * x[idx];
    }
    count += 1.0;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return out / count;
}

Eigen::VectorXcd apply_slot0(const Eigen::MatrixXcd& a, const Eigen::VectorXcd& x, int m) {
  const Eigen::Index rest = x.size() / m;
  const RowMajorC res = a * Eigen::Map<const RowMajorC>(x.data(), m, rest);
  return Eigen::Map<const Eigen::VectorXcd>(res.data(), res.size());
}

void put_u64(std::ostream& os, std::uint64_t v) {
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(bytes, 8);
}

std::uint64_t get_u64(std::istream& is) {
  unsigned char bytes[8];
  is.read(reinterpret_cast<char*>(bytes), 8);
  if (!is) throw ConfigError("truncated Fock snapshot");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return v;
}

constexpr std::uint64_t kSnapshotMagic = 0x3150414e53464d4eULL; // "NMFSNAP1"

} // namespace

AntisymmetricBoundReport antisymmetric_bound_check(int num_trials, int n_particles, int one_particle_dim,
                                                   int boson_dim, std::uint64_t seed) {
  if (n_particles < 1 || one_particle_dim < n_particles || boson_dim < 1)
    throw ConfigError("antisymmetric_bound_check needs 1 <= N <= one-particle dimension and boson_dim >= 1");
  const int m = one_particle_dim;
  const int n = n_particles;
  Eigen::Index dim = boson_dim;
  for (int s = 0; s < n; ++s) dim *= m;

  std::mt19937_64 rng(seed);
  AntisymmetricBoundReport rep;
  for (int trial = 0; trial < num_trials; ++trial) {
    const int j = static_cast<int>(rng() % static_cast<std::uint64_t>(n));
    const int k = n - j;
    Eigen::MatrixXcd a(m, m);
    Eigen::VectorXcd psi, psi2;

    if (trial % 4 == 0) {
      // Saturating case: rank-one A on one orbital of a Slater factor in the antisymmetric slots.
      Eigen::MatrixXcd raw(m, k);
      for (int c = 0; c < k; ++c) raw.col(c) = random_vector(rng, m);
      const Eigen::MatrixXcd orth = Eigen::HouseholderQR<Eigen::MatrixXcd>(raw).householderQ() *
                                    Eigen::MatrixXcd::Identity(m, k);
      a = orth.col(0) * orth.col(0).adjoint();
      Eigen::VectorXcd product = orth.col(0);
      for (int c = 1; c < k; ++c) {
        Eigen::VectorXcd next(product.size() * m);
        for (Eigen::Index i = 0; i < product.size(); ++i) next.segment(i * m, m) = product[i] * orth.col(c);
        product = next;
      }
      const Eigen::VectorXcd tail = random_vector(rng, dim / product.size());
      Eigen::VectorXcd full(dim);
      for (Eigen::Index i = 0; i < product.size(); ++i) full.segment(i * tail.size(), tail.size()) = product[i] * tail;
      psi = antisymmetrize(full, n, k, m, boson_dim);
      psi2 = psi;
    } else {
      for (int c = 0; c < m; ++c) a.col(c) = random_vector(rng, m);
      psi = antisymmetrize(random_vector(rng, dim), n, k, m, boson_dim);
      psi2 = antisymmetrize(random_vector(rng, dim), n, k, m, boson_dim);
    }

    const double lhs = std::abs(psi.dot(apply_slot0(a, psi2, m)));
    const double trace_norm = Eigen::JacobiSVD<Eigen::MatrixXcd>(a).singularValues().sum();
    const double bound = trace_norm * psi.norm() * psi2.norm() / static_cast<double>(k);
    const double ratio = lhs / bound;
    rep.max_ratio = std::max(rep.max_ratio, ratio);
    if (ratio > 1.0 + 1e-10) ++rep.violations;
    ++rep.trials;
  }
  return rep;
}

ComplementProjectorReport complement_projector_check(const Model& model, const FockBasis& basis,
                                                     const OrbitalSet& orbitals, const Eigen::MatrixXcd& rotation) {
  const int n = orbitals.count();
  if (rotation.rows() != n || rotation.cols() != n) throw ConfigError("rotation must be N x N");
  if ((rotation.adjoint() * rotation - Eigen::MatrixXcd::Identity(n, n)).cwiseAbs().maxCoeff() > 1e-10)
    throw ConfigError("rotation is not unitary");

  const Eigen::MatrixXcd c = orbital_mode_coefficients(model, orbitals);
  const Eigen::MatrixXcd chi = c * rotation;
  const int modes = basis.num_fermion_modes();
  const auto fd = static_cast<Eigen::Index>(basis.fermion_dim());
  const Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(fd, fd);

  std::vector<Eigen::MatrixXcd> q_chi;
  ComplementProjectorReport rep;
  for (int j = 0; j < n; ++j) {
    const Eigen::MatrixXcd p = second_quantized_one_body(basis, chi.col(j) * chi.col(j).adjoint());
    rep.idempotency_error = std::max(rep.idempotency_error, (p * p - p).cwiseAbs().maxCoeff());
    q_chi.push_back(id - p);
  }
  for (int j = 0; j < n; ++j)
    for (int k = j + 1; k < n; ++k)
      rep.max_commutator = std::max(
          rep.max_commutator, (q_chi[static_cast<std::size_t>(j)] * q_chi[static_cast<std::size_t>(k)] -
                               q_chi[static_cast<std::size_t>(k)] * q_chi[static_cast<std::size_t>(j)])
                                  .cwiseAbs()
                                  .maxCoeff());

  Eigen::MatrixXcd sum = Eigen::MatrixXcd::Zero(fd, fd);
  for (const auto& q : q_chi) sum += q;
  const Eigen::MatrixXcd q_one = Eigen::MatrixXcd::Identity(modes, modes) - c * c.adjoint();
  rep.sum_identity_error = (sum - second_quantized_one_body(basis, q_one)).cwiseAbs().maxCoeff();
  return rep;
}

void write_snapshot(const std::string& path, const Model& model, const FockBasis& basis, const ManyBodyState& state) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw ConfigError("cannot write " + path);
  put_u64(os, kSnapshotMagic);
  put_u64(os, static_cast<std::uint64_t>(basis.num_fermion_modes()));
  put_u64(os, static_cast<std::uint64_t>(basis.n_particles()));
  put_u64(os, basis.dim());
  put_u64(os, static_cast<std::uint64_t>(basis.n_max()));
  put_u64(os, model.num_modes());
  for (const auto& mode : model.modes())
    for (int a = 0; a < 3; ++a)
      put_u64(os, static_cast<std::uint64_t>(static_cast<std::int64_t>(mode.n[static_cast<std::size_t>(a)])));
  for (Eigen::Index i = 0; i < state.amplitudes.size(); ++i) {
    put_u64(os, std::bit_cast<std::uint64_t>(state.amplitudes[i].real()));
    put_u64(os, std::bit_cast<std::uint64_t>(state.amplitudes[i].imag()));
  }
  if (!os) throw ConfigError("failed writing " + path);
}

ManyBodyState read_snapshot(const std::string& path, const Model& model, const FockBasis& basis) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot read " + path);
  if (get_u64(is) != kSnapshotMagic) throw ConfigError(path + " is not a Fock snapshot");
  const bool ok = get_u64(is) == static_cast<std::uint64_t>(basis.num_fermion_modes()) &&
                  get_u64(is) == static_cast<std::uint64_t>(basis.n_particles()) && get_u64(is) == basis.dim() &&
                  get_u64(is) == static_cast<std::uint64_t>(basis.n_max()) && get_u64(is) == model.num_modes();
  if (!ok) throw ConfigError(path + " does not match the current Fock basis");
  for (const auto& mode : model.modes())
    for (int a = 0; a < 3; ++a)
      if (static_cast<std::int64_t>(get_u64(is)) != mode.n[static_cast<std::size_t>(a)])
        throw ConfigError(path + " has a different mode list");
  ManyBodyState state;
  state.amplitudes.resize(static_cast<Eigen::Index>(basis.dim()));
  for (Eigen::Index i = 0; i < state.amplitudes.size(); ++i) {
    const double re = std::bit_cast<double>(get_u64(is));
    const double im = std::bit_cast<double>(get_u64(is));
    state.amplitudes[i] = cplx(re, im);
  }
  return state;
}

} // namespace nelson
