#include "nelson/errors.hpp"
#include "nelson/fock.hpp"

#include <bit>
#include <cmath>
#include <string>

namespace nelson {

FockBasis::FockBasis(const Model& model, std::size_t budget)
    : num_fermion_modes_(static_cast<int>(model.grid_size())), n_particles_(model.params().n_particles),
      n_max_(model.params().fock_n_max), num_boson_modes_(model.num_modes()) {
  if (num_fermion_modes_ > 63) throw BudgetError("Fock reference supports at most 63 one-particle modes");
  if (n_particles_ > num_fermion_modes_) throw ConfigError("more fermions than one-particle modes");

  binomial_.assign(static_cast<std::size_t>(num_fermion_modes_) + 1,
                   std::vector<std::size_t>(static_cast<std::size_t>(n_particles_) + 2, 0));
  for (std::size_t n = 0; n < binomial_.size(); ++n) {
    binomial_[n][0] = 1;
    for (std::size_t k = 1; k < binomial_[n].size(); ++k)
      binomial_[n][k] = n == 0 ? 0 : binomial_[n - 1][k - 1] + binomial_[n - 1][k];
  }

  const double fermions = static_cast<double>(binomial_[static_cast<std::size_t>(num_fermion_modes_)]
                                                       [static_cast<std::size_t>(n_particles_)]);
  const double bosons = std::pow(static_cast<double>(n_max_ + 1), static_cast<double>(num_boson_modes_));
  if (fermions * bosons > static_cast<double>(budget))
    throw BudgetError("Fock dimension " + std::to_string(fermions * bosons) + " exceeds the budget " +
                      std::to_string(budget));

  boson_dim_ = 1;
  strides_.resize(num_boson_modes_);
  for (std::size_t k = 0; k < num_boson_modes_; ++k) {
    strides_[k] = boson_dim_;
    boson_dim_ *= static_cast<std::size_t>(n_max_ + 1);
  }

  configs_.reserve(static_cast<std::size_t>(fermions));
  if (n_particles_ == 0) {
    configs_.push_back(0);
  } else {
    std::uint64_t mask = (std::uint64_t{1} << n_particles_) - 1;
    const std::uint64_t limit = std::uint64_t{1} << num_fermion_modes_;
    while (mask < limit) {
      configs_.push_back(mask);
      // next integer with the same popcount (colex successor)
      const std::uint64_t c = mask & (~mask + 1);
      const std::uint64_t r = mask + c;
      mask = (((r ^ mask) >> 2) / c) | r;
    }
  }
}

std::size_t FockBasis::fermion_rank(std::uint64_t mask) const {
  std::size_t rank = 0;
  std::size_t i = 1;
  while (mask) {
    const int pos = std::countr_zero(mask);
    rank += binomial_[static_cast<std::size_t>(pos)][i];
    ++i;
    mask &= mask - 1;
  }
  return rank;
}

std::size_t FockBasis::boson_index(std::span<const int> occupations) const {
  std::size_t idx = 0;
  for (std::size_t k = 0; k < num_boson_modes_; ++k) idx += static_cast<std::size_t>(occupations[k]) * strides_[k];
  return idx;
}

Hop fermion_hop(std::uint64_t mask, int to, int from) {
  const std::uint64_t from_bit = std::uint64_t{1} << from;
  if (!(mask & from_bit)) return {};
  if (to == from) return {mask, 1};
  const std::uint64_t to_bit = std::uint64_t{1} << to;
  if (mask & to_bit) return {};
  int parity = std::popcount(mask & (from_bit - 1));
  const std::uint64_t removed = mask & ~from_bit;
  parity += std::popcount(removed & (to_bit - 1));
  return {removed | to_bit, (parity & 1) ? -1 : 1};
}

Eigen::VectorXcd apply_annihilation(const FockBasis& basis, const Eigen::VectorXcd& psi, std::size_t mode) {
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(psi.size());
  const std::size_t stride = basis.boson_stride(mode);
  for (std::size_t f = 0; f < basis.fermion_dim(); ++f)
    for (std::size_t b = 0; b < basis.boson_dim(); ++b) {
      const int n = basis.occupation(b, mode);
      if (n == 0) continue;
      out[static_cast<Eigen::Index>(basis.index(f, b - stride))] +=
          std::sqrt(static_cast<double>(n)) * psi[static_cast<Eigen::Index>(basis.index(f, b))];
    }
  return out;
}

LadderResult apply_creation(const FockBasis& basis, const Eigen::VectorXcd& psi, std::size_t mode) {
  LadderResult out{Eigen::VectorXcd::Zero(psi.size()), 0.0};
  const std::size_t stride = basis.boson_stride(mode);
  for (std::size_t f = 0; f < basis.fermion_dim(); ++f)
    for (std::size_t b = 0; b < basis.boson_dim(); ++b) {
      const int n = basis.occupation(b, mode);
      const cplx v = std::sqrt(static_cast<double>(n + 1)) * psi[static_cast<Eigen::Index>(basis.index(f, b))];
      if (n == basis.n_max())
        out.truncation_loss += std::norm(v);
      else
        out.amplitudes[static_cast<Eigen::Index>(basis.index(f, b + stride))] += v;
    }
  return out;
}

void FockHamiltonian::apply(const Eigen::VectorXcd& x, Eigen::VectorXcd& y) const {
  const auto rows = matrix.rows();
  y.resize(rows);
  const auto* outer = matrix.outerIndexPtr();
  const auto* inner = matrix.innerIndexPtr();
  const auto* values = matrix.valuePtr();
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < rows; ++r) {
    cplx acc(0.0, 0.0);
    for (std::int64_t p = outer[r]; p < outer[r + 1]; ++p) acc += values[p] * x[inner[p]];
    y[r] = acc;
  }
}

double FockHamiltonian::expectation(const Eigen::VectorXcd& psi) const {
  Eigen::VectorXcd hpsi;
  apply(psi, hpsi);
  return psi.dot(hpsi).real();
}

FockHamiltonian build_hamiltonian(const Model& model, const FockBasis& basis, bool coupling) {
  const auto& p = model.params();
  const auto& modes = model.modes();
  const int m_modes = basis.num_fermion_modes();

  // shift[kappa][m]: index of the plane wave with momentum k_m + k_kappa (periodic)
  std::vector<std::vector<int>> shift(modes.size(), std::vector<int>(static_cast<std::size_t>(m_modes)));
  for (std::size_t k = 0; k < modes.size(); ++k)
    for (int m = 0; m < m_modes; ++m) {
      auto l = model.grid_lattice(static_cast<std::size_t>(m));
      for (int a = 0; a < 3; ++a) l[static_cast<std::size_t>(a)] += modes[k].n[static_cast<std::size_t>(a)];
      shift[k][static_cast<std::size_t>(m)] = static_cast<int>(model.grid_index_of(l));
    }
  std::vector<double> coupling_constant(modes.size());
  for (std::size_t k = 0; k < modes.size(); ++k)
    coupling_constant[k] = coupling ? std::sqrt(model.mode_weight()) * modes[k].form_factor : 0.0;

  std::vector<Eigen::Triplet<cplx, std::int64_t>> triplets;
  triplets.reserve(basis.dim() * (1 + 2 * modes.size() * static_cast<std::size_t>(std::max(1, p.n_particles))));

  for (std::size_t f = 0; f < basis.fermion_dim(); ++f) {
    const std::uint64_t mask = basis.fermion_config(f);
    double kinetic = 0.0;
    for (std::uint64_t s = mask; s; s &= s - 1) kinetic += model.grid_k2(static_cast<std::size_t>(std::countr_zero(s)));

    for (std::size_t b = 0; b < basis.boson_dim(); ++b) {
      const auto col = static_cast<std::int64_t>(basis.index(f, b));
      double field = 0.0;
      for (std::size_t k = 0; k < modes.size(); ++k) field += modes[k].omega * basis.occupation(b, k);
      triplets.emplace_back(col, col, cplx(kinetic + p.delta_n * field, 0.0));
      if (!coupling) continue;

      for (std::size_t k = 0; k < modes.size(); ++k) {
        const double g = coupling_constant[k];
        if (g == 0.0) continue;
        const int n = basis.occupation(b, k);
        const std::size_t stride = basis.boson_stride(k);
        for (std::uint64_t s = mask; s; s &= s - 1) {
          const int from = std::countr_zero(s);
          // rho_kappa a_kappa: c+_{p+k} c_p with one boson removed
          if (n > 0) {
            const Hop hop = fermion_hop(mask, shift[k][static_cast<std::size_t>(from)], from);
            if (hop.sign != 0) {
              const auto row = static_cast<std::int64_t>(basis.index(basis.fermion_rank(hop.mask), b - stride));
              triplets.emplace_back(row, col, cplx(hop.sign * g * std::sqrt(static_cast<double>(n)), 0.0));
            }
          }
          // a+_kappa rho_kappa^*: c+_{p-k} c_p with one boson added
          if (n < basis.n_max()) {
            const Hop hop = fermion_hop(mask, shift[modes[k].partner][static_cast<std::size_t>(from)], from);
            if (hop.sign != 0) {
              const auto row = static_cast<std::int64_t>(basis.index(basis.fermion_rank(hop.mask), b + stride));
              triplets.emplace_back(row, col, cplx(hop.sign * g * std::sqrt(static_cast<double>(n + 1)), 0.0));
            }
          }
        }
      }
    }
  }
  FockHamiltonian h;
  const auto dim = static_cast<std::int64_t>(basis.dim());
  h.matrix.resize(dim, dim);
  h.matrix.setFromTriplets(triplets.begin(), triplets.end());
  h.matrix.makeCompressed();
  return h;
}

Eigen::MatrixXcd orbital_mode_coefficients(const Model& model, const OrbitalSet& orbitals) {
  Eigen::MatrixXcd c(orbitals.phi.rows(), orbitals.phi.cols());
  for (int j = 0; j < orbitals.count(); ++j) c.col(j) = model.plane_wave_coefficients(orbitals.phi.col(j));
  return c;
}

Eigen::VectorXcd coherent_amplitudes(const Model& model, const FieldAmplitude& alpha) {
  const double scale = std::pow(static_cast<double>(model.params().n_particles), 2.0 / 3.0) *
                       std::sqrt(model.mode_weight());
  return alpha.alpha * scale;
}

PreparedState prepare_slater_coherent(const Model& model, const FockBasis& basis, const OrbitalSet& orbitals,
                                      const FieldAmplitude& alpha, double truncation_threshold) {
  const int n = basis.n_particles();
  if (orbitals.count() != n) throw ConfigError("orbital count does not match N");
  if (static_cast<std::size_t>(alpha.alpha.size()) != basis.num_boson_modes())
    throw ConfigError("field amplitude does not match the retained mode count");

  const Eigen::MatrixXcd c = orbital_mode_coefficients(model, orbitals);
  Eigen::VectorXcd fermion(static_cast<Eigen::Index>(basis.fermion_dim()));
  Eigen::MatrixXcd minor(n, n);
  for (std::size_t f = 0; f < basis.fermion_dim(); ++f) {
    if (n == 0) {
      fermion[0] = 1.0;
      break;
    }
    std::uint64_t mask = basis.fermion_config(f);
    for (int row = 0; mask; ++row, mask &= mask - 1) minor.row(row) = c.row(std::countr_zero(mask));
    fermion[static_cast<Eigen::Index>(f)] = minor.determinant();
  }

  // Per-mode truncated coherent coefficients exp(-|f|^2/2) f^n / sqrt(n!).
  const Eigen::VectorXcd amps = coherent_amplitudes(model, alpha);
  const int levels = basis.n_max() + 1;
  std::vector<std::vector<cplx>> coeff(basis.num_boson_modes(), std::vector<cplx>(static_cast<std::size_t>(levels)));
  double kept = 1.0;
  for (std::size_t k = 0; k < basis.num_boson_modes(); ++k) {
    const cplx fk = amps[static_cast<Eigen::Index>(k)];
    cplx term = std::exp(-0.5 * std::norm(fk));
    double weight = 0.0;
    for (int m = 0; m < levels; ++m) {
      if (m > 0) term *= fk / std::sqrt(static_cast<double>(m));
      coeff[k][static_cast<std::size_t>(m)] = term;
      weight += std::norm(term);
    }
    kept *= weight;
  }
  PreparedState out;
  out.truncation_weight = 1.0 - kept;
  if (out.truncation_weight > truncation_threshold)
    throw BudgetError("coherent-state truncation weight " + std::to_string(out.truncation_weight) +
                      " exceeds threshold; increase fock_n_max");

  Eigen::VectorXcd boson(static_cast<Eigen::Index>(basis.boson_dim()));
  for (std::size_t b = 0; b < basis.boson_dim(); ++b) {
    cplx v = 1.0;
    for (std::size_t k = 0; k < basis.num_boson_modes(); ++k)
      v *= coeff[k][static_cast<std::size_t>(basis.occupation(b, k))];
    boson[static_cast<Eigen::Index>(b)] = v;
  }
  boson /= std::sqrt(kept);

  out.state.amplitudes.resize(static_cast<Eigen::Index>(basis.dim()));
  for (std::size_t f = 0; f < basis.fermion_dim(); ++f)
    out.state.amplitudes.segment(static_cast<Eigen::Index>(f * basis.boson_dim()),
                                 static_cast<Eigen::Index>(basis.boson_dim())) = fermion[static_cast<Eigen::Index>(f)] * boson;
  return out;
}

} // namespace nelson
