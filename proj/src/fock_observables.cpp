#include "nelson/errors.hpp"
#include "nelson/fock.hpp"

#include <Eigen/Eigenvalues>

#include <bit>
#include <cmath>
#include <numbers>

namespace nelson {

namespace {

using RowMajorC = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMajorC> as_matrix(const FockBasis& basis, const Eigen::VectorXcd& psi) {
  if (static_cast<std::size_t>(psi.size()) != basis.dim()) throw ConfigError("state does not match the Fock basis");
  return {psi.data(), static_cast<Eigen::Index>(basis.fermion_dim()), static_cast<Eigen::Index>(basis.boson_dim())};
}

// c_i on mask; sign 0 if i is empty
Hop annihilate(std::uint64_t mask, int i) {
  const std::uint64_t bit = std::uint64_t{1} << i;
  if (!(mask & bit)) return {};
  return {mask & ~bit, (std::popcount(mask & (bit - 1)) & 1) ? -1 : 1};
}

Hop create(std::uint64_t mask, int i) {
  const std::uint64_t bit = std::uint64_t{1} << i;
  if (mask & bit) return {};
  return {mask | bit, (std::popcount(mask & (bit - 1)) & 1) ? -1 : 1};
}

double trace_norm_hermitian(const Eigen::MatrixXcd& a) {
  const Eigen::MatrixXcd h = 0.5 * (a + a.adjoint());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(h, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().cwiseAbs().sum();
}

Eigen::MatrixXcd projector_in_modes(const Model& model, const OrbitalSet& orbitals) {
  const Eigen::MatrixXcd c = orbital_mode_coefficients(model, orbitals);
  return c * c.adjoint();
}

} // namespace

Eigen::MatrixXcd fermion_configuration_matrix(const FockBasis& basis, const Eigen::VectorXcd& psi) {
  const auto m = as_matrix(basis, psi);
  return m * m.adjoint();
}

ReducedDensities reduced_densities(const Model& model, const FockBasis& basis, const Eigen::VectorXcd& psi,
                                   bool with_two_body) {
  const int modes = basis.num_fermion_modes();
  const int n = basis.n_particles();
  const Eigen::MatrixXcd d = fermion_configuration_matrix(basis, psi);
  ReducedDensities out;

  // <c+_m' c_m> = sum_S sign D(S, S'), S' = c+_m' c_m S
  Eigen::MatrixXcd one = Eigen::MatrixXcd::Zero(modes, modes);
  for (std::size_t s = 0; s < basis.fermion_dim(); ++s) {
    const std::uint64_t mask = basis.fermion_config(s);
    for (std::uint64_t occ = mask; occ; occ &= occ - 1) {
      const int from = std::countr_zero(occ);
      for (int to = 0; to < modes; ++to) {
        const Hop hop = fermion_hop(mask, to, from);
        if (hop.sign == 0) continue;
        one(from, to) += static_cast<double>(hop.sign) *
                         d(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(basis.fermion_rank(hop.mask)));
      }
    }
  }
  out.gamma_f = n > 0 ? Eigen::MatrixXcd(one / static_cast<double>(n)) : one;

  if (with_two_body && n >= 2) {
    const Eigen::Index pairs = static_cast<Eigen::Index>(modes) * modes;
    Eigen::MatrixXcd two = Eigen::MatrixXcd::Zero(pairs, pairs);
    for (std::size_t s = 0; s < basis.fermion_dim(); ++s) {
      const std::uint64_t mask = basis.fermion_config(s);
      for (std::uint64_t oc = mask; oc; oc &= oc - 1) {
        const int c = std::countr_zero(oc);
        const Hop h1 = annihilate(mask, c);
        for (std::uint64_t od = h1.mask; od; od &= od - 1) {
          const int dd = std::countr_zero(od);
          const Hop h2 = annihilate(h1.mask, dd);
          for (int b = 0; b < modes; ++b) {
            const Hop h3 = create(h2.mask, b);
            if (h3.sign == 0) continue;
            for (int a = 0; a < modes; ++a) {
              const Hop h4 = create(h3.mask, a);
              if (h4.sign == 0) continue;
              const int sign = h1.sign * h2.sign * h3.sign * h4.sign;
              two(c * modes + dd, a * modes + b) +=
                  static_cast<double>(sign) *
                  d(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(basis.fermion_rank(h4.mask)));
            }
          }
        }
      }
    }
    out.gamma_f2 = two / (static_cast<double>(n) * (n - 1));
  }

  const auto nb = static_cast<Eigen::Index>(basis.num_boson_modes());
  Eigen::MatrixXcd lowered(psi.size(), nb);
  for (Eigen::Index k = 0; k < nb; ++k) lowered.col(k) = apply_annihilation(basis, psi, static_cast<std::size_t>(k));
  // A(kappa, kappa') = <a_kappa' psi, a_kappa psi> = <a+_kappa' a_kappa>
  const Eigen::MatrixXcd a = (lowered.adjoint() * lowered).transpose();
  out.photon_number = a.trace().real();
  out.gamma_b = a * (std::pow(static_cast<double>(std::max(n, 1)), -4.0 / 3.0) / model.mode_weight());
  return out;
}

BetaReport beta_report(const Model& model, const FockBasis& basis, const Eigen::VectorXcd& psi,
                       const OrbitalSet& orbitals, const FieldAmplitude& alpha) {
  const int n = basis.n_particles();
  if (n < 1) throw ConfigError("beta_report needs at least one fermion");
  const double nd = static_cast<double>(n);
  const double n13 = std::cbrt(nd);
  const ReducedDensities rd = reduced_densities(model, basis, psi, n >= 2);
  const Eigen::MatrixXcd p = projector_in_modes(model, orbitals);
  const int modes = basis.num_fermion_modes();
  const Eigen::MatrixXcd q = Eigen::MatrixXcd::Identity(modes, modes) - p;

  BetaReport r;
  r.beta_a1 = 1.0 - (rd.gamma_f * p).trace().real();
  if (n >= 2) {
    cplx tr(0.0, 0.0);
    for (int c = 0; c < modes; ++c)
      for (int d = 0; d < modes; ++d)
        for (int a = 0; a < modes; ++a)
          for (int b = 0; b < modes; ++b) tr += rd.gamma_f2(c * modes + d, a * modes + b) * q(a, c) * q(b, d);
    r.beta_a2 = n13 * tr.real();
  }

  const Eigen::VectorXcd f = coherent_amplitudes(model, alpha);
  double bb = 0.0;
  for (std::size_t k = 0; k < basis.num_boson_modes(); ++k) {
    const Eigen::VectorXcd shifted = apply_annihilation(basis, psi, k) - f[static_cast<Eigen::Index>(k)] * psi;
    bb += shifted.squaredNorm();
  }
  r.beta_b = bb / nd;
  r.beta_total = r.beta_a1 + r.beta_a2 + r.beta_b;

  r.tn_gamma_f = trace_norm_hermitian(rd.gamma_f - p / nd);
  const Eigen::MatrixXcd outer = alpha.alpha * alpha.alpha.adjoint();
  r.tn_gamma_b = trace_norm_hermitian(model.mode_weight() * (rd.gamma_b - outer));
  r.alpha_norm = model.alpha_norm(alpha);
  r.margin_f_lower = r.tn_gamma_f - 2.0 * r.beta_a1;
  r.margin_f_upper = std::sqrt(8.0 * std::max(r.beta_a1, 0.0)) - r.tn_gamma_f;
  const double scaled = std::max(r.beta_b, 0.0) / n13;
  r.margin_b = 3.0 * scaled + 6.0 * r.alpha_norm * std::sqrt(scaled) - r.tn_gamma_b;

  std::vector<Eigen::MatrixXcd> w;
  for (std::size_t k = 0; k < basis.num_boson_modes(); ++k)
    w.push_back(truncated_weyl(basis.n_max(), -f[static_cast<Eigen::Index>(k)]));
  const Eigen::VectorXcd shifted = apply_mode_product(basis, w, psi);
  double number = 0.0;
  for (std::size_t fr = 0; fr < basis.fermion_dim(); ++fr)
    for (std::size_t b = 0; b < basis.boson_dim(); ++b) {
      int total = 0;
      for (std::size_t k = 0; k < basis.num_boson_modes(); ++k) total += basis.occupation(b, k);
      number += total * std::norm(shifted[static_cast<Eigen::Index>(basis.index(fr, b))]);
    }
  r.beta_b_weyl = number / nd;
  return r;
}

Eigen::MatrixXcd second_quantized_one_body(const FockBasis& basis, const Eigen::MatrixXcd& h) {
  const auto fd = static_cast<Eigen::Index>(basis.fermion_dim());
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(fd, fd);
  for (std::size_t s = 0; s < basis.fermion_dim(); ++s) {
    const std::uint64_t mask = basis.fermion_config(s);
    for (std::uint64_t occ = mask; occ; occ &= occ - 1) {
      const int from = std::countr_zero(occ);
      for (int to = 0; to < basis.num_fermion_modes(); ++to) {
        const Hop hop = fermion_hop(mask, to, from);
        if (hop.sign == 0) continue;
        out(static_cast<Eigen::Index>(basis.fermion_rank(hop.mask)), static_cast<Eigen::Index>(s)) +=
            static_cast<double>(hop.sign) * h(to, from);
      }
    }
  }
  return out;
}

Eigen::VectorXcd apply_one_body(const FockBasis& basis, const Eigen::MatrixXcd& h, const Eigen::VectorXcd& psi) {
  const RowMajorC res = second_quantized_one_body(basis, h) * as_matrix(basis, psi);
  return Eigen::Map<const Eigen::VectorXcd>(res.data(), res.size());
}

Eigen::MatrixXcd truncated_weyl(int n_max, cplx f) {
  const int levels = n_max + 1;
  // i (f a+ - conj(f) a) is Hermitian
  Eigen::MatrixXcd gen = Eigen::MatrixXcd::Zero(levels, levels);
  for (int m = 0; m + 1 < levels; ++m) {
    const double s = std::sqrt(static_cast<double>(m + 1));
    gen(m + 1, m) = cplx(0.0, 1.0) * f * s;
    gen(m, m + 1) = -cplx(0.0, 1.0) * std::conj(f) * s;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(gen);
  const Eigen::VectorXcd phase =
      eig.eigenvalues().unaryExpr([](double l) { return std::exp(cplx(0.0, -l)); });
  return eig.eigenvectors() * phase.asDiagonal() * eig.eigenvectors().adjoint();
}

Eigen::VectorXcd apply_mode_product(const FockBasis& basis, const std::vector<Eigen::MatrixXcd>& w,
                                    const Eigen::VectorXcd& psi) {
  Eigen::VectorXcd cur = psi;
  const int levels = basis.n_max() + 1;
  for (std::size_t k = 0; k < basis.num_boson_modes(); ++k) {
    Eigen::VectorXcd next = Eigen::VectorXcd::Zero(cur.size());
    const std::size_t stride = basis.boson_stride(k);
    for (std::size_t f = 0; f < basis.fermion_dim(); ++f)
      for (std::size_t b = 0; b < basis.boson_dim(); ++b) {
        const int occ = basis.occupation(b, k);
        const cplx v = cur[static_cast<Eigen::Index>(basis.index(f, b))];
        if (v == cplx(0.0, 0.0)) continue;
        const std::size_t base = b - static_cast<std::size_t>(occ) * stride;
        for (int m = 0; m < levels; ++m)
          next[static_cast<Eigen::Index>(basis.index(f, base + static_cast<std::size_t>(m) * stride))] += w[k](m, occ) * v;
      }
    cur.swap(next);
  }
  return cur;
}

FieldObservables field_observables(const Model& model, const FockBasis& basis, const Eigen::VectorXcd& psi,
                                   double time) {
  FieldObservables obs;
  obs.time = time;
  obs.norm = psi.norm();
  obs.energy = std::nan("");
  const auto& modes = model.modes();
  obs.a_mean.resize(static_cast<Eigen::Index>(modes.size()));
  for (std::size_t k = 0; k < modes.size(); ++k)
    obs.a_mean[static_cast<Eigen::Index>(k)] = psi.dot(apply_annihilation(basis, psi, k));

  const ReducedDensities rd = reduced_densities(model, basis, psi, false);
  const double n = static_cast<double>(basis.n_particles());
  obs.rho_mean.resize(static_cast<Eigen::Index>(modes.size()));
  for (std::size_t k = 0; k < modes.size(); ++k) {
    cplx acc(0.0, 0.0);
    for (std::size_t m = 0; m < model.grid_size(); ++m) {
      auto l = model.grid_lattice(m);
      for (int a = 0; a < 3; ++a) l[static_cast<std::size_t>(a)] += modes[k].n[static_cast<std::size_t>(a)];
      acc += rd.gamma_f(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(model.grid_index_of(l)));
    }
    obs.rho_mean[static_cast<Eigen::Index>(k)] = n * acc;
  }
  return obs;
}

namespace {
cplx phase_at(const BosonMode& mode, const Momentum& x) {
  return std::polar(1.0, mode.k[0] * x[0] + mode.k[1] * x[1] + mode.k[2] * x[2]);
}
} // namespace

double mean_field_at(const Model& model, const FieldObservables& obs, const Momentum& x) {
  const double sw = std::sqrt(model.mode_weight());
  double phi = 0.0;
  for (std::size_t k = 0; k < model.num_modes(); ++k) {
    const auto& mode = model.modes()[k];
    phi += 2.0 * sw * mode.form_factor * (phase_at(mode, x) * obs.a_mean[static_cast<Eigen::Index>(k)]).real();
  }
  return phi;
}

std::vector<EhrenfestPoint> ehrenfest_check(const Model& model, const std::vector<FieldObservables>& series,
                                            const Momentum& x) {
  std::vector<EhrenfestPoint> out;
  if (series.size() < 3) return out;
  const auto& p = model.params();
  const double n23 = std::pow(static_cast<double>(p.n_particles), -2.0 / 3.0);
  const double sw = std::sqrt(model.mode_weight());
  const double inv_2pi_d = std::pow(2.0 * std::numbers::pi, -p.dim);
  const double h = series[1].time - series[0].time;
  for (std::size_t i = 1; i + 1 < series.size(); ++i) {
    const auto& s = series[i];
    double restoring = 0.0;
    cplx source(0.0, 0.0);
    for (std::size_t k = 0; k < model.num_modes(); ++k) {
      const auto& mode = model.modes()[k];
      const cplx e = phase_at(mode, x);
      restoring += 2.0 * sw * mode.form_factor * mode.omega * mode.omega *
                   (e * s.a_mean[static_cast<Eigen::Index>(k)]).real();
      source += model.mode_weight() * std::conj(e) * s.rho_mean[static_cast<Eigen::Index>(k)];
    }
    const double second = (mean_field_at(model, series[i + 1], x) - 2.0 * mean_field_at(model, s, x) +
                           mean_field_at(model, series[i - 1], x)) /
                          (h * h);
    EhrenfestPoint pt;
    pt.time = s.time;
    pt.lhs = second + n23 * p.delta_n * p.delta_n * restoring;
    pt.rhs = -n23 * p.delta_n * inv_2pi_d * source.real();
    pt.residual = std::abs(pt.lhs - pt.rhs);
    out.push_back(pt);
  }
  return out;
}

} // namespace nelson
