#include "nelson/semiclassics.hpp"

#include "nelson/errors.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <string>

namespace nelson {

namespace {

constexpr double kClip = 1e-12;

// Orthonormal basis (columns, grid-weighted) of the span of the given vectors.
Eigen::MatrixXcd orthonormal_span(const Model& model, const std::vector<Eigen::VectorXcd>& vectors) {
  std::vector<Eigen::VectorXcd> basis;
  for (const auto& v : vectors) {
    const double scale = std::sqrt(std::max(model.inner(v, v).real(), 0.0));
    if (scale == 0.0) continue;
    Eigen::VectorXcd w = v;
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& b : basis) w -= model.inner(b, w) * b;
    const double nrm = std::sqrt(std::max(model.inner(w, w).real(), 0.0));
    if (nrm <= 1e-10 * scale) continue;
    basis.push_back(w / nrm);
  }
  Eigen::MatrixXcd out(static_cast<Eigen::Index>(model.grid_size()), static_cast<Eigen::Index>(basis.size()));
  for (std::size_t j = 0; j < basis.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = basis[j];
  return out;
}

// Singular values of q B_c phi_j, where B_c runs over the components of A*.
Eigen::VectorXd complement_singular_values(const SlaterProjector& proj, const OneBodyOp& op) {
  const Model& model = proj.model();
  const auto& phi = proj.orbitals().phi;
  std::vector<Eigen::VectorXcd> cols;
  if (const auto* pw = std::get_if<PlaneWaveOp>(&op)) {
    const LatticeVector minus{-pw->n[0], -pw->n[1], -pw->n[2]};
    for (int j = 0; j < proj.rank(); ++j)
      cols.push_back(proj.apply_complement(multiply_plane_wave(model, minus, phi.col(j))));
  } else {
    for (int axis = 0; axis < model.dim(); ++axis)
      for (int j = 0; j < proj.rank(); ++j)
        cols.push_back(proj.apply_complement(gradient_component(model, axis, phi.col(j))));
  }
  const auto m = static_cast<Eigen::Index>(cols.size());
  Eigen::MatrixXcd gram(m, m);
  for (Eigen::Index a = 0; a < m; ++a)
    for (Eigen::Index b = a; b < m; ++b) {
      gram(a, b) = model.inner(cols[static_cast<std::size_t>(a)], cols[static_cast<std::size_t>(b)]);
      gram(b, a) = std::conj(gram(a, b));
    }
  Eigen::VectorXd sv = Eigen::VectorXd::Zero(m);
  if (m == 0) return sv;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(gram, Eigen::EigenvaluesOnly);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double ev = es.eigenvalues()[i];
    sv[i] = ev > kClip ? std::sqrt(ev) : 0.0;
  }
  return sv;
}

} // namespace

SlaterProjector::SlaterProjector(const Model& model, OrbitalSet orbitals)
    : model_(&model), orbitals_(std::move(orbitals)) {
  if (static_cast<std::size_t>(orbitals_.phi.rows()) != model.grid_size())
    throw ConfigError("orbital set does not live on the model grid");
  const double dev = model.gram_deviation(orbitals_);
  if (dev > 1e-6) throw NumericalError("orbitals not orthonormal (Gram deviation " + std::to_string(dev) + ")");
}

Eigen::VectorXcd SlaterProjector::apply(const Eigen::Ref<const Eigen::VectorXcd>& f) const {
  const Eigen::VectorXcd overlaps = (orbitals_.phi.adjoint() * f) * model_->cell_volume();
  return orbitals_.phi * overlaps;
}

Eigen::VectorXcd SlaterProjector::apply_complement(const Eigen::Ref<const Eigen::VectorXcd>& f) const {
  return f - apply(f);
}

Eigen::VectorXcd multiply_plane_wave(const Model& model, const LatticeVector& n,
                                     const Eigen::Ref<const Eigen::VectorXcd>& f) {
  const double dk = model.dk();
  Eigen::VectorXcd out(f.size());
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    const auto x = model.position(static_cast<std::size_t>(i));
    out[i] = f[i] * std::polar(1.0, dk * (n[0] * x[0] + n[1] * x[1] + n[2] * x[2]));
  }
  return out;
}

Eigen::VectorXcd gradient_component(const Model& model, int axis, const Eigen::Ref<const Eigen::VectorXcd>& f) {
  Eigen::VectorXcd c = f;
  model.fft().forward({c.data(), static_cast<std::size_t>(c.size())});
  const double inv = 1.0 / static_cast<double>(model.grid_size());
  for (Eigen::Index i = 0; i < c.size(); ++i)
    c[i] *= cplx(0.0, model.grid_momentum(static_cast<std::size_t>(i))[static_cast<std::size_t>(axis)] * inv);
  model.fft().backward({c.data(), static_cast<std::size_t>(c.size())});
  return c;
}

double trace_norm_p_op_q(const SlaterProjector& proj, const OneBodyOp& op) {
  return complement_singular_values(proj, op).sum();
}

double hs_norm_p_op_q(const SlaterProjector& proj, const OneBodyOp& op) {
  return complement_singular_values(proj, op).norm();
}

double commutator_trace_norm(const SlaterProjector& proj, const LatticeVector& n) {
  const Model& model = proj.model();
  const auto& phi = proj.orbitals().phi;
  const LatticeVector minus{-n[0], -n[1], -n[2]};

  // [p, e] = p e q - q e p has range in span{phi, q e phi} and co-range in span{phi, q e* phi}.
  std::vector<Eigen::VectorXcd> spanning;
  for (int j = 0; j < proj.rank(); ++j) spanning.emplace_back(phi.col(j));
  for (int j = 0; j < proj.rank(); ++j)
    spanning.push_back(proj.apply_complement(multiply_plane_wave(model, n, phi.col(j))));
  for (int j = 0; j < proj.rank(); ++j)
    spanning.push_back(proj.apply_complement(multiply_plane_wave(model, minus, phi.col(j))));
  const Eigen::MatrixXcd u = orthonormal_span(model, spanning);
  if (u.cols() == 0) return 0.0;

  Eigen::MatrixXcd c_u(u.rows(), u.cols());
  for (Eigen::Index j = 0; j < u.cols(); ++j) {
    const Eigen::VectorXcd col = u.col(j);
    const Eigen::VectorXcd peq = proj.apply(multiply_plane_wave(model, n, proj.apply_complement(col)));
    const Eigen::VectorXcd qep = proj.apply_complement(multiply_plane_wave(model, n, proj.apply(col)));
    c_u.col(j) = peq - qep;
  }
  const Eigen::MatrixXcd block = (u.adjoint() * c_u) * model.cell_volume();
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(block);
  return svd.singularValues().sum();
}

TraceNormReport trace_norm_report(const SlaterProjector& proj, const LatticeVector& n, double time) {
  const Model& model = proj.model();
  TraceNormReport r;
  r.time = time;
  r.n = n;
  r.k_abs = model.dk() * std::sqrt(static_cast<double>(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]));
  const Eigen::VectorXd sv = complement_singular_values(proj, PlaneWaveOp{n});
  r.tn_peq = sv.sum();
  r.hs_peq = sv.norm();
  r.tn_commutator = commutator_trace_norm(proj, n);
  r.tn_pgradq = trace_norm_p_op_q(proj, GradientOp{});
  return r;
}

std::vector<LatticeVector> default_k_list(const Model& model) {
  std::vector<LatticeVector> out;
  for (const auto& m : model.modes()) out.push_back(m.n);
  return out;
}

ScanResult semiclassical_scan(const Model& model, const std::vector<SkgState>& samples,
                              const std::vector<LatticeVector>& k_list) {
  ScanResult out;
  const double n_scale = std::pow(static_cast<double>(std::max(1, model.params().n_particles)), -1.0 / 3.0);
  for (const auto& s : samples) {
    const SlaterProjector proj(model, s.orbitals);
    std::vector<TraceNormReport> row(k_list.size());
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < k_list.size(); ++i) row[i] = trace_norm_report(proj, k_list[i], s.time);
    const double grad = k_list.empty() ? trace_norm_p_op_q(proj, GradientOp{}) : row.front().tn_pgradq;
    double sup = 0.0;
    for (const auto& r : row) sup = std::max(sup, r.tn_peq / (1.0 + r.k_abs));
    out.combined.emplace_back(s.time, sup + n_scale * grad);
    out.reports.insert(out.reports.end(), row.begin(), row.end());
  }
  return out;
}

GrowthFit fit_growth(const std::vector<std::pair<double, double>>& series) {
  GrowthFit fit;
  double s0 = 0, s1 = 0, s2 = 0, sy = 0, sxy = 0;
  for (const auto& [t, y] : series) {
    if (!(y > 0.0)) continue;
    const double x = t * t;
    const double ly = std::log(y);
    s0 += 1;
    s1 += x;
    s2 += x * x;
    sy += ly;
    sxy += x * ly;
  }
  fit.points = static_cast<int>(s0);
  if (fit.points == 0) return fit;
  const double det = s0 * s2 - s1 * s1;
  double log_a = sy / s0;
  double b = 0.0;
  if (fit.points > 1 && det > 1e-300) {
    b = (s0 * sxy - s1 * sy) / det;
    log_a = (sy - b * s1) / s0;
  }
  double rss = 0.0;
  for (const auto& [t, y] : series) {
    if (!(y > 0.0)) continue;
    const double r = std::log(y) - log_a - b * t * t;
    rss += r * r;
  }
  fit.prefactor = std::exp(log_a);
  fit.rate = b;
  fit.rms_log_residual = std::sqrt(rss / s0);
  return fit;
}

CosDiagonalization diagonalize_p_cos(const SlaterProjector& proj, const LatticeVector& n) {
  const Model& model = proj.model();
  const auto& phi = proj.orbitals().phi;
  const double dk = model.dk();
  Eigen::MatrixXcd cos_phi(phi.rows(), phi.cols());
  for (Eigen::Index i = 0; i < phi.rows(); ++i) {
    const auto x = model.position(static_cast<std::size_t>(i));
    cos_phi.row(i) = phi.row(i) * std::cos(dk * (n[0] * x[0] + n[1] * x[1] + n[2] * x[2]));
  }
  Eigen::MatrixXcd h = (phi.adjoint() * cos_phi) * model.cell_volume();
  h = (0.5 * (h + h.adjoint())).eval();
  CosDiagonalization out;
  if (h.rows() == 0) return out;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
  if (es.info() != Eigen::Success) throw NumericalError("eigensolver failed on p cos(kx) p");
  out.eigenvalues = es.eigenvalues();
  out.coefficients = es.eigenvectors();
  return out;
}

double projector_distance(const Model& model, const OrbitalSet& a, const OrbitalSet& b) {
  std::vector<Eigen::VectorXcd> spanning;
  for (int j = 0; j < a.count(); ++j) spanning.emplace_back(a.phi.col(j));
  for (int j = 0; j < b.count(); ++j) spanning.emplace_back(b.phi.col(j));
  const Eigen::MatrixXcd u = orthonormal_span(model, spanning);
  if (u.cols() == 0) return 0.0;
  const double w = model.cell_volume();
  const Eigen::MatrixXcd ua = (u.adjoint() * a.phi) * w;
  const Eigen::MatrixXcd ub = (u.adjoint() * b.phi) * w;
  Eigen::MatrixXcd diff = ua * ua.adjoint() - ub * ub.adjoint();
  diff = (0.5 * (diff + diff.adjoint())).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(diff, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().sum();
}

} // namespace nelson
