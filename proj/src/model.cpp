#include "nelson/model.hpp"

#include "nelson/errors.hpp"

#include <cmath>
#include <string>

namespace nelson {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

double norm2(const Momentum& k) { return k[0] * k[0] + k[1] * k[1] + k[2] * k[2]; }

bool inside_cutoff(double k2, double cutoff) { return k2 <= cutoff * cutoff * (1.0 + 1e-12); }

} // namespace

void ModelParams::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("invalid model parameters: " + what); };
  if (n_particles < 0) fail("N must be nonnegative");
  if (!(cutoff >= 1.0)) fail("Lambda must be >= 1");
  if (!(delta_n >= 0.0) || !std::isfinite(delta_n)) fail("delta_N must be finite and >= 0");
  if (!(boson_mass >= 0.0)) fail("boson mass must be >= 0");
  if (dim < 1 || dim > 3) fail("dim must be 1, 2 or 3");
  if (!(box_length > 0.0)) fail("box length must be positive");
  if (!is_power_of_two(grid_points)) fail("grid points per axis must be a power of two");
  if (!(time_step > 0.0)) fail("time step must be positive");
  if (fock_n_max < 0) fail("fock_n_max must be nonnegative");
  const double max_n = std::floor(cutoff * box_length / kTwoPi * (1.0 + 1e-12));
  if (max_n >= grid_points / 2)
    fail("cutoff lattice radius " + std::to_string(static_cast<int>(max_n)) +
         " does not fit strictly inside the grid Nyquist range");
}

double dispersion(const Momentum& k, double mass) { return std::sqrt(norm2(k) + mass * mass); }

double form_factor(const Momentum& k, const ModelParams& params) {
  const double omega = dispersion(k, params.boson_mass);
  if (omega == 0.0) throw ConfigError("form factor requested at omega(k) = 0 (excluded zero mode)");
  if (!inside_cutoff(norm2(k), params.cutoff)) return 0.0;
  return std::pow(kTwoPi, -0.5 * params.dim) / std::sqrt(2.0 * omega);
}

Model::Model(const ModelParams& params) : params_(params) {
  params_.validate();
  const int n = params_.grid_points;
  const int d = params_.dim;
  grid_size_ = 1;
  for (int a = 0; a < d; ++a) grid_size_ *= static_cast<std::size_t>(n);
  dx_ = params_.box_length / n;
  dk_ = kTwoPi / params_.box_length;
  cell_volume_ = std::pow(dx_, d);
  mode_weight_ = std::pow(dk_, d);
  volume_ = std::pow(params_.box_length, d);

  k2_.resize(grid_size_);
  for (std::size_t i = 0; i < grid_size_; ++i) k2_[i] = norm2(grid_momentum(i));

  // Retained modes in lexicographic order of their integer coordinates.
  const int r = static_cast<int>(std::floor(params_.cutoff / dk_ * (1.0 + 1e-12)));
  const int r1 = d >= 2 ? r : 0;
  const int r2 = d >= 3 ? r : 0;
  for (int a = -r; a <= r; ++a)
    for (int b = -r1; b <= r1; ++b)
      for (int c = -r2; c <= r2; ++c) {
        BosonMode mode;
        mode.n = {a, b, c};
        mode.k = {dk_ * a, dk_ * b, dk_ * c};
        const double k2 = norm2(mode.k);
        if (!inside_cutoff(k2, params_.cutoff)) continue;
        if (a == 0 && b == 0 && c == 0 && params_.boson_mass == 0.0) continue;
        mode.k_abs = std::sqrt(k2);
        mode.omega = dispersion(mode.k, params_.boson_mass);
        mode.form_factor = form_factor(mode.k, params_);
        mode.grid_index = grid_index_of(mode.n);
        modes_.push_back(mode);
      }
  for (auto& mode : modes_) {
    for (std::size_t j = 0; j < modes_.size(); ++j) {
      const auto& other = modes_[j];
      if (other.n[0] == -mode.n[0] && other.n[1] == -mode.n[1] && other.n[2] == -mode.n[2]) {
        mode.partner = j;
        break;
      }
    }
  }

  fft_ = std::make_shared<const FftPlan>(d, n);
}

LatticeVector Model::grid_lattice(std::size_t idx) const {
  const int n = params_.grid_points;
  LatticeVector out{0, 0, 0};
  for (int a = params_.dim - 1; a >= 0; --a) {
    int m = static_cast<int>(idx % static_cast<std::size_t>(n));
    idx /= static_cast<std::size_t>(n);
    out[static_cast<std::size_t>(a)] = m < n / 2 ? m : m - n;
  }
  return out;
}

Momentum Model::grid_momentum(std::size_t idx) const {
  const auto l = grid_lattice(idx);
  return {dk_ * l[0], dk_ * l[1], dk_ * l[2]};
}

std::size_t Model::grid_index_of(const LatticeVector& n_vec) const {
  const int n = params_.grid_points;
  std::size_t idx = 0;
  for (int a = 0; a < params_.dim; ++a) {
    int m = n_vec[static_cast<std::size_t>(a)] % n;
    if (m < 0) m += n;
    idx = idx * static_cast<std::size_t>(n) + static_cast<std::size_t>(m);
  }
  return idx;
}

Momentum Model::position(std::size_t idx) const {
  const int n = params_.grid_points;
  Momentum x{0, 0, 0};
  for (int a = params_.dim - 1; a >= 0; --a) {
    x[static_cast<std::size_t>(a)] = dx_ * static_cast<double>(idx % static_cast<std::size_t>(n));
    idx /= static_cast<std::size_t>(n);
  }
  return x;
}

double Model::form_factor_norm() const {
  double s = 0.0;
  for (const auto& m : modes_) s += m.form_factor * m.form_factor;
  return std::sqrt(s * mode_weight_);
}

cplx Model::inner(const Eigen::Ref<const Eigen::VectorXcd>& f, const Eigen::Ref<const Eigen::VectorXcd>& g) const {
  return f.dot(g) * cell_volume_;
}

Eigen::MatrixXcd Model::gram(const OrbitalSet& orbitals) const {
  return (orbitals.phi.adjoint() * orbitals.phi) * cell_volume_;
}

double Model::gram_deviation(const OrbitalSet& orbitals) const {
  if (orbitals.count() == 0) return 0.0;
  const Eigen::MatrixXcd g = gram(orbitals);
  return (g - Eigen::MatrixXcd::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff();
}

double Model::alpha_norm(const FieldAmplitude& alpha) const {
  return std::sqrt(alpha.alpha.squaredNorm() * mode_weight_);
}

Eigen::VectorXcd Model::plane_wave_coefficients(const Eigen::Ref<const Eigen::VectorXcd>& f) const {
  Eigen::VectorXcd c = f;
  fft_->forward({c.data(), static_cast<std::size_t>(c.size())});
  c *= cell_volume_ / std::sqrt(volume_);
  return c;
}

Eigen::VectorXcd Model::from_plane_wave_coefficients(const Eigen::Ref<const Eigen::VectorXcd>& c) const {
  Eigen::VectorXcd f = c;
  fft_->backward({f.data(), static_cast<std::size_t>(f.size())});
  f /= std::sqrt(volume_);
  return f;
}

Eigen::VectorXcd Model::plane_wave(const LatticeVector& n) const {
  Eigen::VectorXcd f(static_cast<Eigen::Index>(grid_size_));
  const Momentum k{dk_ * n[0], dk_ * n[1], dk_ * n[2]};
  const double amp = 1.0 / std::sqrt(volume_);
  for (std::size_t i = 0; i < grid_size_; ++i) {
    const auto x = position(i);
    f[static_cast<Eigen::Index>(i)] = std::polar(amp, k[0] * x[0] + k[1] * x[1] + k[2] * x[2]);
  }
  return f;
}

Eigen::VectorXd field_from_alpha(const Model& model, const FieldAmplitude& alpha) {
  const auto& modes = model.modes();
  if (static_cast<std::size_t>(alpha.alpha.size()) != modes.size())
    throw ConfigError("field amplitude does not match the retained mode count");
  Eigen::VectorXcd coeff = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(model.grid_size()));
  for (std::size_t j = 0; j < modes.size(); ++j) {
    const cplx c = model.mode_weight() * modes[j].form_factor * alpha.alpha[static_cast<Eigen::Index>(j)];
    coeff[static_cast<Eigen::Index>(modes[j].grid_index)] += c;
    coeff[static_cast<Eigen::Index>(model.grid_index_of(
        {-modes[j].n[0], -modes[j].n[1], -modes[j].n[2]}))] += std::conj(c);
  }
  model.fft().backward({coeff.data(), static_cast<std::size_t>(coeff.size())});
  return coeff.real();
}

Eigen::VectorXd density(const OrbitalSet& orbitals, std::size_t grid_size) {
  Eigen::VectorXd rho = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid_size));
  for (int j = 0; j < orbitals.count(); ++j) rho += orbitals.phi.col(j).cwiseAbs2();
  return rho;
}

Eigen::VectorXd density(const Model& model, const OrbitalSet& orbitals) {
  return density(orbitals, model.grid_size());
}

Eigen::VectorXcd fourier_transform(const Model& model, const Eigen::VectorXd& f) {
  Eigen::VectorXcd c = f.cast<cplx>();
  model.fft().forward({c.data(), static_cast<std::size_t>(c.size())});
  c *= std::pow(kTwoPi, -0.5 * model.dim()) * model.cell_volume();
  return c;
}

Eigen::VectorXcd fourier_density(const Model& model, const Eigen::VectorXd& rho) {
  const Eigen::VectorXcd full = fourier_transform(model, rho);
  Eigen::VectorXcd out(static_cast<Eigen::Index>(model.num_modes()));
  for (std::size_t j = 0; j < model.num_modes(); ++j)
    out[static_cast<Eigen::Index>(j)] = full[static_cast<Eigen::Index>(model.modes()[j].grid_index)];
  return out;
}

} // namespace nelson
