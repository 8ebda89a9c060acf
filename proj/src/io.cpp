#include "nelson/io.hpp"

#include "nelson/config.hpp"
#include "nelson/errors.hpp"

#include <json.hpp>

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>

namespace nelson {

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header)
    : path_(path), columns_(header.size()) {
  file_ = std::fopen(path.c_str(), "w");
  if (!file_) throw ConfigError("cannot open " + path + " for writing");
  for (std::size_t i = 0; i < header.size(); ++i) std::fprintf(file_, i ? ",%s" : "%s", header[i].c_str());
  std::fputc('\n', file_);
}

CsvWriter::~CsvWriter() {
  if (file_) std::fclose(file_);
}

void CsvWriter::row(const std::vector<double>& values) {
  if (values.size() != columns_) throw std::logic_error("CSV row width does not match header in " + path_);
  for (std::size_t i = 0; i < values.size(); ++i) std::fprintf(file_, i ? ",%.17g" : "%.17g", values[i]);
  std::fputc('\n', file_);
}

void CsvWriter::close() {
  if (file_ && std::fclose(file_) != 0) {
    file_ = nullptr;
    throw ConfigError("failed writing " + path_);
  }
  file_ = nullptr;
}

void write_step_reports(const std::string& path, const std::vector<StepReport>& reports) {
  CsvWriter csv(path, {"time", "gram_deviation", "alpha_norm", "alpha_bound", "energy_drift", "secondorder_residual"});
  for (const auto& r : reports)
    csv.row({r.time, r.gram_deviation, r.alpha_norm, r.alpha_bound, r.energy_drift, r.secondorder_residual});
  csv.close();
}

namespace {

void put_f64(std::ostream& os, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  os.write(bytes, 8);
}

double get_f64(std::istream& is) {
  unsigned char bytes[8];
  is.read(reinterpret_cast<char*>(bytes), 8);
  if (!is) throw ConfigError("truncated trajectory file");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

std::vector<std::vector<double>> read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    for (char& c : line)
      if (c == ',') c = ' ';
    std::istringstream ls(line);
    std::vector<double> row;
    std::string tok;
    while (ls >> tok) {
      try {
        row.push_back(std::stod(tok));
      } catch (const std::exception&) {
        throw ConfigError("non-numeric entry '" + tok + "' in " + path);
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

} // namespace

void write_trajectory(const std::string& path, const Model& model, const std::vector<SkgState>& samples) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw ConfigError("cannot write " + path);
  for (const auto& s : samples) {
    put_f64(os, s.time);
    for (Eigen::Index j = 0; j < s.orbitals.phi.cols(); ++j)
      for (Eigen::Index i = 0; i < s.orbitals.phi.rows(); ++i) {
        put_f64(os, s.orbitals.phi(i, j).real());
        put_f64(os, s.orbitals.phi(i, j).imag());
      }
    for (Eigen::Index k = 0; k < s.alpha.alpha.size(); ++k) {
      put_f64(os, s.alpha.alpha[k].real());
      put_f64(os, s.alpha.alpha[k].imag());
    }
  }
  if (!os) throw ConfigError("failed writing " + path);

  nlohmann::ordered_json side;
  side["params"] = params_to_json(model.params());
  side["records"] = samples.size();
  side["orbitals"] = model.params().n_particles;
  side["grid_size"] = model.grid_size();
  side["modes"] = model.num_modes();
  side["layout"] = "time, orbitals (orbital-major, grid order, re/im), alpha (mode order, re/im); little-endian f64";
  std::ofstream js(path + ".json", std::ios::trunc);
  js << side.dump(2) << '\n';
  if (!js) throw ConfigError("failed writing " + path + ".json");
}

std::vector<SkgState> read_trajectory(const std::string& path, const Model& model) {
  std::ifstream side_in(path + ".json");
  if (!side_in) throw ConfigError("missing sidecar " + path + ".json");
  const auto side = nlohmann::json::parse(side_in);
  if (!(params_from_json(side.at("params")) == model.params()))
    throw ConfigError(path + " was written with different model parameters");
  const auto records = side.at("records").get<std::size_t>();
  const int n = model.params().n_particles;
  const auto g = static_cast<Eigen::Index>(model.grid_size());
  const auto nm = static_cast<Eigen::Index>(model.num_modes());

  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot read " + path);
  std::vector<SkgState> out(records);
  for (auto& s : out) {
    s.time = get_f64(is);
    s.orbitals.phi.resize(g, n);
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = 0; i < g; ++i) {
        const double re = get_f64(is);
        s.orbitals.phi(i, j) = cplx(re, get_f64(is));
      }
    s.alpha.alpha.resize(nm);
    for (Eigen::Index k = 0; k < nm; ++k) {
      const double re = get_f64(is);
      s.alpha.alpha[k] = cplx(re, get_f64(is));
    }
  }
  return out;
}

OrbitalSet read_orbital_file(const std::string& path, const Model& model) {
  const auto rows = read_table(path);
  const int n = model.params().n_particles;
  if (rows.size() != model.grid_size())
    throw ConfigError(path + ": expected " + std::to_string(model.grid_size()) + " grid rows");
  OrbitalSet orb;
  orb.phi.resize(static_cast<Eigen::Index>(rows.size()), n);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != static_cast<std::size_t>(2 * n))
      throw ConfigError(path + ": expected " + std::to_string(2 * n) + " columns per row");
    for (int j = 0; j < n; ++j)
      orb.phi(static_cast<Eigen::Index>(i), j) =
          cplx(rows[i][static_cast<std::size_t>(2 * j)], rows[i][static_cast<std::size_t>(2 * j + 1)]);
  }
  if (model.gram_deviation(orb) > 1e-6) throw ConfigError(path + ": orbitals are not orthonormal");
  return orb;
}

FieldAmplitude read_alpha_file(const std::string& path, const Model& model) {
  const auto rows = read_table(path);
  if (rows.size() != model.num_modes())
    throw ConfigError(path + ": expected " + std::to_string(model.num_modes()) + " mode rows");
  FieldAmplitude a;
  a.alpha.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k].size() != 2) throw ConfigError(path + ": expected two columns (re, im)");
    a.alpha[static_cast<Eigen::Index>(k)] = cplx(rows[k][0], rows[k][1]);
  }
  return a;
}

void write_orbital_file(const std::string& path, const OrbitalSet& orbitals) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw ConfigError("cannot write " + path);
  for (Eigen::Index i = 0; i < orbitals.phi.rows(); ++i) {
    for (Eigen::Index j = 0; j < orbitals.phi.cols(); ++j)
      std::fprintf(f, j ? ",%.17g,%.17g" : "%.17g,%.17g", orbitals.phi(i, j).real(), orbitals.phi(i, j).imag());
    std::fputc('\n', f);
  }
  std::fclose(f);
}

void write_alpha_file(const std::string& path, const FieldAmplitude& alpha) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw ConfigError("cannot write " + path);
  for (Eigen::Index k = 0; k < alpha.alpha.size(); ++k)
    std::fprintf(f, "%.17g,%.17g\n", alpha.alpha[k].real(), alpha.alpha[k].imag());
  std::fclose(f);
}

} // namespace nelson
