#include "nelson/config.hpp"

#include "nelson/errors.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

namespace nelson {

namespace {

using json = nlohmann::json;

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& item : j.items())
    if (!allowed.count(item.key())) throw ConfigError("unknown key '" + item.key() + "' in " + where);
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

LatticeVector lattice_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty() || j.size() > 3) throw ConfigError(where + " must be an array of 1-3 integers");
  LatticeVector n{};
  for (std::size_t a = 0; a < j.size(); ++a) {
    if (!j[a].is_number_integer()) throw ConfigError(where + " must contain integers");
    n[a] = j[a].get<int>();
  }
  return n;
}

std::string resolve(const std::string& path, const std::string& base_dir) {
  if (path.empty() || base_dir.empty() || std::filesystem::path(path).is_absolute()) return path;
  return (std::filesystem::path(base_dir) / path).lexically_normal().string();
}

nlohmann::ordered_json lattice_to_json(const LatticeVector& n) { return nlohmann::ordered_json::array({n[0], n[1], n[2]}); }

} // namespace

std::string experiment_name(Experiment e) {
  switch (e) {
  case Experiment::SkgRun: return "skg-run";
  case Experiment::FreeCompare: return "free-compare";
  case Experiment::SemiclassicalScan: return "semiclassical-scan";
  case Experiment::FockVerify: return "fock-verify";
  case Experiment::Theorem2Scaling: return "theorem2-scaling";
  case Experiment::ConvergenceStudy: return "convergence-study";
  }
  return "unknown";
}

Experiment experiment_from_name(const std::string& name) {
  for (auto e : {Experiment::SkgRun, Experiment::FreeCompare, Experiment::SemiclassicalScan, Experiment::FockVerify,
                 Experiment::Theorem2Scaling, Experiment::ConvergenceStudy})
    if (experiment_name(e) == name) return e;
  throw ConfigError("unknown experiment '" + name + "'");
}

nlohmann::ordered_json params_to_json(const ModelParams& p) {
  nlohmann::ordered_json j;
  j["N"] = p.n_particles;
  j["Lambda"] = p.cutoff;
  j["delta_N"] = p.delta_n;
  j["boson_mass"] = p.boson_mass;
  j["dim"] = p.dim;
  j["box_length"] = p.box_length;
  j["grid_points"] = p.grid_points;
  j["time_step"] = p.time_step;
  j["fock_n_max"] = p.fock_n_max;
  return j;
}

ModelParams params_from_json(const json& j) {
  const std::string w = "params";
  check_keys(j, {"N", "Lambda", "delta_N", "boson_mass", "dim", "box_length", "grid_points", "time_step", "fock_n_max"},
             w);
  ModelParams p;
  read(j, "N", p.n_particles, w);
  read(j, "Lambda", p.cutoff, w);
  read(j, "delta_N", p.delta_n, w);
  read(j, "boson_mass", p.boson_mass, w);
  read(j, "dim", p.dim, w);
  read(j, "box_length", p.box_length, w);
  read(j, "grid_points", p.grid_points, w);
  read(j, "time_step", p.time_step, w);
  read(j, "fock_n_max", p.fock_n_max, w);
  p.validate();
  return p;
}

ExperimentConfig config_from_json(const json& j, const std::string& base_dir) {
  check_keys(j,
             {"experiment", "params", "initial", "t_final", "sample_interval", "output_dir", "seed", "checkpoint",
              "theorem2", "convergence", "scan", "fock"},
             "config");
  ExperimentConfig c;
  if (!j.contains("experiment")) throw ConfigError("config.experiment is required");
  c.experiment = experiment_from_name(j.at("experiment").get<std::string>());
  if (j.contains("params")) c.params = params_from_json(j.at("params"));
  read(j, "t_final", c.t_final, "config");
  read(j, "sample_interval", c.sample_interval, "config");
  read(j, "output_dir", c.output_dir, "config");
  read(j, "seed", c.seed, "config");
  read(j, "checkpoint", c.checkpoint, "config");
  if (!(c.t_final >= 0.0)) throw ConfigError("t_final must be >= 0");
  if (!(c.sample_interval >= 0.0)) throw ConfigError("sample_interval must be >= 0");

  if (j.contains("initial")) {
    const auto& in = j.at("initial");
    check_keys(in, {"orbitals", "alpha"}, "initial");
    if (in.contains("orbitals")) {
      const auto& o = in.at("orbitals");
      if (o.is_string()) {
        if (o.get<std::string>() != "fermi-ball") throw ConfigError("initial.orbitals must be \"fermi-ball\" or {file}");
        c.initial.orbitals = InitialSpec::Orbitals::FermiBall;
      } else {
        check_keys(o, {"file"}, "initial.orbitals");
        c.initial.orbitals = InitialSpec::Orbitals::File;
        c.initial.orbitals_file = resolve(o.at("file").get<std::string>(), base_dir);
      }
    }
    if (in.contains("alpha")) {
      const auto& a = in.at("alpha");
      if (a.is_string()) {
        if (a.get<std::string>() != "zero") throw ConfigError("initial.alpha must be \"zero\", {file} or {single_mode}");
        c.initial.alpha = InitialSpec::Alpha::Zero;
      } else {
        check_keys(a, {"file", "single_mode"}, "initial.alpha");
        if (a.size() != 1) throw ConfigError("initial.alpha needs exactly one of file, single_mode");
        if (a.contains("file")) {
          c.initial.alpha = InitialSpec::Alpha::File;
          c.initial.alpha_file = resolve(a.at("file").get<std::string>(), base_dir);
        } else {
          const auto& s = a.at("single_mode");
          check_keys(s, {"k", "value"}, "initial.alpha.single_mode");
          c.initial.alpha = InitialSpec::Alpha::SingleMode;
          c.initial.mode = lattice_from_json(s.at("k"), "initial.alpha.single_mode.k");
          const auto& v = s.at("value");
          if (!v.is_array() || v.size() != 2) throw ConfigError("initial.alpha.single_mode.value must be [re, im]");
          c.initial.value = cplx(v[0].get<double>(), v[1].get<double>());
        }
      }
    }
  }

  if (j.contains("theorem2")) {
    const auto& t = j.at("theorem2");
    check_keys(t, {"deltas"}, "theorem2");
    read(t, "deltas", c.deltas, "theorem2");
  }
  if (j.contains("convergence")) {
    const auto& t = j.at("convergence");
    check_keys(t, {"time_steps", "fock"}, "convergence");
    read(t, "time_steps", c.time_steps, "convergence");
    read(t, "fock", c.convergence_fock, "convergence");
  }
  if (j.contains("scan")) {
    const auto& s = j.at("scan");
    check_keys(s, {"k_list"}, "scan");
    if (s.contains("k_list")) {
      std::vector<LatticeVector> ks;
      for (const auto& k : s.at("k_list")) ks.push_back(lattice_from_json(k, "scan.k_list"));
      c.k_list = ks;
    }
  }
  if (j.contains("fock")) {
    const auto& f = j.at("fock");
    const std::string w = "fock";
    check_keys(f, {"budget", "truncation_threshold", "tolerance", "krylov_dim", "method", "bound_trials"}, w);
    read(f, "budget", c.fock.budget, w);
    read(f, "truncation_threshold", c.fock.truncation_threshold, w);
    read(f, "tolerance", c.fock.tolerance, w);
    read(f, "krylov_dim", c.fock.krylov_dim, w);
    read(f, "method", c.fock.method, w);
    read(f, "bound_trials", c.fock.bound_trials, w);
    if (c.fock.method != "auto" && c.fock.method != "krylov" && c.fock.method != "dense")
      throw ConfigError("fock.method must be auto, krylov or dense");
  }
  return c;
}

nlohmann::ordered_json config_to_json(const ExperimentConfig& c) {
  nlohmann::ordered_json j;
  j["experiment"] = experiment_name(c.experiment);
  j["params"] = params_to_json(c.params);

  nlohmann::ordered_json in;
  if (c.initial.orbitals == InitialSpec::Orbitals::FermiBall)
    in["orbitals"] = "fermi-ball";
  else
    in["orbitals"] = {{"file", c.initial.orbitals_file}};
  switch (c.initial.alpha) {
  case InitialSpec::Alpha::Zero: in["alpha"] = "zero"; break;
  case InitialSpec::Alpha::File: in["alpha"] = {{"file", c.initial.alpha_file}}; break;
  case InitialSpec::Alpha::SingleMode:
    in["alpha"]["single_mode"]["k"] = lattice_to_json(c.initial.mode);
    in["alpha"]["single_mode"]["value"] = {c.initial.value.real(), c.initial.value.imag()};
    break;
  }
  j["initial"] = in;
  j["t_final"] = c.t_final;
  j["sample_interval"] = c.sample_interval;
  j["output_dir"] = c.output_dir;
  j["seed"] = c.seed;
  j["checkpoint"] = c.checkpoint;
  j["theorem2"]["deltas"] = c.deltas;
  j["convergence"]["time_steps"] = c.time_steps;
  j["convergence"]["fock"] = c.convergence_fock;
  if (c.k_list) {
    j["scan"]["k_list"] = nlohmann::ordered_json::array();
    for (const auto& k : *c.k_list) j["scan"]["k_list"].push_back(lattice_to_json(k));
  }
  j["fock"]["budget"] = c.fock.budget;
  j["fock"]["truncation_threshold"] = c.fock.truncation_threshold;
  j["fock"]["tolerance"] = c.fock.tolerance;
  j["fock"]["krylov_dim"] = c.fock.krylov_dim;
  j["fock"]["method"] = c.fock.method;
  j["fock"]["bound_trials"] = c.fock.bound_trials;
  return j;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  try {
    return config_from_json(j, std::filesystem::path(path).parent_path().string());
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::string config_hash(const ExperimentConfig& c) {
  const std::string text = config_to_json(c).dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

} // namespace nelson
