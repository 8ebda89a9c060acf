#pragma once

#include "nelson/skg.hpp"

#include <cstdio>
#include <string>
#include <vector>

namespace nelson {

/// Plain CSV writer; numbers are printed with %.17g so reruns are byte-identical.
class CsvWriter {
public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header);
  ~CsvWriter();
  CsvWriter(const CsvWriter&) = delete;
  CsvWriter& operator=(const CsvWriter&) = delete;

  void row(const std::vector<double>& values);
  void close();
  [[nodiscard]] const std::string& path() const { return path_; }

private:
  std::string path_;
  std::FILE* file_ = nullptr;
  std::size_t columns_;
};

/// Columns: time, gram_deviation, alpha_norm, alpha_bound, energy_drift, secondorder_residual.
void write_step_reports(const std::string& path, const std::vector<StepReport>& reports);

/// Binary trajectory: one record per sample (time, orbitals one after another in grid
/// order as re/im pairs, alpha in mode order as re/im pairs), little-endian doubles.
/// The sidecar `path + ".json"` holds the model parameters and the record layout.
void write_trajectory(const std::string& path, const Model& model, const std::vector<SkgState>& samples);
std::vector<SkgState> read_trajectory(const std::string& path, const Model& model);

/// Text orbital file: one line per grid point with re/im pairs for each orbital,
/// comma or whitespace separated; '#' starts a comment line.
OrbitalSet read_orbital_file(const std::string& path, const Model& model);
/// Text alpha file: one line per retained mode with re and im.
FieldAmplitude read_alpha_file(const std::string& path, const Model& model);
void write_orbital_file(const std::string& path, const OrbitalSet& orbitals);
void write_alpha_file(const std::string& path, const FieldAmplitude& alpha);

} // namespace nelson
