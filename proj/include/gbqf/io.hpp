#pragma once

// Configuration loading, deterministic CSV/JSON persistence, and the
// experiment run drivers shared by the C ABI and the command-line tool.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "gbqf/filter.hpp"
#include "gbqf/graphon.hpp"
#include "gbqf/meanfield.hpp"
#include "gbqf/qla.hpp"

namespace gbqf {

inline constexpr const char* kLibraryVersion = "0.1.0";

// Deterministic numeric formatting: 17 significant digits, '.' decimal.
std::string format_g17(double v);

// Comma-separated, LF line endings, written in binary mode so re-runs are
// bit-identical across platforms.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

// Complex matrices serialize as nested [re, im] pairs; bare numbers are
// accepted on input as purely real entries.
nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);
nlohmann::json real_matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd real_matrix_from_json(const nlohmann::json& j);

nlohmann::json step_kernel_to_json(const StepKernel& k);
StepKernel step_kernel_from_json(const nlohmann::json& j);
Graphon graphon_from_json(const nlohmann::json& j);

// Parsed configuration: sections model, graphon, grid, ensemble, experiment.
struct RunConfig {
  FilterModel model;
  Matrix A;
  Graphon w = Graphon::product();
  TimeGrid grid;
  UGrid ugrid;
  int replicas = 100;
  std::uint64_t seed = 1;
  int threads = 0;
  nlohmann::json experiment;
};

// Experiment-specific defaults overlaid with the supplied document.  Throws
// Error(ConfigError) on malformed input.
RunConfig parse_config(const std::string& experiment_name,
                       const nlohmann::json& doc);

struct InvariantCheck {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct RunReport {
  bool ok = true;
  std::string summary;
  std::vector<InvariantCheck> invariants;
  std::vector<std::string> outputs;  // paths relative to the run directory
};

// Runs one named experiment: creates out_dir, drops an `.incomplete`
// marker, writes result tables, then the manifest, then removes the marker.
// Configuration problems throw Error(ConfigError); in-run assertion
// failures return ok = false.
RunReport run_experiment(const std::string& name, const nlohmann::json& config,
                         const std::string& out_dir);

// Fast oracle battery; writes nothing.
RunReport run_selftest();

const std::vector<std::string>& experiment_names();

std::string fnv1a_hex(const std::string& bytes);

}  // namespace gbqf
