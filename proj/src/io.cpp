#include "gbqf/io.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>

#include "gbqf/control.hpp"
#include "gbqf/errors.hpp"
#include "gbqf/experiments.hpp"
#include "gbqf/nbody.hpp"
#include "gbqf/noise.hpp"
#include "gbqf/threads.hpp"

namespace gbqf {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void config_fail(const std::string& msg) {
  throw Error(ErrorCode::ConfigError, msg);
}

void check_keys(const json& j, const char* section,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object()) {
    config_fail(std::string(section) + ": expected an object");
  }
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : allowed) {
      if (item.key() == k) {
        known = true;
        break;
      }
    }
    if (!known) {
      config_fail(std::string(section) + ": unknown key '" + item.key() + "'");
    }
  }
}

double number_at(const json& j, const std::string& what) {
  if (!j.is_number()) config_fail(what + " must be a number");
  return j.get<double>();
}

double get_double(const json& sec, const char* key, double fallback) {
  if (!sec.contains(key)) return fallback;
  return number_at(sec.at(key), key);
}

int get_int(const json& sec, const char* key, int fallback) {
  if (!sec.contains(key)) return fallback;
  const json& j = sec.at(key);
  if (!j.is_number_integer() && !j.is_number_unsigned()) {
    config_fail(std::string(key) + " must be an integer");
  }
  return j.get<int>();
}

bool get_bool(const json& sec, const char* key, bool fallback) {
  if (!sec.contains(key)) return fallback;
  const json& j = sec.at(key);
  if (!j.is_boolean()) config_fail(std::string(key) + " must be a boolean");
  return j.get<bool>();
}

std::uint64_t get_u64(const json& sec, const char* key,
                      std::uint64_t fallback) {
  if (!sec.contains(key)) return fallback;
  const json& j = sec.at(key);
  if (j.is_number_unsigned() || (j.is_number_integer() && j.get<long long>() >= 0)) {
    return j.get<std::uint64_t>();
  }
  if (j.is_string()) {
    try {
      return std::stoull(j.get<std::string>());
    } catch (const std::exception&) {
      config_fail(std::string(key) + ": cannot parse as unsigned integer");
    }
  }
  config_fail(std::string(key) + " must be a nonnegative integer");
}

std::vector<int> get_int_list(const json& sec, const char* key,
                              std::vector<int> fallback) {
  if (!sec.contains(key)) return fallback;
  const json& j = sec.at(key);
  if (!j.is_array() || j.empty()) {
    config_fail(std::string(key) + " must be a nonempty array");
  }
  std::vector<int> out;
  for (const auto& e : j) {
    if (!e.is_number_integer() && !e.is_number_unsigned()) {
      config_fail(std::string(key) + " must contain integers");
    }
    out.push_back(e.get<int>());
  }
  return out;
}

}  // namespace

std::string format_g17(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoError, "cannot open " + path);
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) f << ',';
    f << header[i];
  }
  f << '\n';
  for (const auto& row : rows) {
    if (row.size() != header.size()) {
      throw Error(ErrorCode::InvalidArgument,
                  "write_csv: row width does not match header");
    }
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) f << ',';
      f << format_g17(row[i]);
    }
    f << '\n';
  }
  f.flush();
  if (!f) throw Error(ErrorCode::IoError, "write failed: " + path);
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      row.push_back(json::array({m(r, c).real(), m(r, c).imag()}));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j) {
  if (!j.is_array() || j.empty()) {
    config_fail("matrix: expected a nonempty array of rows");
  }
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  if (!j[0].is_array() || j[0].empty()) {
    config_fail("matrix: rows must be nonempty arrays");
  }
  const Eigen::Index cols = static_cast<Eigen::Index>(j[0].size());
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() ||
        static_cast<Eigen::Index>(row.size()) != cols) {
      config_fail("matrix: ragged rows");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      const json& e = row[static_cast<std::size_t>(c)];
      if (e.is_number()) {
        m(r, c) = cxd(e.get<double>(), 0.0);
      } else if (e.is_array() && e.size() == 2 && e[0].is_number() &&
                 e[1].is_number()) {
        m(r, c) = cxd(e[0].get<double>(), e[1].get<double>());
      } else {
        config_fail("matrix: entries must be numbers or [re, im] pairs");
      }
    }
  }
  return m;
}

json real_matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd real_matrix_from_json(const json& j) {
  const Matrix m = matrix_from_json(j);
  if (m.imag().cwiseAbs().maxCoeff() != 0.0) {
    config_fail("matrix: expected real entries");
  }
  return m.real();
}

json step_kernel_to_json(const StepKernel& k) {
  return json{{"boundaries", k.boundaries},
              {"weights", real_matrix_to_json(k.weights)}};
}

StepKernel step_kernel_from_json(const json& j) {
  check_keys(j, "kernel", {"boundaries", "weights"});
  if (!j.contains("weights")) config_fail("kernel: 'weights' required");
  StepKernel k;
  k.weights = real_matrix_from_json(j.at("weights"));
  const int blocks = static_cast<int>(k.weights.rows());
  if (j.contains("boundaries")) {
    const json& b = j.at("boundaries");
    if (!b.is_array()) config_fail("kernel: boundaries must be an array");
    for (const auto& e : b) k.boundaries.push_back(number_at(e, "boundary"));
  } else {
    for (int i = 0; i <= blocks; ++i) {
      k.boundaries.push_back(static_cast<double>(i) / blocks);
    }
  }
  try {
    validate_step_kernel(k, true);
  } catch (const Error& e) {
    config_fail(std::string("kernel: ") + e.what());
  }
  return k;
}

Graphon graphon_from_json(const json& g) {
  check_keys(g, "graphon", {"kind", "value", "weights", "boundaries"});
  std::string kind = "product";
  if (g.contains("kind")) {
    if (!g.at("kind").is_string()) config_fail("graphon: kind must be a string");
    kind = g.at("kind").get<std::string>();
  }
  if (kind == "product") return Graphon::product();
  if (kind == "constant") {
    if (!g.contains("value")) config_fail("graphon: constant needs 'value'");
    return Graphon::constant(number_at(g.at("value"), "graphon value"));
  }
  if (kind == "block") {
    json k = json::object();
    if (g.contains("weights")) k["weights"] = g.at("weights");
    if (g.contains("boundaries")) k["boundaries"] = g.at("boundaries");
    return Graphon::block(step_kernel_from_json(k));
  }
  config_fail("graphon: unknown kind '" + kind + "'");
}

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = {
      "filter",    "nbody",   "meanfield", "chaos", "statered",
      "stateprep", "graphon", "cost",      "selftest"};
  return names;
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

namespace {

json defaults_for(const std::string& name) {
  json d = {
      {"model", json::object()},
      {"graphon", {{"kind", "product"}}},
      {"grid", {{"t0", 0.0}, {"t1", 1.0}, {"n_steps", 1000}, {"M", 32}}},
      {"ensemble", {{"replicas", 100}, {"seed", 1}, {"threads", 0}}},
      {"experiment", json::object()},
  };
  if (name == "filter") {
    d["ensemble"]["replicas"] = 50;
  } else if (name == "nbody") {
    d["ensemble"]["replicas"] = 1;
    d["experiment"] = {{"c", 1}, {"N", 2}, {"normalization", "full_sum"}};
  } else if (name == "meanfield") {
    d["experiment"] = {{"control", "zero"}};
  } else if (name == "chaos") {
    d["graphon"] = {{"kind", "block"}, {"weights", {{1.0, 0.5}, {0.5, 1.0}}}};
    d["ensemble"]["replicas"] = 50;
    d["experiment"] = {{"c", 2},
                       {"N_list", {1, 2, 3, 4}},
                       {"bernoulli", false},
                       {"assert_quality", true}};
  } else if (name == "statered") {
    d["grid"] = {{"t0", 0.0}, {"t1", 10.0}, {"n_steps", 2000}, {"M", 16}};
    d["ensemble"]["replicas"] = 200;
    d["experiment"] = {{"assert_quality", true}};
  } else if (name == "stateprep") {
    d["grid"] = {{"t0", 0.0}, {"t1", 10.0}, {"n_steps", 2000}, {"M", 16}};
    d["ensemble"]["replicas"] = 48;
    d["experiment"] = {{"assert_quality", true}};
  } else if (name == "graphon") {
    d["graphon"] = {{"kind", "block"}, {"weights", {{1.0, 0.5}, {0.5, 1.0}}}};
    d["experiment"] = {
        {"n_list", {4, 8, 12}}, {"samples", 5}, {"resolution", 16}};
  } else if (name == "cost") {
    d["grid"]["M"] = 8;
    d["experiment"] = {{"control", "state_prep"},
                       {"alpha_weight", 1.0},
                       {"fidelity_weight", 0.0},
                       {"coupling_weight", 0.0},
                       {"terminal_fidelity_weight", 1.0},
                       {"target", "ground"}};
  }
  return d;
}

RunConfig parse_config_merged(const std::string& name, const json& doc,
                              json* merged_out) {
  if (!doc.is_object() && !doc.is_null()) {
    config_fail("config: expected a JSON object");
  }
  json merged = defaults_for(name);
  if (doc.is_object()) {
    check_keys(doc, "config",
               {"model", "graphon", "grid", "ensemble", "experiment"});
    for (const auto& item : doc.items()) {
      json& dst = merged[item.key()];
      if (dst.is_object() && item.value().is_object()) {
        dst.update(item.value());
      } else {
        dst = item.value();
      }
    }
  }

  check_keys(merged["model"], "model", {"H_free", "H_ctrl", "L", "eta", "A"});
  check_keys(merged["grid"], "grid", {"t0", "t1", "T", "dt", "n_steps", "M"});
  check_keys(merged["ensemble"], "ensemble", {"replicas", "seed", "threads"});

  RunConfig cfg;
  const json& ms = merged["model"];
  try {
    cfg.model.L = ms.contains("L") ? matrix_from_json(ms.at("L")) : sigma_z();
    const int d = static_cast<int>(cfg.model.L.rows());
    cfg.model.H_free = ms.contains("H_free") ? matrix_from_json(ms.at("H_free"))
                                             : Matrix::Zero(d, d);
    if (ms.contains("H_ctrl")) {
      cfg.model.H_ctrl = matrix_from_json(ms.at("H_ctrl"));
    } else if (d == 2) {
      cfg.model.H_ctrl = state_prep_hamiltonian();
    } else {
      cfg.model.H_ctrl = Matrix::Zero(d, d);
    }
    cfg.model.eta = get_double(ms, "eta", 1.0);
    cfg.model.validate();
    if (ms.contains("A")) {
      cfg.A = matrix_from_json(ms.at("A"));
      if (cfg.A.rows() != d * d || cfg.A.cols() != d * d) {
        config_fail("model: A must be d^2 x d^2");
      }
      if (!is_hermitian(cfg.A)) config_fail("model: A must be Hermitian");
    } else if (d == 2) {
      cfg.A = two_level_coupling();
    } else {
      cfg.A = Matrix::Zero(d * d, d * d);
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError) throw;
    config_fail(std::string("model: ") + e.what());
  }

  cfg.w = graphon_from_json(merged["graphon"]);

  const json& gs = merged["grid"];
  const double t0 = get_double(gs, "t0", 0.0);
  double t1 = get_double(gs, "t1", 1.0);
  if (gs.contains("T")) t1 = number_at(gs.at("T"), "T");
  if (!(t1 > t0)) config_fail("grid: need t1 > t0");
  int n_steps = get_int(gs, "n_steps", 1000);
  if (gs.contains("dt")) {
    const double dt = number_at(gs.at("dt"), "dt");
    if (!(dt > 0)) config_fail("grid: dt must be positive");
    const double steps = (t1 - t0) / dt;
    n_steps = static_cast<int>(std::llround(steps));
    if (n_steps < 1 || std::abs(n_steps * dt - (t1 - t0)) > 1e-6 * (t1 - t0)) {
      config_fail("grid: dt must divide the horizon");
    }
  }
  if (n_steps < 1) config_fail("grid: n_steps must be >= 1");
  cfg.grid = TimeGrid{t0, t1, n_steps};
  cfg.ugrid = UGrid{get_int(gs, "M", 32)};
  try {
    cfg.grid.validate();
    cfg.ugrid.validate();
  } catch (const Error& e) {
    config_fail(std::string("grid: ") + e.what());
  }

  const json& es = merged["ensemble"];
  cfg.replicas = get_int(es, "replicas", 100);
  if (cfg.replicas < 1) config_fail("ensemble: replicas must be >= 1");
  cfg.seed = get_u64(es, "seed", 1);
  cfg.threads = get_int(es, "threads", 0);
  if (cfg.threads < 0) config_fail("ensemble: threads must be >= 0");

  cfg.experiment = merged["experiment"];
  if (!cfg.experiment.is_object()) {
    config_fail("experiment: expected an object");
  }

  if (merged_out) *merged_out = merged;
  return cfg;
}

void add_check(RunReport& rep, const std::string& name, bool pass,
               const std::string& detail) {
  rep.invariants.push_back({name, pass, detail});
  rep.ok = rep.ok && pass;
}

std::string joined(const fs::path& dir, const std::string& name) {
  return (dir / name).string();
}

Matrix initial_density(const RunConfig& cfg) {
  const int d = cfg.model.dim();
  if (cfg.experiment.contains("rho0")) {
    Matrix rho = matrix_from_json(cfg.experiment.at("rho0"));
    try {
      check_density(rho);
    } catch (const Error& e) {
      config_fail(std::string("rho0: ") + e.what());
    }
    return rho;
  }
  return Matrix::Identity(d, d) / static_cast<double>(d);
}

Vector initial_pure(const RunConfig& cfg) {
  const int d = cfg.model.dim();
  if (cfg.experiment.contains("phi0")) {
    const Matrix m = matrix_from_json(cfg.experiment.at("phi0"));
    if (m.cols() != 1 || m.rows() != d) {
      config_fail("phi0: expected a d x 1 column");
    }
    Vector v = m.col(0);
    const double n = v.norm();
    if (n < 1e-12) config_fail("phi0: zero vector");
    return v / n;
  }
  return Vector::Constant(d, cxd(1.0 / std::sqrt(static_cast<double>(d)), 0.0));
}

LabelControlLaw control_from_config(const json& ex) {
  const std::string kind =
      ex.contains("control") ? ex.at("control").get<std::string>() : "zero";
  const double bound = get_double(ex, "control_bound", kDefaultControlBound);
  if (kind == "zero") return LabelControlLaw::zero();
  if (kind == "state_prep") return LabelControlLaw::state_prep(bound);
  config_fail("experiment: unknown control '" + kind + "'");
}

void run_filter_driver(const RunConfig& cfg, const fs::path& out,
                       RunReport& rep) {
  const int d = cfg.model.dim();
  const Matrix rho0 = initial_density(cfg);
  ControlLaw law = nullptr;
  if (cfg.experiment.contains("control") &&
      cfg.experiment.at("control").get<std::string>() == "state_prep") {
    const double u = get_double(cfg.experiment, "control_label", 0.25);
    law = [u](double, const Matrix& rho) { return feedback_alpha(u, rho); };
  }

  const int n = cfg.grid.n_steps;
  const double obs_scale = std::sqrt(cfg.model.eta) * cfg.grid.dt();
  std::vector<double> mean_purity(n + 1, 0.0);
  double max_trace_err = 0.0;
  double max_obs_defect = 0.0;
  FilterResult first;
  for (int r = 0; r < cfg.replicas; ++r) {
    const NoisePath noise = generate_noise(1, cfg.grid, cfg.seed,
                                           static_cast<std::uint64_t>(r));
    FilterResult res = simulate_filter(cfg.model, rho0, cfg.grid, noise, law);
    for (int k = 0; k <= n; ++k) {
      mean_purity[k] += purity(res.traj.states[k]);
      max_trace_err = std::max(
          max_trace_err, std::abs(res.traj.states[k].trace().real() - 1.0));
    }
    for (int k = 0; k < n; ++k) {
      max_obs_defect =
          std::max(max_obs_defect,
                   std::abs(res.obs.dY(k) - res.obs.dW(k) -
                            obs_scale * res.obs.compensator(k)));
    }
    if (r == 0) first = std::move(res);
  }
  for (double& p : mean_purity) p /= cfg.replicas;

  std::vector<std::string> sh = {"t"};
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      sh.push_back("rho_" + std::to_string(i) + std::to_string(j) + "_re");
      sh.push_back("rho_" + std::to_string(i) + std::to_string(j) + "_im");
    }
  }
  std::vector<std::vector<double>> srows;
  for (int k = 0; k <= n; ++k) {
    std::vector<double> row = {cfg.grid.time(k)};
    const Matrix& m = first.traj.states[k];
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        row.push_back(m(i, j).real());
        row.push_back(m(i, j).imag());
      }
    }
    srows.push_back(std::move(row));
  }
  write_csv(joined(out, "path_states.csv"), sh, srows);
  rep.outputs.push_back("path_states.csv");

  std::vector<std::vector<double>> orows;
  for (int k = 0; k < n; ++k) {
    orows.push_back({cfg.grid.time(k), first.obs.dW(k), first.obs.dY(k),
                     first.obs.compensator(k), first.alpha[k]});
  }
  write_csv(joined(out, "path_observations.csv"),
            {"t", "dW", "dY", "compensator", "alpha"}, orows);
  rep.outputs.push_back("path_observations.csv");

  std::vector<std::vector<double>> prows;
  for (int k = 0; k <= n; ++k) {
    prows.push_back({cfg.grid.time(k), mean_purity[k]});
  }
  write_csv(joined(out, "ensemble_purity.csv"), {"t", "mean_purity"}, prows);
  rep.outputs.push_back("ensemble_purity.csv");

  add_check(rep, "trace_normalized", max_trace_err <= 1e-9,
            "max |tr(rho)-1| = " + format_g17(max_trace_err));
  add_check(rep, "observation_identity", max_obs_defect <= 1e-12,
            "max |dY - dW - compensator| = " + format_g17(max_obs_defect));
  char buf[160];
  std::snprintf(buf, sizeof(buf), "filter: %d paths, final mean purity %.6f",
                cfg.replicas, mean_purity.back());
  rep.summary = buf;
}

void run_nbody_driver(const RunConfig& cfg, const fs::path& out,
                      RunReport& rep) {
  const json& ex = cfg.experiment;
  BlockSystemConfig bcfg;
  bcfg.c = get_int(ex, "c", 1);
  bcfg.N = get_int(ex, "N", 2);
  bcfg.model = cfg.model;
  bcfg.A = cfg.A;
  const std::string norm = ex.contains("normalization")
                               ? ex.at("normalization").get<std::string>()
                               : "full_sum";
  if (norm == "full_sum") {
    bcfg.norm = InteractionNorm::FullSum_Over2cN;
  } else if (norm == "pair_sum") {
    bcfg.norm = InteractionNorm::PairSum_OverN;
  } else {
    config_fail("experiment: unknown normalization '" + norm + "'");
  }
  const int n = bcfg.c * bcfg.N;
  if (ex.contains("xi")) {
    bcfg.xi = real_matrix_from_json(ex.at("xi"));
  } else {
    bcfg.xi = deterministic_weights(cfg.w, n).xi;
  }
  try {
    bcfg.validate();
  } catch (const Error& e) {
    config_fail(std::string("nbody: ") + e.what());
  }

  const int d = cfg.model.dim();
  const Vector phi0 = initial_pure(cfg);
  Vector psi0 = phi0;
  for (int s = 1; s < n; ++s) {
    Vector next(psi0.size() * d);
    for (Eigen::Index a = 0; a < psi0.size(); ++a) {
      for (int b = 0; b < d; ++b) next(a * d + b) = psi0(a) * phi0(b);
    }
    psi0 = std::move(next);
  }

  const int steps = cfg.grid.n_steps;
  std::vector<std::vector<double>> mean_pur(
      steps + 1, std::vector<double>(n, 0.0));
  double max_norm_err = 0.0;
  for (int r = 0; r < cfg.replicas; ++r) {
    const NoisePath noise = generate_noise(n, cfg.grid, cfg.seed,
                                           static_cast<std::uint64_t>(r));
    Trajectory<Vector> traj = simulate_nbody_sse(bcfg, psi0, cfg.grid, noise);
    max_norm_err = std::max(max_norm_err,
                            std::abs(traj.states.back().norm() - 1.0));
    for (int k = 0; k <= steps; ++k) {
      int slot = 0;
      for (int i = 1; i <= bcfg.c; ++i) {
        for (int l = 1; l <= bcfg.N; ++l, ++slot) {
          mean_pur[k][slot] +=
              purity(marginal(traj.states[k], bcfg.c, bcfg.N, d, i, l));
        }
      }
    }
  }
  std::vector<std::string> header = {"t"};
  for (int i = 1; i <= bcfg.c; ++i) {
    for (int l = 1; l <= bcfg.N; ++l) {
      header.push_back("purity_" + std::to_string(i) + "_" +
                       std::to_string(l));
    }
  }
  std::vector<std::vector<double>> rows;
  for (int k = 0; k <= steps; ++k) {
    std::vector<double> row = {cfg.grid.time(k)};
    for (int s = 0; s < n; ++s) row.push_back(mean_pur[k][s] / cfg.replicas);
    rows.push_back(std::move(row));
  }
  write_csv(joined(out, "marginal_purity.csv"), header, rows);
  rep.outputs.push_back("marginal_purity.csv");

  add_check(rep, "unit_norm", max_norm_err <= 1e-12,
            "max | ||psi_T|| - 1 | = " + format_g17(max_norm_err));
  double final_mean = 0.0;
  for (int s = 0; s < n; ++s) final_mean += rows.back()[s + 1];
  final_mean /= n;
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "nbody: c=%d N=%d, final mean marginal purity %.6f", bcfg.c,
                bcfg.N, final_mean);
  rep.summary = buf;
}

void run_meanfield_driver(const RunConfig& cfg, const fs::path& out,
                          RunReport& rep) {
  const int d = cfg.model.dim();
  const Matrix rho0 = initial_density(cfg);
  const LabelControlLaw law = control_from_config(cfg.experiment);
  const std::vector<Matrix> rho0s(1, rho0);
  const MeanFieldPath mean = solve_graphon_lindblad(
      cfg.model, cfg.A, cfg.w, cfg.ugrid, cfg.grid, rho0s, law);

  const int n = cfg.grid.n_steps;
  const int stride =
      get_int(cfg.experiment, "stride", std::max(1, n / 200));
  if (stride < 1) config_fail("experiment: stride must be >= 1");

  std::vector<std::string> header = {"t", "u"};
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      header.push_back("m_" + std::to_string(i) + std::to_string(j) + "_re");
      header.push_back("m_" + std::to_string(i) + std::to_string(j) + "_im");
    }
  }
  std::vector<std::vector<double>> rows;
  double max_trace_err = 0.0;
  for (int k = 0; k <= n; k += stride) {
    const int kk = std::min(k, n);
    for (int m = 0; m < cfg.ugrid.M; ++m) {
      const Matrix& s = mean.at(kk, m);
      max_trace_err =
          std::max(max_trace_err, std::abs(s.trace().real() - 1.0));
      std::vector<double> row = {cfg.grid.time(kk), cfg.ugrid.label(m)};
      for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
          row.push_back(s(i, j).real());
          row.push_back(s(i, j).imag());
        }
      }
      rows.push_back(std::move(row));
    }
  }
  if ((n % stride) != 0) {
    for (int m = 0; m < cfg.ugrid.M; ++m) {
      const Matrix& s = mean.at(n, m);
      std::vector<double> row = {cfg.grid.time(n), cfg.ugrid.label(m)};
      for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
          row.push_back(s(i, j).real());
          row.push_back(s(i, j).imag());
        }
      }
      rows.push_back(std::move(row));
    }
  }
  write_csv(joined(out, "meanfield.csv"), header, rows);
  rep.outputs.push_back("meanfield.csv");

  double final_purity = 0.0;
  for (int m = 0; m < cfg.ugrid.M; ++m) final_purity += purity(mean.at(n, m));
  final_purity /= cfg.ugrid.M;

  add_check(rep, "trace_normalized", max_trace_err <= 1e-9,
            "max |tr(m)-1| = " + format_g17(max_trace_err));
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "meanfield: M=%d labels, final mean purity %.6f", cfg.ugrid.M,
                final_purity);
  rep.summary = buf;
}

void run_chaos_driver(const RunConfig& cfg, const fs::path& out,
                      RunReport& rep) {
  if (cfg.w.kind() != Graphon::Kind::Block) {
    config_fail("chaos: requires a block graphon");
  }
  const json& ex = cfg.experiment;
  const int c = get_int(ex, "c", 2);
  const std::vector<int> N_list = get_int_list(ex, "N_list", {1, 2, 3, 4});
  const bool bernoulli = get_bool(ex, "bernoulli", false);
  const bool quality = get_bool(ex, "assert_quality", true);
  const Vector phi0 = initial_pure(cfg);

  const ChaosSweepResult res =
      chaos_sweep(c, N_list, cfg.model, cfg.A, cfg.w.step(), cfg.grid, phi0,
                  cfg.replicas, cfg.seed, bernoulli, cfg.threads);

  std::vector<std::vector<double>> rows;
  for (const ChaosPoint& p : res.points) {
    rows.push_back({static_cast<double>(p.N), p.mean_D_T, p.std_err_T,
                    p.mean_D_0, p.cut_term, p.cut_exact ? 1.0 : 0.0,
                    p.bound_x});
  }
  write_csv(joined(out, "chaos.csv"),
            {"N", "mean_D_T", "std_err_T", "mean_D_0", "cut_term", "cut_exact",
             "bound_x"},
            rows);
  rep.outputs.push_back("chaos.csv");

  double max_d0 = 0.0;
  for (const ChaosPoint& p : res.points) max_d0 = std::max(max_d0, p.mean_D_0);
  add_check(rep, "product_start_defect_zero", max_d0 <= 1e-10,
            "max E[D(0)] = " + format_g17(max_d0));
  if (quality) {
    bool mono = true;
    std::string detail;
    for (std::size_t j = 0; j + 1 < res.points.size(); ++j) {
      const ChaosPoint& a = res.points[j];
      const ChaosPoint& b = res.points[j + 1];
      const double slack =
          2.0 * std::sqrt(a.std_err_T * a.std_err_T +
                          b.std_err_T * b.std_err_T);
      if (b.mean_D_T > a.mean_D_T + slack) {
        mono = false;
        detail = "N=" + std::to_string(b.N) + " exceeds N=" +
                 std::to_string(a.N) + " beyond two pooled standard errors";
      }
    }
    add_check(rep, "defect_nonincreasing", mono,
              mono ? "within two pooled standard errors" : detail);
  }
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "chaos: fitted slope %.3f, fitted C %.4g, E[D(T)] at N=%d: %.4g",
                res.fitted_slope, res.fitted_C, res.points.back().N,
                res.points.back().mean_D_T);
  rep.summary = buf;
}

void run_statered_driver(const RunConfig& cfg, const fs::path& out,
                         RunReport& rep) {
  const bool quality = get_bool(cfg.experiment, "assert_quality", true);
  const StateReductionResult res =
      state_reduction(cfg.ugrid, cfg.grid, cfg.replicas, cfg.seed, cfg.threads);

  std::vector<std::vector<double>> rows;
  for (int k = 0; k <= cfg.grid.n_steps; ++k) {
    rows.push_back({cfg.grid.time(k), res.mean_V[k], res.se_V[k],
                    res.mean_Vsq[k], res.identity_residual[k],
                    res.se_identity[k]});
  }
  write_csv(joined(out, "lyapunov.csv"),
            {"t", "mean_V", "se_V", "mean_Vsq", "identity_residual",
             "se_identity"},
            rows);
  rep.outputs.push_back("lyapunov.csv");

  std::vector<std::vector<double>> vrows;
  for (std::size_t r = 0; r < res.v_final.size(); ++r) {
    vrows.push_back({static_cast<double>(r), res.v_final[r]});
  }
  write_csv(joined(out, "v_final.csv"), {"replica", "V_T"}, vrows);
  rep.outputs.push_back("v_final.csv");

  double worst = 0.0;
  bool identity_ok = true;
  for (int k = 0; k <= cfg.grid.n_steps; ++k) {
    const double margin = 3.0 * res.se_identity[k] + 0.05;
    worst = std::max(worst, res.identity_residual[k] - margin);
    if (res.identity_residual[k] > margin) identity_ok = false;
  }
  add_check(rep, "drift_identity", identity_ok,
            "max residual excess over 3*SE + 0.05 = " + format_g17(worst));
  if (quality) {
    add_check(rep, "terminal_reduction", res.mean_V.back() < 0.05,
              "E[V_T] = " + format_g17(res.mean_V.back()));
  }
  char buf[160];
  std::snprintf(buf, sizeof(buf), "statered: E[V_T] = %.5f (se %.5f)",
                res.mean_V.back(), res.se_V.back());
  rep.summary = buf;
}

void run_stateprep_driver(const RunConfig& cfg, const fs::path& out,
                          RunReport& rep) {
  const bool quality = get_bool(cfg.experiment, "assert_quality", true);
  const StatePreparationResult res = state_preparation(
      cfg.ugrid, cfg.grid, cfg.replicas, cfg.seed, cfg.threads);

  std::vector<std::vector<double>> rows;
  for (int k = 0; k <= cfg.grid.n_steps; ++k) {
    rows.push_back({cfg.grid.time(k), res.lower_set_curve[k],
                    res.upper_set_curve[k]});
  }
  write_csv(joined(out, "fidelity_sets.csv"),
            {"t", "lower_set_mean_fidelity", "upper_set_mean_fidelity"}, rows);
  rep.outputs.push_back("fidelity_sets.csv");

  std::vector<std::string> header = {"t"};
  for (int m = 0; m < cfg.ugrid.M; ++m) {
    header.push_back("fidelity_m" + std::to_string(m));
  }
  std::vector<std::vector<double>> lrows;
  for (int k = 0; k <= cfg.grid.n_steps; ++k) {
    std::vector<double> row = {cfg.grid.time(k)};
    for (int m = 0; m < cfg.ugrid.M; ++m) row.push_back(res.mean_fidelity[k][m]);
    lrows.push_back(std::move(row));
  }
  write_csv(joined(out, "fidelity_labels.csv"), header, lrows);
  rep.outputs.push_back("fidelity_labels.csv");

  const double a_low = std::abs(feedback_alpha(0.25, rho_ground()));
  const double a_high = std::abs(feedback_alpha(0.75, rho_excited()));
  add_check(rep, "feedback_vanishes_on_target",
            a_low <= 1e-12 && a_high <= 1e-12,
            "|alpha| at targets: " + format_g17(a_low) + ", " +
                format_g17(a_high));
  if (quality) {
    add_check(rep, "lower_set_prepared", res.lower_set_final >= 0.9,
              "final fidelity " + format_g17(res.lower_set_final));
    add_check(rep, "upper_set_avoided", res.upper_set_final <= 0.1,
              "final fidelity " + format_g17(res.upper_set_final));
  }
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "stateprep: lower-set fidelity %.4f, upper-set %.4f, "
                "%ld control clips",
                res.lower_set_final, res.upper_set_final, res.clip_events);
  rep.summary = buf;
}

void run_graphon_driver(const RunConfig& cfg, const fs::path& out,
                        RunReport& rep) {
  const json& ex = cfg.experiment;
  const int resolution = get_int(ex, "resolution", 16);
  if (resolution < 1) config_fail("experiment: resolution must be >= 1");
  const StepKernel kernel = cfg.w.kind() == Graphon::Kind::Block
                                ? cfg.w.step()
                                : cfg.w.discretize(resolution);
  const double l1 = l1_norm(kernel);
  const NormResult cut = cut_norm(kernel, kNormExactCap, true, cfg.seed);
  const NormResult op = op_norm(kernel, kNormExactCap, true, cfg.seed);
  write_csv(joined(out, "norms.csv"),
            {"l1", "cut", "cut_exact", "op", "op_exact"},
            {{l1, cut.value, cut.approximate ? 0.0 : 1.0, op.value,
              op.approximate ? 0.0 : 1.0}});
  rep.outputs.push_back("norms.csv");

  if (!cut.approximate && !op.approximate) {
    const bool ok =
        cut.value <= op.value + 1e-9 && op.value <= 4.0 * cut.value + 1e-9;
    add_check(rep, "norm_sandwich", ok,
              "cut = " + format_g17(cut.value) + ", op = " +
                  format_g17(op.value));
  } else {
    add_check(rep, "norm_sandwich", true,
              "approximate norms, sandwich not enforced");
  }

  const std::vector<int> n_list = get_int_list(ex, "n_list", {4, 8, 12});
  const int samples = get_int(ex, "samples", 5);
  if (samples < 1) config_fail("experiment: samples must be >= 1");
  const auto table =
      graphon_convergence_table(cfg.w, n_list, samples, cfg.seed);
  std::vector<std::vector<double>> rows;
  for (const auto& p : table) {
    rows.push_back({static_cast<double>(p.n), p.mean_distance, p.std_err,
                    p.exact ? 1.0 : 0.0});
  }
  write_csv(joined(out, "convergence.csv"),
            {"n", "mean_distance", "std_err", "exact"}, rows);
  rep.outputs.push_back("convergence.csv");

  bool finite = true;
  for (const auto& p : table) finite = finite && std::isfinite(p.mean_distance);
  add_check(rep, "distances_finite", finite, "");
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "graphon: cut norm %.6f, sampled distance at n=%d: %.4f",
                cut.value, table.back().n, table.back().mean_distance);
  rep.summary = buf;
}

void run_cost_driver(const RunConfig& cfg, const fs::path& out,
                     RunReport& rep) {
  const json& ex = cfg.experiment;
  const LabelControlLaw law = control_from_config(ex);
  const double wa = get_double(ex, "alpha_weight", 1.0);
  const double wf = get_double(ex, "fidelity_weight", 0.0);
  const double wc = get_double(ex, "coupling_weight", 0.0);
  const double wt = get_double(ex, "terminal_fidelity_weight", 1.0);
  Matrix target = rho_ground();
  if (ex.contains("target")) {
    const json& t = ex.at("target");
    if (t.is_string()) {
      const std::string s = t.get<std::string>();
      if (s == "ground") {
        target = rho_ground();
      } else if (s == "excited") {
        target = rho_excited();
      } else {
        config_fail("experiment: unknown target '" + s + "'");
      }
    } else {
      target = matrix_from_json(t);
    }
  }
  if (target.rows() != cfg.model.dim()) {
    config_fail("experiment: target dimension mismatch");
  }

  const RunningCost running = [=](double alpha, const Matrix& rho,
                                  const Matrix& mean) {
    return wa * alpha * alpha + wf * (1.0 - fidelity(target, rho)) +
           wc * hs_inner(mean, rho).real();
  };
  const TerminalCost terminal = [=](const Matrix& rho, const Matrix&) {
    return wt * (1.0 - fidelity(target, rho));
  };
  const std::vector<Matrix> rho0s(1, initial_density(cfg));
  const CostResult res =
      cost_eval(cfg.model, cfg.A, cfg.w, law, running, terminal, cfg.ugrid,
                cfg.grid, rho0s, cfg.replicas, cfg.seed, cfg.threads);

  std::vector<std::vector<double>> rows;
  double mean_J = 0.0;
  bool finite = true;
  for (std::size_t m = 0; m < res.labels.size(); ++m) {
    rows.push_back({res.labels[m], res.J[m], res.se[m]});
    mean_J += res.J[m];
    finite = finite && std::isfinite(res.J[m]);
  }
  mean_J /= static_cast<double>(res.labels.size());
  write_csv(joined(out, "cost.csv"), {"u", "J", "se"}, rows);
  rep.outputs.push_back("cost.csv");

  add_check(rep, "cost_finite", finite, "");
  char buf[160];
  std::snprintf(buf, sizeof(buf), "cost: mean J over labels = %.6f", mean_J);
  rep.summary = buf;
}

using Driver =
    std::function<void(const RunConfig&, const fs::path&, RunReport&)>;

Driver driver_for(const std::string& name) {
  if (name == "filter") return run_filter_driver;
  if (name == "nbody") return run_nbody_driver;
  if (name == "meanfield") return run_meanfield_driver;
  if (name == "chaos") return run_chaos_driver;
  if (name == "statered") return run_statered_driver;
  if (name == "stateprep") return run_stateprep_driver;
  if (name == "graphon") return run_graphon_driver;
  if (name == "cost") return run_cost_driver;
  return nullptr;
}

}  // namespace

RunConfig parse_config(const std::string& experiment_name, const json& doc) {
  return parse_config_merged(experiment_name, doc, nullptr);
}

RunReport run_selftest() {
  RunReport rep;
  const auto close = [](const Matrix& a, const Matrix& b, double tol) {
    return hs_norm(a - b) <= tol;
  };

  {
    Matrix expect(2, 2);
    expect << 0, 2, 2, 0;
    add_check(rep, "commutator_xz",
              close(commutator(sigma_x(), sigma_z()), expect, 1e-14), "");
  }
  {
    Vector bell(4);
    bell << 1, 0, 0, 1;
    bell /= std::sqrt(2.0);
    const Matrix red = partial_trace(bell, 1, 2, 2);
    add_check(rep, "bell_marginal",
              close(red, Matrix::Identity(2, 2) / 2.0, 1e-14), "");
  }
  {
    Matrix rho(2, 2);
    rho << cxd(0.7, 0.0), cxd(0.1, 0.2), cxd(0.1, -0.2), cxd(0.3, 0.0);
    const Matrix got = mean_field_contract(kron(sigma_z(), sigma_z()), rho);
    add_check(rep, "coupling_contraction",
              close(got, bloch_z(rho) * sigma_z(), 1e-12), "");
  }
  {
    const TimeGrid g{0.0, 1.0, 4000};
    const NoisePath p = generate_noise(1, g, 12345, 0);
    const double sum = p.increments.col(0).sum();
    const double sumsq = p.increments.col(0).squaredNorm();
    add_check(rep, "noise_moments",
              std::abs(sum) <= 5.0 && std::abs(sumsq - 1.0) <= 0.12,
              "sum = " + format_g17(sum) + ", sumsq = " + format_g17(sumsq));
    const NoisePath c2 = coarsen(p, 2);
    const double dev =
        std::abs(c2.increments.col(0).sum() - p.increments.col(0).sum());
    add_check(rep, "coarsen_total", dev <= 1e-12, "");
  }
  {
    const NormResult cut = cut_norm(StepKernel::constant(0.5));
    add_check(rep, "constant_cut_norm",
              !cut.approximate && std::abs(cut.value - 0.5) <= 1e-12, "");
  }
  {
    const double a0 = std::abs(feedback_alpha(0.25, rho_ground()));
    const double a1 = feedback_alpha(0.25, rho_excited());
    add_check(rep, "feedback_fixed_points",
              a0 <= 1e-12 && std::abs(a1 - 5.0) <= 1e-12,
              "alpha(ground) = " + format_g17(a0) +
                  ", alpha(excited) = " + format_g17(a1));
  }
  {
    Vector plus(2);
    plus << 1, 1;
    plus /= std::sqrt(2.0);
    const std::vector<Matrix> gammas = {plus * plus.adjoint()};
    Matrix sum = Matrix::Zero(4, 4);
    for (int k = 0; k <= 2; ++k) sum += counting_projector(1, 2, 1, k, gammas);
    add_check(rep, "counting_resolution",
              close(sum, Matrix::Identity(4, 4), 1e-10), "");
  }
  {
    FilterModel model = two_level_model();
    const TimeGrid g{0.0, 0.2, 100};
    const NoisePath noise = generate_noise(1, g, 7, 0);
    const FilterResult res = simulate_filter(
        model, Matrix::Identity(2, 2) / 2.0, g, noise, nullptr);
    const double tr_err =
        std::abs(res.traj.states.back().trace().real() - 1.0);
    add_check(rep, "filter_trace", tr_err <= 1e-12, "");
    add_check(rep, "filter_purifies",
              purity(res.traj.states.back()) >= 0.5 - 1e-12, "");
    const double scale = std::sqrt(model.eta) * g.dt();
    double dev = 0.0;
    for (int k = 0; k < g.n_steps; ++k) {
      dev = std::max(dev, std::abs(res.obs.dY(k) - res.obs.dW(k) -
                                   scale * res.obs.compensator(k)));
    }
    add_check(rep, "observation_identity", dev <= 1e-12, "");
  }

  int passed = 0;
  for (const auto& c : rep.invariants) passed += c.pass ? 1 : 0;
  rep.summary = "selftest: " + std::to_string(passed) + "/" +
                std::to_string(rep.invariants.size()) + " checks passed";
  return rep;
}

RunReport run_experiment(const std::string& name, const json& config,
                         const std::string& out_dir) {
  bool known = false;
  for (const std::string& n : experiment_names()) known = known || n == name;
  if (!known) config_fail("unknown experiment '" + name + "'");
  if (out_dir.empty()) config_fail("output directory required");

  json merged;
  RunConfig cfg = parse_config_merged(name, config, &merged);

  const fs::path out(out_dir);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + out_dir);
  {
    std::ofstream marker(out / ".incomplete", std::ios::binary);
    if (!marker) throw Error(ErrorCode::IoError, "cannot write marker file");
    marker << "run in progress\n";
  }

  const auto t_start = std::chrono::steady_clock::now();
  RunReport rep;
  try {
    if (name == "selftest") {
      rep = run_selftest();
    } else {
      driver_for(name)(cfg, out, rep);
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError) throw;
    add_check(rep, "run_completed", false,
              std::string(error_code_name(e.code())) + ": " + e.what());
  } catch (const std::exception& e) {
    add_check(rep, "run_completed", false, e.what());
  }
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  if (rep.summary.empty()) rep.summary = name + ": did not complete";

  json inv = json::array();
  for (const auto& c : rep.invariants) {
    inv.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
  }
  const json manifest = {
      {"experiment", name},
      {"library_version", kLibraryVersion},
      {"seed", cfg.seed},
      {"threads", resolve_thread_count(cfg.threads)},
      {"config", merged},
      {"config_hash", fnv1a_hex(merged.dump())},
      {"wall_clock_seconds", wall},
      {"ok", rep.ok},
      {"summary", rep.summary},
      {"invariants", inv},
      {"outputs", rep.outputs},
  };
  {
    std::ofstream f(out / "manifest.json", std::ios::binary);
    if (!f) throw Error(ErrorCode::IoError, "cannot write manifest");
    f << manifest.dump(2) << '\n';
    f.flush();
    if (!f) throw Error(ErrorCode::IoError, "manifest write failed");
  }
  fs::remove(out / ".incomplete", ec);
  return rep;
}

}  // namespace gbqf
