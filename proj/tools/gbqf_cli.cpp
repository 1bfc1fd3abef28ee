// Command-line front end; talks to the library through the C interface only.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "gbqf/capi.h"

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitAssertion = 1;
constexpr int kExitConfig = 2;

const char* describe(const std::string& name) {
  if (name == "filter") return "single-particle filtering ensemble";
  if (name == "nbody") return "tensorized many-body run";
  if (name == "meanfield") return "graphon mean-field solve";
  if (name == "chaos") return "propagation-of-chaos sweep";
  if (name == "statered") return "uncontrolled state reduction run";
  if (name == "stateprep") return "feedback state preparation run";
  if (name == "graphon") return "kernel norms and sampled-graph convergence";
  if (name == "cost") return "per-label control cost estimate";
  if (name == "selftest") return "fast oracle battery";
  return "";
}

int report_and_exit_code(int status, gbqf_result* res) {
  int code = kExitOk;
  if (res) {
    const int n = gbqf_result_check_count(res);
    for (int i = 0; i < n; ++i) {
      std::fprintf(stdout, "[%s] %s\n",
                   gbqf_result_check_pass(res, i) ? "pass" : "FAIL",
                   gbqf_result_check_name(res, i));
    }
    std::fprintf(stdout, "%s\n", gbqf_result_summary(res));
  }
  if (status == GBQF_ERR_CONFIG || status == GBQF_ERR_IO ||
      status == GBQF_ERR_INVALID_ARGUMENT) {
    code = kExitConfig;
  } else if (status != GBQF_OK) {
    code = kExitAssertion;
  } else if (!res || !gbqf_result_ok(res)) {
    code = kExitAssertion;
  }
  if (code != kExitOk && res && gbqf_result_error(res)[0] != '\0') {
    std::fprintf(stderr, "error: %s\n", gbqf_result_error(res));
  }
  if (res) gbqf_result_free(res);
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{std::string("gbqf ") + gbqf_version() +
               ": graphon-coupled quantum filtering simulations"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  int threads = 0;
  double dt = 0.0;
  double horizon = 0.0;

  int name_count = 0;
  const char* const* names = gbqf_experiment_names(&name_count);
  for (int i = 0; i < name_count; ++i) {
    const std::string name = names[i];
    CLI::App* sub = app.add_subcommand(name, describe(name));
    sub->add_option("--config", config_path, "JSON configuration file");
    CLI::Option* out = sub->add_option("--out", out_dir, "output directory");
    if (name != "selftest") out->required();
    sub->add_option("--seed", seed, "master seed override");
    sub->add_option("--threads", threads, "worker thread override");
    sub->add_option("--dt", dt, "time step override");
    sub->add_option("--T", horizon, "horizon override");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();

  json doc = json::object();
  if (!config_path.empty()) {
    std::ifstream f(config_path, std::ios::binary);
    if (!f) {
      std::fprintf(stderr, "error: cannot read %s\n", config_path.c_str());
      return kExitConfig;
    }
    std::ostringstream buf;
    buf << f.rdbuf();
    doc = json::parse(buf.str(), nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
      std::fprintf(stderr, "error: %s is not a JSON object\n",
                   config_path.c_str());
      return kExitConfig;
    }
  }
  try {
    if (sub->count("--seed")) doc["ensemble"]["seed"] = seed;
    if (sub->count("--threads")) doc["ensemble"]["threads"] = threads;
    if (sub->count("--dt")) doc["grid"]["dt"] = dt;
    if (sub->count("--T")) doc["grid"]["T"] = horizon;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  }

  gbqf_result* res = nullptr;
  int status = GBQF_OK;
  if (name == "selftest" && out_dir.empty()) {
    status = gbqf_selftest(&res);
  } else {
    status = gbqf_run_experiment(name.c_str(), doc.dump().c_str(),
                                 out_dir.c_str(), &res);
  }
  return report_and_exit_code(status, res);
}
