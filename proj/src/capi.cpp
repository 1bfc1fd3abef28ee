#include "gbqf/capi.h"

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "gbqf/errors.hpp"
#include "gbqf/io.hpp"

struct gbqf_result {
  gbqf::RunReport report;
  std::string error;
};

namespace {

int run_guarded(const std::function<gbqf::RunReport()>& fn,
                gbqf_result** out) {
  if (out) *out = nullptr;
  auto res = std::make_unique<gbqf_result>();
  int status = GBQF_OK;
  try {
    res->report = fn();
    if (!res->report.ok) {
      std::string failed;
      for (const auto& c : res->report.invariants) {
        if (!c.pass) {
          if (!failed.empty()) failed += "; ";
          failed += c.name;
          if (!c.detail.empty()) failed += " (" + c.detail + ")";
        }
      }
      res->error = "failed checks: " + failed;
    }
  } catch (const gbqf::Error& e) {
    status = static_cast<int>(e.code());
    res->report.ok = false;
    res->error = e.what();
  } catch (const std::exception& e) {
    status = GBQF_ERR_UNKNOWN;
    res->report.ok = false;
    res->error = e.what();
  } catch (...) {
    status = GBQF_ERR_UNKNOWN;
    res->report.ok = false;
    res->error = "unknown failure";
  }
  if (out) *out = res.release();
  return status;
}

}  // namespace

extern "C" {

const char* gbqf_version(void) { return gbqf::kLibraryVersion; }

const char* gbqf_status_name(int status) {
  if (status == GBQF_ERR_UNKNOWN) return "unknown error";
  if (status < 0 || status > 10) return "unknown status";
  return gbqf::error_code_name(static_cast<gbqf::ErrorCode>(status));
}

const char* const* gbqf_experiment_names(int* count) {
  static const std::vector<const char*> ptrs = [] {
    std::vector<const char*> p;
    for (const auto& n : gbqf::experiment_names()) p.push_back(n.c_str());
    return p;
  }();
  if (count) *count = static_cast<int>(ptrs.size());
  return ptrs.data();
}

int gbqf_run_experiment(const char* name, const char* config_json,
                        const char* out_dir, gbqf_result** out_result) {
  if (out_result) *out_result = nullptr;
  if (!name || !out_dir) return GBQF_ERR_INVALID_ARGUMENT;
  const std::string name_s(name);
  const std::string dir_s(out_dir);
  const std::string cfg_s =
      (config_json && config_json[0] != '\0') ? config_json : "{}";
  return run_guarded(
      [&]() {
        nlohmann::json cfg =
            nlohmann::json::parse(cfg_s, nullptr, false);
        if (cfg.is_discarded()) {
          throw gbqf::Error(gbqf::ErrorCode::ConfigError,
                            "config: invalid JSON");
        }
        return gbqf::run_experiment(name_s, cfg, dir_s);
      },
      out_result);
}

int gbqf_selftest(gbqf_result** out_result) {
  return run_guarded([]() { return gbqf::run_selftest(); }, out_result);
}

int gbqf_result_ok(const gbqf_result* r) {
  return (r && r->report.ok) ? 1 : 0;
}

const char* gbqf_result_summary(const gbqf_result* r) {
  return r ? r->report.summary.c_str() : "";
}

const char* gbqf_result_error(const gbqf_result* r) {
  return r ? r->error.c_str() : "";
}

int gbqf_result_check_count(const gbqf_result* r) {
  return r ? static_cast<int>(r->report.invariants.size()) : 0;
}

const char* gbqf_result_check_name(const gbqf_result* r, int i) {
  if (!r || i < 0 || i >= static_cast<int>(r->report.invariants.size())) {
    return "";
  }
  return r->report.invariants[static_cast<std::size_t>(i)].name.c_str();
}

int gbqf_result_check_pass(const gbqf_result* r, int i) {
  if (!r || i < 0 || i >= static_cast<int>(r->report.invariants.size())) {
    return 0;
  }
  return r->report.invariants[static_cast<std::size_t>(i)].pass ? 1 : 0;
}

void gbqf_result_free(gbqf_result* r) { delete r; }

}  // extern "C"
