#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "gbqf/capi.h"

namespace fs = std::filesystem;

namespace {

struct ResultGuard {
  gbqf_result* r = nullptr;
  ~ResultGuard() { gbqf_result_free(r); }
};

fs::path fresh_dir(const char* leaf) {
  const fs::path dir = fs::temp_directory_path() / "gbqf_capi" / leaf;
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

bool has_failed_check(const gbqf_result* r, const char* name) {
  for (int i = 0; i < gbqf_result_check_count(r); ++i) {
    if (std::strcmp(gbqf_result_check_name(r, i), name) == 0)
      return gbqf_result_check_pass(r, i) == 0;
  }
  return false;
}

constexpr const char* kTinyFilter =
    R"({"grid":{"T":0.5,"n_steps":50},"ensemble":{"replicas":3,"seed":4}})";

}  // namespace

TEST_CASE("version, status names, and the experiment catalog") {
  CHECK(std::strcmp(gbqf_version(), "0.1.0") == 0);
  CHECK(std::strcmp(gbqf_status_name(GBQF_OK), "ok") == 0);
  CHECK(std::strcmp(gbqf_status_name(GBQF_ERR_CONFIG), "config error") == 0);
  CHECK(std::strcmp(gbqf_status_name(GBQF_ERR_UNKNOWN), "unknown error") == 0);
  CHECK(std::strcmp(gbqf_status_name(55), "unknown status") == 0);

  int count = 0;
  const char* const* names = gbqf_experiment_names(&count);
  REQUIRE(names != nullptr);
  CHECK(count == 9);
  bool has_filter = false, has_selftest = false;
  for (int i = 0; i < count; ++i) {
    has_filter = has_filter || std::strcmp(names[i], "filter") == 0;
    has_selftest = has_selftest || std::strcmp(names[i], "selftest") == 0;
  }
  CHECK(has_filter);
  CHECK(has_selftest);
  CHECK(gbqf_experiment_names(nullptr) == names);
}

TEST_CASE("selftest battery passes without touching the filesystem") {
  ResultGuard g;
  const int status = gbqf_selftest(&g.r);
  CHECK(status == GBQF_OK);
  REQUIRE(g.r != nullptr);
  CHECK(gbqf_result_ok(g.r) == 1);
  CHECK(gbqf_result_check_count(g.r) >= 8);
  CHECK(std::strcmp(gbqf_result_error(g.r), "") == 0);
  for (int i = 0; i < gbqf_result_check_count(g.r); ++i) {
    CHECK(std::strlen(gbqf_result_check_name(g.r, i)) > 0);
    CHECK(gbqf_result_check_pass(g.r, i) == 1);
  }
  CHECK(std::strlen(gbqf_result_summary(g.r)) > 0);
}

TEST_CASE("null and malformed inputs map to clean statuses") {
  ResultGuard g;
  CHECK(gbqf_run_experiment(nullptr, "{}", "/tmp/x", &g.r) ==
        GBQF_ERR_INVALID_ARGUMENT);
  CHECK(g.r == nullptr);
  CHECK(gbqf_run_experiment("filter", "{}", nullptr, &g.r) ==
        GBQF_ERR_INVALID_ARGUMENT);
  CHECK(g.r == nullptr);

  const fs::path dir = fresh_dir("bad");
  SUBCASE("unknown experiment") {
    ResultGuard h;
    CHECK(gbqf_run_experiment("warp", "{}", dir.string().c_str(), &h.r) ==
          GBQF_ERR_CONFIG);
    REQUIRE(h.r != nullptr);
    CHECK(gbqf_result_ok(h.r) == 0);
    CHECK(std::string(gbqf_result_error(h.r)).find("unknown experiment") !=
          std::string::npos);
  }
  SUBCASE("invalid JSON") {
    ResultGuard h;
    CHECK(gbqf_run_experiment("filter", "{", dir.string().c_str(), &h.r) ==
          GBQF_ERR_CONFIG);
    REQUIRE(h.r != nullptr);
    CHECK(std::string(gbqf_result_error(h.r)).find("invalid JSON") !=
          std::string::npos);
  }
  SUBCASE("unknown config key") {
    ResultGuard h;
    CHECK(gbqf_run_experiment("filter", R"({"grid":{"bogus":1}})",
                              dir.string().c_str(), &h.r) == GBQF_ERR_CONFIG);
    REQUIRE(h.r != nullptr);
    CHECK(std::strlen(gbqf_result_error(h.r)) > 0);
  }
}

TEST_CASE("result accessors tolerate null handles") {
  CHECK(gbqf_result_ok(nullptr) == 0);
  CHECK(std::strcmp(gbqf_result_summary(nullptr), "") == 0);
  CHECK(std::strcmp(gbqf_result_error(nullptr), "") == 0);
  CHECK(gbqf_result_check_count(nullptr) == 0);
  CHECK(std::strcmp(gbqf_result_check_name(nullptr, 0), "") == 0);
  CHECK(gbqf_result_check_pass(nullptr, 0) == 0);
  gbqf_result_free(nullptr);
}

TEST_CASE("a small run writes its outputs and reproduces bit for bit") {
  const fs::path dir_a = fresh_dir("run_a");
  const fs::path dir_b = fresh_dir("run_b");

  ResultGuard a;
  REQUIRE(gbqf_run_experiment("filter", kTinyFilter, dir_a.string().c_str(),
                              &a.r) == GBQF_OK);
  REQUIRE(a.r != nullptr);
  CHECK(gbqf_result_ok(a.r) == 1);
  CHECK(gbqf_result_check_count(a.r) >= 2);

  CHECK(fs::exists(dir_a / "manifest.json"));
  CHECK(!fs::exists(dir_a / ".incomplete"));
  CHECK(fs::exists(dir_a / "path_states.csv"));
  CHECK(fs::exists(dir_a / "ensemble_purity.csv"));

  ResultGuard b;
  REQUIRE(gbqf_run_experiment("filter", kTinyFilter, dir_b.string().c_str(),
                              &b.r) == GBQF_OK);
  CHECK(slurp(dir_a / "path_states.csv") == slurp(dir_b / "path_states.csv"));
  CHECK(slurp(dir_a / "path_observations.csv") ==
        slurp(dir_b / "path_observations.csv"));
  CHECK(slurp(dir_a / "ensemble_purity.csv") ==
        slurp(dir_b / "ensemble_purity.csv"));

  const std::string manifest = slurp(dir_a / "manifest.json");
  CHECK(manifest.find("\"experiment\": \"filter\"") != std::string::npos);
  CHECK(manifest.find("\"library_version\": \"0.1.0\"") != std::string::npos);
  CHECK(manifest.find("\"ok\": true") != std::string::npos);
}

TEST_CASE("quality-gate failures report ok=false with a passing status") {
  const fs::path dir = fresh_dir("gate");
  ResultGuard g;
  const char* cfg =
      R"({"grid":{"T":0.5,"n_steps":100,"M":4},)"
      R"("ensemble":{"replicas":8,"seed":2},)"
      R"("experiment":{"assert_quality":true}})";
  const int status =
      gbqf_run_experiment("statered", cfg, dir.string().c_str(), &g.r);
  CHECK(status == GBQF_OK);
  REQUIRE(g.r != nullptr);
  CHECK(gbqf_result_ok(g.r) == 0);
  CHECK(has_failed_check(g.r, "terminal_reduction"));
  CHECK(std::string(gbqf_result_error(g.r)).find("failed checks") !=
        std::string::npos);
  CHECK(fs::exists(dir / "manifest.json"));
  CHECK(slurp(dir / "manifest.json").find("\"ok\": false") !=
        std::string::npos);
}
