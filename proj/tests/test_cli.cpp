#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "branchlab/cli.hpp"
#include "branchlab/manifest.hpp"
#include "support.hpp"

using namespace branchlab;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

fs::path fresh_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("branchlab_test_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("usage errors exit with 64") {
  CHECK(run_cli({"spectral", "--no-such-flag"}) == 64);
  CHECK(run_cli({"frobnicate"}) == 64);
  CHECK(run_cli({}) == 64);
}

TEST_CASE("spectral subcommand writes the delta table with a hash header") {
  const fs::path dir = fresh_dir("spectral");
  CHECK(run_cli({"spectral", "--model", testing::model_path("yule"), "--out",
                 dir.string()}) == 0);
  const std::string csv = slurp(dir / "delta.csv");
  CHECK(csv.rfind("# manifest_hash=", 0) == 0);
  CHECK(csv.find("t,delta,fitted_bound") != std::string::npos);
  const std::string manifest = slurp(dir / "manifest.json");
  CHECK(manifest.find("manifest_hash") != std::string::npos);
}

TEST_CASE("constants subcommand reports regimes and combo constants") {
  const fs::path dir = fresh_dir("constants");
  CHECK(run_cli({"constants", "--model", testing::model_path("t2"), "--out",
                 dir.string()}) == 0);
  const std::string report = slurp(dir / "constants.json");
  CHECK(report.find("\"regime\": \"crit\"") != std::string::npos);
  CHECK(report.find("\"k_crit\": 2.0") != std::string::npos);
}

TEST_CASE("moments subcommand emits the documented columns") {
  const fs::path dir = fresh_dir("moments");
  CHECK(run_cli({"moments", "--model", testing::model_path("yule"), "--horizon", "2",
                 "--out", dir.string()}) == 0);
  const std::string csv = slurp(dir / "moments.csv");
  CHECK(csv.find("t,mean,second,variance,convention,predicted_asymptote,residual") !=
        std::string::npos);
}

TEST_CASE("verify battery is byte-identical across reruns and job counts") {
  const fs::path dir1 = fresh_dir("verify1");
  const fs::path dir2 = fresh_dir("verify2");
  const fs::path dir3 = fresh_dir("verify3");
  const std::vector<std::string> base{
      "verify",      "--model", testing::model_path("t2"), "--battery", "standard",
      "--replicas",  "400",     "--seed",                  "7"};
  auto with = [&](const fs::path& dir, const std::string& jobs) {
    std::vector<std::string> args = base;
    args.push_back("--jobs");
    args.push_back(jobs);
    args.push_back("--out");
    args.push_back(dir.string());
    return run_cli(args);
  };
  CHECK(with(dir1, "1") == 0);
  CHECK(with(dir2, "1") == 0);
  CHECK(with(dir3, "8") == 0);
  for (const char* name : {"report.json", "martingale_principal.csv", "gauss_z.csv"}) {
    if (!fs::exists(dir1 / name)) continue;
    CHECK(slurp(dir1 / name) == slurp(dir2 / name));
    CHECK(slurp(dir1 / name) == slurp(dir3 / name));
  }
  // Manifests may differ in wall clock but must share the hash line.
  const std::string m1 = slurp(dir1 / "manifest.json");
  const std::string m3 = slurp(dir3 / "manifest.json");
  const auto hash_of = [](const std::string& text) {
    const auto pos = text.find("manifest_hash");
    return text.substr(pos, text.find('\n', pos) - pos);
  };
  CHECK(hash_of(m1) == hash_of(m3));
}

TEST_CASE("simulate subcommand dumps replica trajectories") {
  const fs::path dir = fresh_dir("simulate");
  CHECK(run_cli({"simulate", "--model", testing::model_path("yule"), "--replicas", "5",
                 "--horizon", "2", "--seed", "3", "--out", dir.string()}) == 0);
  const std::string csv = slurp(dir / "trajectories.csv");
  CHECK(csv.find("replica,t,n_0") != std::string::npos);
  const std::string summary = slurp(dir / "summary.json");
  CHECK(summary.find("\"stderr\"") != std::string::npos);
}

TEST_CASE("manifest subcommand emits the hash without running anything") {
  CHECK(run_cli({"manifest", "--model", testing::model_path("rot3"), "--seed", "5"}) == 0);
}
