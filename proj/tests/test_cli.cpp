#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "nuts_gauss/commands.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nuts_gauss::run_cli;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(const std::vector<std::string>& args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("nuts_gauss_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

}  // namespace

TEST_CASE("kstar, check-stepsize and bound print JSON") {
  auto r = run({"kstar", "--h", "0.09", "--delta", "0.05"});
  REQUIRE(r.code == 0);
  CHECK(json::parse(r.out)["k_star"] == 6);
  CHECK(json::parse(run({"kstar", "--h", "0.11", "--delta", "0.05"}).out)["k_star"] == 5);
  CHECK(json::parse(run({"kstar", "--h", "0.1", "--delta", "0.05"}).out)["k_star"].is_null());

  r = run({"check-stepsize", "--h", "0.1", "--delta", "0.05", "--kmax", "10"});
  REQUIRE(r.code == 0);
  const json j = json::parse(r.out);
  CHECK(j["pass"] == false);
  CHECK(j["offending_k"] == json::array({5}));
  for (const char* key : {"h", "delta", "k_max", "offending_k", "k_star", "pass"}) CHECK(j.contains(key));

  r = run({"bound", "--epoch", "10", "--b", "0.1", "--eps", "0.01"});
  REQUIRE(r.code == 0);
  CHECK(json::parse(r.out)["horizon"] == 530);
}

TEST_CASE("invalid flags exit nonzero") {
  CHECK(run({"simulate", "--bogus"}).code != 0);
  CHECK(run({"simulate", "--kernel", "hmc", "--n-iters", "0", "--out", scratch("bad").string()}).code != 0);
  CHECK(run({"simulate", "--h", "2.5", "--n-iters", "0", "--out", scratch("bad2").string()}).code != 0);
  CHECK(run({}).code != 0);
  CHECK(run({"nonsense"}).code != 0);
}

TEST_CASE("simulate with zero iterations writes a header and a manifest") {
  const fs::path dir = scratch("zero");
  const auto r = run({"simulate", "--d", "10", "--n-chains", "3", "--n-iters", "0", "--out", dir.string()});
  REQUIRE(r.code == 0);
  CHECK(slurp(dir / "simulate.csv") == "chain,iter,norm_sq,stop_reason,orbit_k,grad_evals\n");
  const json m = json::parse(slurp(dir / "simulate.manifest.json"));
  CHECK(m["command"] == "simulate");
  CHECK(m["outputs"] == json::array({"simulate.csv"}));
  for (const char* key : {"config", "seed", "version", "duration_seconds"}) CHECK(m.contains(key));
}

TEST_CASE("simulate is deterministic across runs and worker counts") {
  const fs::path a = scratch("det_a");
  const fs::path b = scratch("det_b");
  const std::vector<std::string> base{"simulate", "--d", "50", "--h", "0.2", "--n-chains", "5", "--n-iters", "12",
                                      "--burn-in", "2", "--seed", "42"};
  auto args_a = base;
  args_a.insert(args_a.end(), {"--workers", "1", "--out", a.string()});
  auto args_b = base;
  args_b.insert(args_b.end(), {"--workers", "3", "--out", b.string()});
  REQUIRE(run(args_a).code == 0);
  REQUIRE(run(args_b).code == 0);
  const std::string csv = slurp(a / "simulate.csv");
  CHECK(csv == slurp(b / "simulate.csv"));
  const auto rows = lines(csv);
  CHECK(rows.size() == 1 + 5 * 10);
  CHECK(rows[1].rfind("0,3,", 0) == 0);
}

TEST_CASE("config file sits between flags and defaults") {
  const fs::path dir = scratch("config");
  const fs::path cfg = dir / "run.cfg";
  std::ofstream(cfg) << "# comment\nd = 20\nn-iters=4\nn-chains=2\nseed=5\nh=0.3\n";
  REQUIRE(run({"simulate", "--config", cfg.string(), "--n-chains", "1", "--out", dir.string()}).code == 0);
  const json m = json::parse(slurp(dir / "simulate.manifest.json"));
  CHECK(m["config"]["d"] == "20");
  CHECK(m["config"]["h"] == "0.3");
  CHECK(m["config"]["n-chains"] == "1");
  CHECK(m["seed"] == 5);
  CHECK(lines(slurp(dir / "simulate.csv")).size() == 1 + 4);
  CHECK(run({"simulate", "--config", (dir / "missing.cfg").string()}).code != 0);
}

TEST_CASE("environment seed overrides only the default") {
  const fs::path a = scratch("env_a");
  const fs::path b = scratch("env_b");
  setenv("NUTS_GAUSS_SEED", "1234", 1);
  REQUIRE(run({"simulate", "--d", "10", "--n-chains", "1", "--n-iters", "2", "--out", a.string()}).code == 0);
  REQUIRE(run({"simulate", "--d", "10", "--n-chains", "1", "--n-iters", "2", "--seed", "7", "--out", b.string()})
              .code == 0);
  unsetenv("NUTS_GAUSS_SEED");
  CHECK(json::parse(slurp(a / "simulate.manifest.json"))["seed"] == 1234);
  CHECK(json::parse(slurp(b / "simulate.manifest.json"))["seed"] == 7);
}

TEST_CASE("couple writes the trace and histogram") {
  const fs::path dir = scratch("couple");
  REQUIRE(run({"couple", "--d", "100", "--n-pairs", "1", "--n-iters", "5", "--seed", "3", "--out", dir.string()})
              .code == 0);
  const auto trace = lines(slurp(dir / "couple_trace.csv"));
  REQUIRE(trace.size() == 7);
  CHECK(trace[0] == "iter,mean_distance,mean_cum_leapfrog,met_fraction");
  CHECK(lines(slurp(dir / "couple_histogram.csv"))[0] == "path_time,count");
  const std::string first = slurp(dir / "couple_trace.csv");
  REQUIRE(run({"couple", "--d", "100", "--n-pairs", "1", "--n-iters", "5", "--seed", "3", "--out", dir.string()})
              .code == 0);
  CHECK(slurp(dir / "couple_trace.csv") == first);
}

TEST_CASE("uturn-scan writes reproducible rows") {
  const fs::path dir = scratch("scan");
  const std::vector<std::string> args{"uturn-scan", "--d", "1000", "--h", "0.11", "--k-range", "1:6",
                                      "--n-draws", "2", "--seed", "4", "--out", dir.string()};
  REQUIRE(run(args).code == 0);
  const std::string csv = slurp(dir / "uturn_scan.csv");
  const auto rows = lines(csv);
  CHECK(rows[0] == "k,time,dot_plus_over_d,dot_minus_over_d,sine,deviation");
  CHECK(rows.size() == 1 + 2 * 6);
  REQUIRE(run(args).code == 0);
  CHECK(slurp(dir / "uturn_scan.csv") == csv);
  CHECK(run({"uturn-scan", "--k-range", "x", "--out", dir.string()}).code != 0);
}

TEST_CASE("fix writes orbit lengths") {
  const fs::path dir = scratch("fix");
  REQUIRE(run({"fix", "--d", "100", "--n-chains", "2", "--n-iters", "3", "--jitter", "leapfrog", "--out",
               dir.string()})
              .code == 0);
  const auto rows = lines(slurp(dir / "fix.csv"));
  CHECK(rows[0] == "chain,iter,orbit_length,stop_reason");
  CHECK(rows.size() == 1 + 6);
  CHECK(json::parse(slurp(dir / "fix.manifest.json")).contains("max_depth_fraction"));
}

TEST_CASE("the installed executable runs") {
  const char* exe = std::getenv("NUTS_GAUSS_CLI");
  if (exe == nullptr) return;
  const std::string cmd = std::string(exe) + " kstar --h 0.11 --delta 0.05 > /dev/null";
  CHECK(std::system(cmd.c_str()) == 0);
  const std::string bad = std::string(exe) + " kstar --nope 2> /dev/null";
  CHECK(std::system(bad.c_str()) != 0);
}
