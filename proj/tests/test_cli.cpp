#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"

#ifndef CLI_PATH
#error "CLI_PATH must be defined"
#endif
#ifndef SCENARIO_DIR
#error "SCENARIO_DIR must be defined"
#endif

namespace fs = std::filesystem;

namespace {

struct CmdResult {
  int status = -1;
  std::string out;
};

// Runs the CLI with the given arguments, capturing stdout+stderr.
CmdResult run_cli(const std::string& args) {
  const fs::path tmp = fs::temp_directory_path() / "emff_cli_capture.txt";
  const std::string cmd = std::string(CLI_PATH) + " " + args + " > " +
                          tmp.string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  CmdResult res;
  res.status = WEXITSTATUS(rc);
  std::ifstream in(tmp);
  std::stringstream ss;
  ss << in.rdbuf();
  res.out = ss.str();
  return res;
}

std::string scenario(const char* name) {
  return std::string(SCENARIO_DIR) + "/" + name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int count_lines(const std::string& text) {
  int n = 0;
  for (char c : text)
    if (c == '\n') ++n;
  return n;
}

}  // namespace

TEST_CASE("run subcommand writes a trajectory and a report") {
  const fs::path out = fs::temp_directory_path() / "emff_cli_run";
  fs::remove_all(out);
  const CmdResult res = run_cli("run --scenario " + scenario("example3.json") +
                                " --horizon 5 --out " + out.string());
  CHECK(res.status == 0);
  REQUIRE(fs::exists(out / "trajectory.csv"));
  REQUIRE(fs::exists(out / "report.txt"));

  const std::string csv = slurp(out / "trajectory.csv");
  CHECK(csv.rfind("t,r1x,r1y,r1z,r2x,r2y,r2z,v1x", 0) == 0);
  CHECK(count_lines(csv) == 52);  // header + samples at 0..5 s every 0.1 s

  const std::string report = slurp(out / "report.txt");
  CHECK(report.find("scenario:") != std::string::npos);
  CHECK(report.find("mode: averaged") != std::string::npos);
  CHECK(report.find("horizon_s: 5") != std::string::npos);
  CHECK(report.find("min_distance_m:") != std::string::npos);
  CHECK(report.find("constraints: satisfied") != std::string::npos);
}

TEST_CASE("runs are reproducible byte for byte") {
  const fs::path a = fs::temp_directory_path() / "emff_cli_a";
  const fs::path b = fs::temp_directory_path() / "emff_cli_b";
  fs::remove_all(a);
  fs::remove_all(b);
  const std::string base =
      "run --scenario " + scenario("example3.json") + " --horizon 3 --out ";
  CHECK(run_cli(base + a.string()).status == 0);
  CHECK(run_cli(base + b.string()).status == 0);
  CHECK(slurp(a / "trajectory.csv") == slurp(b / "trajectory.csv"));
  CHECK(slurp(a / "report.txt") == slurp(b / "report.txt"));
}

TEST_CASE("malformed scenarios exit with the configuration code") {
  const fs::path bad = fs::temp_directory_path() / "emff_cli_bad.json";
  {
    std::ofstream f(bad);
    f << "{ \"satellites\": { \"n\": 2 } }";
  }
  const CmdResult res = run_cli("run --scenario " + bad.string());
  CHECK(res.status == 2);
  CHECK(res.out.find("error:") != std::string::npos);

  const CmdResult missing = run_cli("run --scenario /nonexistent.json");
  CHECK(missing.status == 2);
}

TEST_CASE("unsafe initial states exit with the violation code") {
  // Start the pair inside the keep-out distance.
  const fs::path bad = fs::temp_directory_path() / "emff_cli_unsafe.json";
  std::string text = slurp(scenario("example3.json"));
  const auto pos = text.find("-1.5");  // second satellite's cross-track offset
  REQUIRE(pos != std::string::npos);
  {
    std::ofstream f(bad);
    std::string t = text;
    t.replace(pos, 4, "1.20");  // separation drops to 0.3 m
    f << t;
  }
  const CmdResult res = run_cli("run --scenario " + bad.string());
  CHECK(res.status == 1);
  CHECK(res.out.find("unsafe") != std::string::npos);
}

TEST_CASE("verify subcommand runs the randomized sweeps") {
  const CmdResult res = run_cli("verify allocation --seed 5");
  CHECK(res.status == 0);
  CHECK(res.out.find("allocation") != std::string::npos);
  CHECK(res.out.find(" 0 failures") != std::string::npos);

  const CmdResult bad = run_cli("verify no_such_suite");
  CHECK(bad.status == 2);
}

TEST_CASE("plotdata extracts a named column") {
  const fs::path out = fs::temp_directory_path() / "emff_cli_plot";
  fs::remove_all(out);
  REQUIRE(run_cli("run --scenario " + scenario("example3.json") +
                  " --horizon 2 --out " + out.string())
              .status == 0);
  const fs::path series = out / "h.dat";
  const CmdResult res =
      run_cli("plotdata --csv " + (out / "trajectory.csv").string() +
              " --quantity h --out " + series.string());
  CHECK(res.status == 0);
  REQUIRE(fs::exists(series));
  CHECK(count_lines(slurp(series)) == 21);  // one line per sample

  const CmdResult unknown =
      run_cli("plotdata --csv " + (out / "trajectory.csv").string() +
              " --quantity bogus");
  CHECK(unknown.status == 2);
  CHECK(unknown.out.find("valid names") != std::string::npos);
}

TEST_CASE("usage errors exit with the configuration code") {
  CHECK(run_cli("frobnicate").status == 2);
  CHECK(run_cli("run").status == 2);  // --scenario is required
  CHECK(run_cli("--help").status == 0);
}
