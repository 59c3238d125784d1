#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "emff/error.hpp"
#include "emff/scenario.hpp"
#include "emff/sim.hpp"
#include "emff/verify.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitViolation = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

// Shortest decimal that round-trips to the same double.
std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string csv_header(int n, int l, const emff::PairTable& table) {
  std::ostringstream h;
  h << "t";
  const char axes[3] = {'x', 'y', 'z'};
  for (int i = 1; i <= n; ++i)
    for (char a : axes) h << ",r" << i << a;
  for (int i = 1; i <= n; ++i)
    for (char a : axes) h << ",v" << i << a;
  for (int k = 1; k <= 3 * l; ++k) h << ",zeta_" << k;
  h << ",h,lambda";
  for (int p = 0; p < l; ++p) {
    const auto [i, j] = table.pair(p);
    h << ",dist_" << i + 1 << "_" << j + 1;
  }
  for (int p = 0; p < l; ++p) {
    const auto [i, j] = table.pair(p);
    h << ",speed_" << i + 1 << "_" << j + 1;
  }
  for (int i = 1; i <= n; ++i) h << ",q_" << i;
  for (int p = 0; p < l; ++p) {
    const auto [i, j] = table.pair(p);
    for (char a : axes) h << ",p_" << i + 1 << "_" << j + 1 << a;
    for (char a : axes) h << ",p_" << j + 1 << "_" << i + 1 << a;
  }
  return h.str();
}

void write_csv(const std::string& path, const emff::TrajectoryLog& log,
               const emff::PairTable& table) {
  std::ofstream out(path);
  if (!out) throw emff::Error("config_error", "cannot write " + path);
  out << csv_header(log.n, log.l, table) << "\n";
  for (size_t k = 0; k < log.t.size(); ++k) {
    out << format_double(log.t[k]);
    for (Eigen::Index c = 0; c < log.x[k].size(); ++c)
      out << "," << format_double(log.x[k][c]);
    for (Eigen::Index c = 0; c < log.zeta[k].size(); ++c)
      out << "," << format_double(log.zeta[k][c]);
    out << "," << format_double(log.h[k]) << ","
        << format_double(log.lambda[k]);
    for (int p = 0; p < log.l; ++p) out << "," << format_double(log.dist[k][p]);
    for (int p = 0; p < log.l; ++p)
      out << "," << format_double(log.speed[k][p]);
    for (int i = 0; i < log.n; ++i)
      out << "," << format_double(log.power[k][i]);
    for (int p = 0; p < log.l; ++p) {
      for (int c = 0; c < 3; ++c)
        out << "," << format_double(log.amps_low[k][p][c]);
      for (int c = 0; c < 3; ++c)
        out << "," << format_double(log.amps_high[k][p][c]);
    }
    out << "\n";
  }
}

void write_report(const std::string& path, const std::string& scenario_path,
                  const emff::Scenario& sc, unsigned seed,
                  const emff::ConstraintReport& rep) {
  std::ofstream out(path);
  if (!out) throw emff::Error("config_error", "cannot write " + path);
  out << "scenario: " << scenario_path << "\n";
  out << "mode: " << (sc.mode == emff::SimMode::averaged ? "averaged" : "full")
      << "\n";
  out << "horizon_s: " << format_double(sc.horizon) << "\n";
  out << "seed: " << seed << "\n";
  out << "min_distance_m: " << format_double(rep.min_distance) << "\n";
  out << "max_speed_mps: " << format_double(rep.max_speed) << "\n";
  out << "max_power_w: " << format_double(rep.max_power) << "\n";
  out << "min_h: " << format_double(rep.min_h) << "\n";
  out << "terminal_formation_error_m: "
      << format_double(rep.terminal_formation_error) << "\n";
  out << "lambda_active_intervals:";
  for (const auto& iv : rep.lambda_active)
    out << " [" << format_double(iv.t0) << "," << format_double(iv.t1) << "]";
  out << "\n";
  out << "constraints: "
      << (rep.distance_ok && rep.speed_ok && rep.power_ok ? "satisfied"
                                                          : "violated")
      << "\n";
  if (rep.violation_time >= 0.0)
    out << "first_violation: " << rep.violation_what << " at t="
        << format_double(rep.violation_time) << "\n";
}

int cmd_run(const std::string& scenario_path, const std::string& out_dir,
            const std::string& mode_override, double horizon_override,
            unsigned seed) {
  emff::Scenario sc = emff::load_scenario(scenario_path);
  if (mode_override == "averaged")
    sc.mode = emff::SimMode::averaged;
  else if (mode_override == "full")
    sc.mode = emff::SimMode::full;
  else if (!mode_override.empty())
    throw emff::Error("config_error", "mode must be averaged or full");
  if (horizon_override > 0.0) sc.horizon = horizon_override;

  std::filesystem::create_directories(out_dir);
  const emff::TrajectoryLog log = sc.mode == emff::SimMode::averaged
                                      ? emff::run_averaged(sc)
                                      : emff::run_full(sc);
  const emff::ConstraintReport rep = emff::monitor(log, sc);
  write_csv(out_dir + "/trajectory.csv", log, emff::PairTable(sc.n));
  write_report(out_dir + "/report.txt", scenario_path, sc, seed, rep);
  if (!(rep.distance_ok && rep.speed_ok && rep.power_ok)) {
    std::cerr << "constraint violation: " << rep.violation_what << " at t="
              << format_double(rep.violation_time) << "\n";
    return kExitViolation;
  }
  std::cout << "run complete: " << log.t.size() << " samples, min distance "
            << format_double(rep.min_distance) << " m\n";
  return kExitOk;
}

void print_sweep(const emff::SweepResult& res) {
  std::cout << res.name << ": " << res.cases << " cases, " << res.failures
            << " failures\n";
  for (const auto& [name, worst] : res.residuals)
    std::cout << "  worst " << name << ": " << format_double(worst) << "\n";
}

int cmd_verify(const std::string& suite, const std::string& scenario_path,
               unsigned seed) {
  emff::Scenario sc = scenario_path.empty()
                          ? emff::default_scenario()
                          : emff::load_scenario(scenario_path);
  std::vector<emff::SweepResult> results;
  if (suite == "allocation" || suite == "all")
    results.push_back(emff::verify_allocation(seed));
  if (suite == "averaging" || suite == "all")
    results.push_back(emff::verify_averaging(seed));
  if (suite == "care" || suite == "all")
    results.push_back(emff::verify_care(seed));
  if (suite == "gradient" || suite == "all")
    results.push_back(emff::verify_gradient(sc, seed));
  if (suite == "kkt" || suite == "all")
    results.push_back(emff::verify_kkt(sc, seed));
  if (results.empty())
    throw emff::Error("config_error",
                      "unknown suite " + suite +
                          " (expected allocation, averaging, care, gradient, "
                          "kkt, or all)");
  bool ok = true;
  for (const auto& r : results) {
    print_sweep(r);
    ok = ok && r.pass();
  }
  return ok ? kExitOk : kExitViolation;
}

int cmd_plotdata(const std::string& csv_path, const std::string& quantity,
                 const std::string& out_path) {
  std::ifstream in(csv_path);
  if (!in) throw emff::Error("config_error", "cannot open " + csv_path);
  std::string header;
  if (!std::getline(in, header))
    throw emff::Error("config_error", "empty CSV " + csv_path);
  std::vector<std::string> names;
  {
    std::stringstream ss(header);
    std::string field;
    while (std::getline(ss, field, ',')) names.push_back(field);
  }
  int col = -1;
  for (size_t i = 0; i < names.size(); ++i)
    if (names[i] == quantity) col = static_cast<int>(i);
  if (col < 0) {
    std::ostringstream msg;
    msg << "unknown quantity " << quantity << "; valid names:";
    for (const auto& nm : names) msg << " " << nm;
    throw emff::Error("config_error", msg.str());
  }
  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path);
    if (!file) throw emff::Error("config_error", "cannot write " + out_path);
    out = &file;
  }
  std::string line;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string field, tval, qval;
    for (int i = 0; std::getline(ss, field, ','); ++i) {
      if (i == 0) tval = field;
      if (i == col) qval = field;
    }
    *out << tval << " " << qval << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Electromagnetic formation flying simulator"};
  app.require_subcommand(1);

  std::string scenario_path, out_dir = ".", mode_override;
  double horizon_override = -1.0;
  unsigned seed = 1;

  auto* run = app.add_subcommand("run", "Simulate a scenario");
  run->add_option("--scenario", scenario_path, "Scenario file")->required();
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--mode", mode_override, "averaged or full");
  run->add_option("--horizon", horizon_override, "Horizon override, s");
  run->add_option("--seed", seed, "Recorded sweep seed");

  std::string suite;
  auto* verify = app.add_subcommand("verify", "Run a randomized property sweep");
  verify->add_option("suite", suite,
                     "allocation, averaging, care, gradient, kkt, or all")
      ->required();
  verify->add_option("--scenario", scenario_path, "Scenario file");
  verify->add_option("--seed", seed, "Sweep seed");

  std::string csv_path, quantity, plot_out;
  auto* plotdata = app.add_subcommand("plotdata", "Extract one logged series");
  plotdata->add_option("--csv", csv_path, "Trajectory CSV")->required();
  plotdata->add_option("--quantity", quantity, "Column name")->required();
  plotdata->add_option("--out", plot_out, "Output file (default stdout)");

  try {
    app.parse(argc, argv);
    if (run->parsed())
      return cmd_run(scenario_path, out_dir, mode_override, horizon_override,
                     seed);
    if (verify->parsed()) return cmd_verify(suite, scenario_path, seed);
    return cmd_plotdata(csv_path, quantity, plot_out);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  } catch (const emff::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    const std::string code = e.code();
    if (code == "config_error" || code == "bad_formation_spec" ||
        code == "schedule_gap")
      return kExitConfig;
    if (code == "unsafe_initial_state") return kExitViolation;
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
}
