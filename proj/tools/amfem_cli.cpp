// amfem: adaptive mixed finite element runs and property verification.
//
//   amfem run --problem lshape_singular --theta 0.5 --max-dofs 20000 --out out/
//   amfem run --config problem.ini --eps 1e-2
//   amfem verify dorfler --seed 7
//
// Exit codes: 0 ok, 2 configuration error, 3 solver or mesh failure,
// 4 verification failure. Errors are reported as one line on stderr:
//   amfem-error code=<n> kind=<config|solver|mesh|verification> message="..."

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "amfem/adapt.hpp"
#include "amfem/io.hpp"
#include "amfem/verify.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace amfem;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;
constexpr int kExitVerification = 4;
constexpr long kDefaultMaxDofs = 100000;

std::string one_line(std::string s) {
  for (char& c : s)
    if (c == '\n' || c == '\r') c = ' ';
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

int report_error(int code, std::string_view kind, const std::string& message) {
  std::cerr << "amfem-error code=" << code << " kind=" << kind << " message=\"" << one_line(message) << "\"\n";
  return code;
}

int exit_code(ErrorCode c) {
  switch (c) {
    case ErrorCode::config: return kExitConfig;
    case ErrorCode::verification: return kExitVerification;
    case ErrorCode::solver:
    case ErrorCode::mesh: return kExitSolver;
  }
  return kExitSolver;
}

std::string_view kind_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::config: return "config";
    case ErrorCode::solver: return "solver";
    case ErrorCode::mesh: return "mesh";
    case ErrorCode::verification: return "verification";
  }
  return "unknown";
}

struct RunConfig {
  std::string problem;
  std::string config_path;
  double theta = 0.5;
  double kappa = 1.0;
  int b = 1;
  double eps = 0.0;
  long max_dofs = 0;
  int max_iterations = 200;
  std::string mode = "adaptive";
  std::string estimator = "stress";
  std::string gamma_grid;
  std::string out = "amfem-out";
  std::uint64_t seed = 0;
  bool timing = false;
  int reference_levels = 2;
};

double parse_double(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size()) throw Error(ErrorCode::config, key + ": not a number: '" + text + "'");
  return v;
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> grid;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const double g = parse_double("--gamma-grid", item);
    if (!(g > 0.0)) throw Error(ErrorCode::config, "--gamma-grid values must be positive");
    grid.push_back(g);
  }
  if (grid.empty()) throw Error(ErrorCode::config, "--gamma-grid is empty");
  return grid;
}

/// Problem keys go to the problem definition; `[run]` keys fill options that
/// were not given on the command line.
ProblemSpec load_problem(RunConfig& cfg, const CLI::App& run) {
  if (cfg.config_path.empty()) {
    if (cfg.problem.empty()) throw Error(ErrorCode::config, "give --problem or --config");
    return builtin(cfg.problem);
  }
  std::ifstream in(cfg.config_path);
  if (!in) throw Error(ErrorCode::config, "cannot open config file '" + cfg.config_path + "'");
  const auto kv = parse_key_value(in);
  std::map<std::string, std::string> problem_keys;
  for (const auto& [k, v] : kv) {
    if (k.rfind("run.", 0) != 0) {
      problem_keys[k] = v;
      continue;
    }
    const std::string key = k.substr(4);
    auto unset = [&](const char* flag) { return run.count(flag) == 0; };
    if (key == "theta") { if (unset("--theta")) cfg.theta = parse_double(k, v); }
    else if (key == "kappa") { if (unset("--kappa")) cfg.kappa = parse_double(k, v); }
    else if (key == "b") { if (unset("--b")) cfg.b = static_cast<int>(parse_double(k, v)); }
    else if (key == "eps") { if (unset("--eps")) cfg.eps = parse_double(k, v); }
    else if (key == "max_dofs") { if (unset("--max-dofs")) cfg.max_dofs = static_cast<long>(parse_double(k, v)); }
    else if (key == "mode") { if (unset("--mode")) cfg.mode = v; }
    else if (key == "estimator") { if (unset("--estimator")) cfg.estimator = v; }
    else if (key == "gamma_grid") { if (unset("--gamma-grid")) cfg.gamma_grid = v; }
    else throw Error(ErrorCode::config, "unknown run key '" + k + "'");
  }
  if (!cfg.problem.empty()) {
    if (!problem_keys.empty()) throw Error(ErrorCode::config, "--problem and a problem definition in --config conflict");
    return builtin(cfg.problem);
  }
  if (problem_keys.contains("problem")) {
    const std::string name = problem_keys.at("problem");
    problem_keys.erase("problem");
    if (!problem_keys.empty()) throw Error(ErrorCode::config, "'problem = " + name + "' takes no further problem keys");
    return builtin(name);
  }
  return problem_from_config(problem_keys);
}

AdaptOptions make_options(const RunConfig& cfg) {
  if (!(cfg.theta > 0.0 && cfg.theta <= 1.0)) throw Error(ErrorCode::config, "--theta must lie in (0, 1]");
  if (!(cfg.kappa >= 0.0 && cfg.kappa <= 1.0)) throw Error(ErrorCode::config, "--kappa must lie in [0, 1]");
  if (cfg.b < 1) throw Error(ErrorCode::config, "--b must be >= 1");
  if (cfg.eps < 0.0 || !std::isfinite(cfg.eps)) throw Error(ErrorCode::config, "--eps must be positive");
  if (cfg.max_dofs < 0) throw Error(ErrorCode::config, "--max-dofs must be positive");
  if (cfg.mode != "adaptive" && cfg.mode != "uniform" && cfg.mode != "two_step")
    throw Error(ErrorCode::config, "--mode must be adaptive, uniform or two_step");
  if (cfg.estimator != "stress" && cfg.estimator != "full")
    throw Error(ErrorCode::config, "--estimator must be stress or full");
  if (cfg.mode == "two_step" && !(cfg.eps > 0.0)) throw Error(ErrorCode::config, "--mode two_step needs --eps");

  AdaptOptions opt;
  opt.theta = cfg.theta;
  opt.kappa = cfg.kappa;
  opt.bisections = cfg.b;
  opt.eps = cfg.eps;
  // neither tolerance nor budget: stop at the desk-scale budget
  opt.max_dofs = cfg.max_dofs == 0 && !(cfg.eps > 0.0) ? kDefaultMaxDofs : cfg.max_dofs;
  opt.max_iterations = cfg.max_iterations;
  opt.mode = cfg.mode == "uniform" ? RefineMode::uniform : RefineMode::adaptive;
  opt.estimator = cfg.estimator == "full" ? EstimatorKind::full : EstimatorKind::stress;
  opt.reference_levels = cfg.reference_levels;
  if (!cfg.gamma_grid.empty()) opt.gamma_grid = parse_grid(cfg.gamma_grid);
  return opt;
}

json rate_json(const AdaptTrace& trace, ErrorColumn column) {
  try {
    const RateFit fit = fit_rate(trace.rows, trace.n0, column);
    return {{"s", fit.s}, {"stderr", fit.stderr_}, {"lo", fit.lo}, {"hi", fit.hi}, {"points", fit.points}};
  } catch (const Error&) {
    return nullptr;
  }
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::config, "cannot write '" + path.string() + "'");
  out << content;
}

int cmd_run(RunConfig& cfg, const CLI::App& run) {
  const ProblemSpec problem = load_problem(cfg, run);
  const AdaptOptions opt = make_options(cfg);
  const fs::path out = cfg.out;
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw Error(ErrorCode::config, "cannot create output directory '" + cfg.out + "'");

  const AdaptTrace trace = cfg.mode == "two_step" ? two_step(problem, opt) : run_adaptive(problem, opt);

  std::ostringstream csv;
  write_trace_csv(csv, trace, cfg.timing);
  write_file(out / "trace.csv", csv.str());
  std::ostringstream err_csv;
  write_errors_csv(err_csv, trace);
  write_file(out / "errors.csv", err_csv.str());
  if (!trace.approx_rows.empty()) {
    std::ostringstream approx;
    approx << "step,n_elem,osc_f\n";
    for (std::size_t i = 0; i < trace.approx_rows.size(); ++i)
      approx << i << ',' << trace.approx_rows[i].n_elem << ',' << format_number(trace.approx_rows[i].osc_f) << '\n';
    write_file(out / "approx.csv", approx.str());
  }
  if (trace.final_mesh) {
    std::ostringstream mesh;
    write_mesh(mesh, *trace.final_mesh);
    write_file(out / "final_mesh.txt", mesh.str());
  }
  if (!trace.history.empty()) {
    const Iteration& last = trace.history.back();
    std::ostringstream el, ed, ind;
    write_solution_elements_csv(el, last.solution);
    write_solution_edges_csv(ed, last.solution);
    write_indicator_csv(ind, last.estimate, oscillations(*last.mesh, last.solution, problem));
    write_file(out / "solution_elements.csv", el.str());
    write_file(out / "solution_edges.csv", ed.str());
    write_file(out / "indicators.csv", ind.str());
  }

  json meta;
  meta["problem"] = trace.problem;
  meta["config"] = cfg.config_path.empty() ? json(nullptr) : json(cfg.config_path);
  meta["mode"] = cfg.mode;
  meta["theta"] = cfg.theta;
  meta["b"] = cfg.b;
  meta["eps"] = cfg.eps;
  meta["max_dofs"] = opt.max_dofs;
  meta["estimator"] = cfg.estimator;
  meta["kappa"] = cfg.kappa;
  meta["seed"] = cfg.seed;
  meta["gamma_grid"] = trace.gamma_grid;
  meta["gamma"] = trace.gamma;
  meta["alpha"] = trace.alpha;
  meta["n0"] = trace.n0;
  meta["iterations"] = trace.rows.size();
  meta["stop_reason"] = trace.stop_reason;
  meta["error"] = trace.error_tag.empty() ? json(nullptr) : json(trace.error_tag);
  meta["errors_surrogate"] = trace.surrogate;
  meta["reference_levels"] = trace.reference_levels;
  meta["rates"] = {{"flux", rate_json(trace, ErrorColumn::flux)},
                   {"energy", rate_json(trace, ErrorColumn::energy)},
                   {"estimator", rate_json(trace, ErrorColumn::estimator)}};
  double max_complexity = 0.0;
  for (const auto& r : trace.rows)
    if (std::isfinite(r.complexity)) max_complexity = std::max(max_complexity, r.complexity);
  meta["max_complexity"] = max_complexity;
  if (!trace.rows.empty()) {
    const TraceRow& r = trace.rows.back();
    meta["final"] = {{"n_elem", r.n_elem}, {"n_flux_dofs", r.n_flux_dofs}, {"eta", std::sqrt(r.eta2)},
                     {"osc", std::sqrt(r.osc2)}, {"error", std::sqrt(r.e2)}, {"div_defect", r.div_defect}};
  }
  write_file(out / "metadata.json", meta.dump(2) + "\n");

  std::ostringstream summary;
  summary << "problem " << trace.problem << " (" << cfg.mode << ", theta " << cfg.theta << ", b " << cfg.b << ")\n";
  summary << "iterations " << trace.rows.size() << ", stop: " << trace.stop_reason << '\n';
  if (!trace.rows.empty()) {
    const TraceRow& r = trace.rows.back();
    summary << "final #T " << r.n_elem << ", flux dofs " << r.n_flux_dofs << ", eta " << std::sqrt(r.eta2)
            << ", osc " << std::sqrt(r.osc2);
    if (std::isfinite(r.e2)) summary << ", E " << std::sqrt(r.e2) << (trace.surrogate ? " (reference)" : "");
    summary << '\n';
  }
  const json& flux = meta["rates"]["flux"];
  if (!flux.is_null())
    summary << "flux error rate s = " << flux["s"].get<double>() << " +- " << 2 * flux["stderr"].get<double>()
            << " over " << flux["points"].get<int>() << " iterates\n";
  if (std::isfinite(trace.alpha)) summary << "best gamma " << trace.gamma << ", max quasi-error ratio " << trace.alpha << '\n';
  write_file(out / "summary.txt", summary.str());
  std::cout << summary.str();

  if (!trace.error_tag.empty()) return report_error(kExitSolver, "solver", trace.error_tag);
  return 0;
}

int cmd_verify(const std::string& suite, std::uint64_t seed, const std::string& out_dir) {
  const auto results = verify::run_suite(suite, seed);
  json report = json::array();
  int failed = 0;
  for (const auto& r : results) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.suite << '/' << r.name << " measured=" << format_number(r.measured)
              << " bound=" << format_number(r.bound) << " :: " << r.detail << '\n';
    failed += r.passed ? 0 : 1;
    report.push_back({{"suite", r.suite}, {"name", r.name}, {"passed", r.passed}, {"measured", r.measured},
                      {"bound", r.bound}, {"detail", r.detail}});
  }
  if (!out_dir.empty()) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    write_file(fs::path(out_dir) / ("verify_" + suite + ".json"),
               json{{"suite", suite}, {"seed", seed}, {"checks", report}}.dump(2) + "\n");
  }
  std::cout << results.size() - failed << '/' << results.size() << " checks passed\n";
  if (failed > 0)
    return report_error(kExitVerification, "verification", std::to_string(failed) + " check(s) failed in suite " + suite);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive mixed finite elements (RT0/P0) with residual estimators and Doerfler marking"};
  app.require_subcommand(1);

  RunConfig cfg;
  CLI::App* run = app.add_subcommand("run", "run the adaptive (or uniform, or two-step) loop");
  run->add_option("--problem", cfg.problem, "built-in problem: square_sine, square_pwconst, lshape_singular, checkerboard");
  run->add_option("--config", cfg.config_path, "key = value problem definition, optional [run] section");
  run->add_option("--theta", cfg.theta, "Doerfler parameter in (0, 1]");
  run->add_option("--kappa", cfg.kappa, "weight exponent of the full estimator, in [0, 1]");
  run->add_option("--b", cfg.b, "minimal number of bisections of a marked element");
  run->add_option("--eps", cfg.eps, "stop once eta < eps");
  run->add_option("--max-dofs", cfg.max_dofs, "stop before solving with more flux dofs");
  run->add_option("--max-iterations", cfg.max_iterations, "iteration cap");
  run->add_option("--mode", cfg.mode, "adaptive | uniform | two_step");
  run->add_option("--estimator", cfg.estimator, "stress | full (marking always uses stress)");
  run->add_option("--gamma-grid", cfg.gamma_grid, "comma separated gamma values for the contraction scan");
  run->add_option("--reference-levels", cfg.reference_levels, "uniform levels of the reference solution");
  run->add_option("--out", cfg.out, "output directory");
  run->add_option("--seed", cfg.seed, "recorded in the metadata");
  run->add_flag("--timing", cfg.timing, "write wall times into the trace (breaks byte reproducibility)");

  std::string suite;
  std::uint64_t seed = 0;
  std::string verify_out;
  CLI::App* ver = app.add_subcommand("verify", "run a property-verification suite");
  ver->add_option("suite", suite, "mesh | dorfler | pythagoras | reduction | oscillation | upper_bound | all")->required();
  ver->add_option("--seed", seed, "seed of the randomized checks");
  ver->add_option("--out", verify_out, "directory for a JSON report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error(kExitConfig, "config", e.what());
  }

  try {
    if (run->parsed()) return cmd_run(cfg, *run);
    return cmd_verify(suite, seed, verify_out);
  } catch (const Error& e) {
    return report_error(exit_code(e.code()), kind_name(e.code()), e.what());
  } catch (const std::exception& e) {
    return report_error(kExitSolver, "internal", e.what());
  }
}
