#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include <sys/wait.h>

#include "amfem/adapt.hpp"
#include "amfem/io.hpp"
#include "helpers.hpp"

using namespace amfem;
using test_util::custom;
using test_util::square;

namespace fs = std::filesystem;

TEST(Builtin, SquareSinePeak) {
  const auto p = builtin("square_sine");
  ASSERT_TRUE(p.exact.has_value());
  EXPECT_NEAR(p.exact->u({0.5, 0.5}), 1.0, 1e-15);
  EXPECT_NEAR(norm(p.exact->p({0.5, 0.5})), 0.0, 1e-15);
  EXPECT_NEAR(p.exact->u({0.0, 0.3}), 0.0, 1e-15);
}

TEST(Builtin, LShapeIsHarmonic) {
  const auto p = builtin("lshape_singular");
  auto m = uniform_refine(create_initial(p.domain), 3);
  for (int e = 0; e < m->num_elements(); ++e) EXPECT_EQ(p.f(m->centroid(e), Cell{*m, e}), 0.0);
  // r^{2/3} sin(2 phi / 3) on the boundary, phi measured from the positive x axis
  const double r = 1.0, phi = std::numbers::pi / 2;
  EXPECT_NEAR(p.g({0.0, 1.0}), std::pow(r, 2.0 / 3) * std::sin(2 * phi / 3), 1e-14);
  ASSERT_TRUE(p.grad_g);
  // central difference of the exact solution against the analytic gradient
  const Point x{-0.4, 0.7};
  const double d = 1e-6;
  const Vec2 fd{(p.exact->u({x.x + d, x.y}) - p.exact->u({x.x - d, x.y})) / (2 * d),
                (p.exact->u({x.x, x.y + d}) - p.exact->u({x.x, x.y - d})) / (2 * d)};
  EXPECT_NEAR(p.grad_g(x).x, fd.x, 1e-8);
  EXPECT_NEAR(p.grad_g(x).y, fd.y, 1e-8);
}

TEST(Builtin, CheckerboardHasPiecewiseConstantCoefficient) {
  const auto p = builtin("checkerboard");
  auto m = create_initial(p.domain);
  for (int e = 0; e < m->num_elements(); ++e) {
    const Vec2 c = p.curl_a_inv(m->centroid(e), Cell{*m, e});
    EXPECT_EQ(c.x, 0.0);
    EXPECT_EQ(c.y, 0.0);
    const Mat2 a = p.a(m->centroid(e), Cell{*m, e});
    EXPECT_TRUE(a.a11 == 1.0 || a.a11 == 100.0);
  }
  EXPECT_TRUE(p.f_piecewise_constant);
  EXPECT_THROW(builtin("no_such_problem"), Error);
  EXPECT_EQ(builtin_names().size(), 4u);
}

TEST(Config, ProblemDefinition) {
  const auto p = custom({{"domain", "lshape"}, {"coefficient", "2"}, {"coefficient.3", "5"},
                         {"source", "1 0 1"}, {"dirichlet", "0 0 0 1"}, {"name", "mine"}});
  EXPECT_EQ(p.name, "mine");
  EXPECT_EQ(p.domain, Domain::lshape);
  auto m = create_initial(Domain::lshape);
  EXPECT_EQ(p.a({}, Cell{*m, 0}).a11, 2.0);
  EXPECT_EQ(p.a({}, Cell{*m, 3}).a11, 5.0);
  EXPECT_EQ(p.f({0.5, 2.0}, Cell{*m, 0}), 3.0);
  EXPECT_EQ(p.g({3.0, 1.0}), 9.0);
  EXPECT_EQ(p.grad_g({3.0, 1.0}).x, 6.0);
  EXPECT_FALSE(p.exact.has_value());
}

TEST(Config, ErrorsAreConfigErrors) {
  auto code = [](std::map<std::string, std::string> kv) {
    try {
      problem_from_config(kv);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::verification;  // i.e. nothing thrown
  };
  EXPECT_EQ(code({{"domain", "circle"}}), ErrorCode::config);
  EXPECT_EQ(code({{"sorce", "1"}}), ErrorCode::config);
  EXPECT_EQ(code({{"source", "1 x"}}), ErrorCode::config);
  EXPECT_EQ(code({{"source", "1 2 3 4 5 6 7"}}), ErrorCode::config);
  EXPECT_EQ(code({{"source.9", "1"}}), ErrorCode::config);  // unit square has two initial triangles
  EXPECT_EQ(code({{"dirichlet.0", "1"}}), ErrorCode::config);
}

TEST(Config, KeyValueParser) {
  std::stringstream in("# comment\n; also comment\n\ndomain = lshape\n[run]\ntheta=0.3\n  eps =  1e-3  \n");
  const auto kv = parse_key_value(in);
  EXPECT_EQ(kv.at("domain"), "lshape");
  EXPECT_EQ(kv.at("run.theta"), "0.3");
  EXPECT_EQ(kv.at("run.eps"), "1e-3");
  std::stringstream bad("domain lshape\n");
  EXPECT_THROW(parse_key_value(bad), Error);
  std::stringstream bad_section("[run\n");
  EXPECT_THROW(parse_key_value(bad_section), Error);
}

TEST(Io, FormatNumberRoundTrips) {
  for (double v : {0.1, 1.0 / 3, 1e-300, -2.5e17, 0.0}) EXPECT_EQ(std::stod(format_number(v)), v);
  EXPECT_EQ(format_number(0.5), "0.5");
}

TEST(ExactErrors, InterpolantErrorIsPositiveAndDecreasing) {
  const auto p = builtin("square_sine");
  double prev = INFINITY;
  for (int level : {2, 4, 6}) {
    auto m = square(level);
    // RT0 interpolant: edge coefficients are exact normal fluxes (Gauss rule on the edge)
    MixedSolution s;
    s.mesh = m;
    s.p.resize(m->num_edges());
    for (int id = 0; id < m->num_edges(); ++id) {
      const Edge& ed = m->edge(id);
      const Point a = m->vertices()[ed.v[0]], b = m->vertices()[ed.v[1]];
      double flux = 0.0;
      const double gx[] = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831, 0.9061798459386640};
      const double gw[] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889, 0.4786286704993665,
                           0.2369268850561891};
      for (int q = 0; q < 5; ++q) {
        const double t = 0.5 * (1 + gx[q]);
        flux += 0.5 * gw[q] * dot(p.exact->p({a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)}), m->edge_normal(id));
      }
      s.p[id] = flux * m->edge_length(id);
    }
    s.u.assign(m->num_elements(), 0.0);
    s.f_h = project_f(p.f, *m);
    const auto err = exact_errors(s, p);
    EXPECT_GT(err.flux, 0.0);
    EXPECT_LT(err.flux, prev);
    EXPECT_FALSE(err.surrogate);
    prev = err.flux;
  }
}

TEST(ExactErrors, RepresentableFluxHasNoError) {
  auto p = custom({{"dirichlet", "0 1 2"}});
  p.exact = ExactSolution{[](Point x) { return x.x + 2 * x.y; }, [](Point) { return Vec2{1, 2}; },
                          [](Point) { return 0.0; }};
  auto m = square(3);
  const auto err = exact_errors(solve_problem(m, p), p);
  EXPECT_LT(err.flux, 1e-12);
  EXPECT_LT(err.div, 1e-12);
}

TEST(ExactErrors, FirstOrderBetweenEighthAndSixteenth) {
  const auto p = builtin("square_sine");
  const double e8 = exact_errors(solve_problem(square(6), p), p).flux;
  const double e16 = exact_errors(solve_problem(square(8), p), p).flux;
  EXPECT_NEAR(e8 / e16, 2.0, 0.2);
}

TEST(ExactErrors, DivergenceErrorEqualsDataOscillation) {
  const auto p = builtin("square_sine");
  auto m = refine(square(4), std::vector<int>{1, 8, 20}, 2).mesh;
  const auto sol = solve_problem(m, p);
  double osc = 0.0;
  for (double v : data_oscillation(p.f, *m)) osc += v;
  const auto err = exact_errors(sol, p);
  // equal up to the difference of the two quadrature rules
  EXPECT_NEAR(err.div * err.div, osc, 1e-5 * osc);
}

TEST(ExactErrors, SurrogateAndRoundTripInvariance) {
  const auto p = builtin("checkerboard");
  auto m = uniform_refine(create_initial(p.domain), 3);
  const auto sol = solve_problem(m, p);
  EXPECT_THROW(exact_errors(sol, p), Error);
  const auto ref = solve_problem(uniform_refine(m, 2), p);
  const auto err = exact_errors(sol, p, &ref);
  EXPECT_TRUE(err.surrogate);
  EXPECT_GT(err.flux, 0.0);

  std::stringstream ss;
  write_mesh(ss, *m);
  auto m2 = read_mesh(ss);
  std::stringstream ss2;
  write_mesh(ss2, *ref.mesh);
  auto r2 = read_mesh(ss2);
  const auto sol2 = solve_problem(m2, p);
  const auto ref2 = solve_problem(r2, p);
  const auto err2 = exact_errors(sol2, p, &ref2);
  EXPECT_EQ(err2.flux, err.flux);
  EXPECT_EQ(err2.div, err.div);
  EXPECT_EQ(err2.disp, err.disp);
}

TEST(Stability, ProjectedSourceErrorTracksDataOscillation) {
  const auto p = builtin("square_sine");
  std::vector<double> ratios;
  for (int level : {2, 4, 6}) {
    auto mh = square(level);
    const auto ph = with_piecewise_source(p, mh, project_f(p.f, *mh));
    auto ref = uniform_refine(mh, 2);
    const auto exact_f = solve_problem(ref, p);
    const auto proj_f = solve_problem(ref, ph);
    double osc = 0.0;
    for (double v : data_oscillation(p.f, *mh)) osc += v;
    ratios.push_back(std::sqrt(flux_difference2(exact_f, proj_f, p) / osc));
  }
  for (double r : ratios) {
    EXPECT_GT(r, 0.0);
    EXPECT_LT(r, 1.0);
  }
  EXPECT_LT(*std::max_element(ratios.begin(), ratios.end()) / *std::min_element(ratios.begin(), ratios.end()), 4.0);
}

// --- command line ---------------------------------------------------------

namespace {

struct CliResult {
  int code;
  std::string err;
};

CliResult run_cli(const std::string& args, const fs::path& dir) {
  fs::create_directories(dir);
  const std::string cmd = std::string(AMFEM_CLI_PATH) + " " + args + " >" + (dir / "stdout.txt").string() + " 2>" +
                          (dir / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  std::ifstream in(dir / "stderr.txt");
  std::stringstream ss;
  ss << in.rdbuf();
  return {WEXITSTATUS(status), ss.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) { return fs::temp_directory_path() / ("amfem_test_" + name); }

}  // namespace

TEST(Cli, RunWritesReproducibleTrace) {
  const auto a = scratch("run_a"), b = scratch("run_b");
  fs::remove_all(a);
  fs::remove_all(b);
  const std::string args = "run --problem square_sine --theta 0.5 --max-dofs 3000 --seed 3 --out ";
  ASSERT_EQ(run_cli(args + a.string(), a).code, 0);
  ASSERT_EQ(run_cli(args + b.string(), b).code, 0);
  for (const char* f : {"trace.csv", "errors.csv", "metadata.json", "final_mesh.txt", "indicators.csv",
                        "solution_elements.csv", "solution_edges.csv", "summary.txt"})
    EXPECT_TRUE(fs::exists(a / f)) << f;
  EXPECT_EQ(slurp(a / "trace.csv"), slurp(b / "trace.csv"));
  EXPECT_EQ(slurp(a / "metadata.json"), slurp(b / "metadata.json"));
  std::ifstream mesh(a / "final_mesh.txt");
  EXPECT_NO_THROW(read_mesh(mesh));
}

TEST(Cli, ConfigFileDrivesTheRun) {
  const auto dir = scratch("config");
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::ofstream(dir / "p.ini") << "domain = lshape\nsource = 1\ncoefficient.2 = 10\n[run]\ntheta = 0.6\nmax_dofs = 2000\n";
  const auto r = run_cli("run --config " + (dir / "p.ini").string() + " --out " + (dir / "out").string(), dir);
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(slurp(dir / "out" / "metadata.json").find("\"theta\": 0.6"), std::string::npos);
}

TEST(Cli, ExitCodesAndSingleLineErrors) {
  const auto dir = scratch("errors");
  auto check = [&](const std::string& args, int code) {
    const auto r = run_cli(args, dir);
    EXPECT_EQ(r.code, code) << args;
    EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1) << args << ": " << r.err;
    EXPECT_EQ(r.err.rfind("amfem-error code=" + std::to_string(code), 0), 0u) << r.err;
  };
  check("run --problem nope --max-dofs 100 --out " + (dir / "o").string(), 2);
  check("run --problem square_sine --theta 1.5 --max-dofs 100 --out " + (dir / "o").string(), 2);
  check("run --problem square_sine --mode two_step --out " + (dir / "o").string(), 2);
  check("run --problem square_sine --kappa 2 --max-dofs 100 --out " + (dir / "o").string(), 2);
  check("run --config /nonexistent.ini --out " + (dir / "o").string(), 2);
  check("run --problem square_sine --bogus-flag", 2);
  check("verify nosuchsuite", 2);
}

TEST(Cli, VerifyDorflerPasses) {
  const auto dir = scratch("verify");
  const auto r = run_cli("verify dorfler --seed 7 --out " + dir.string(), dir);
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(slurp(dir / "stdout.txt").find("PASS dorfler/"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "verify_dorfler.json"));
}
