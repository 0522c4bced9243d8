#include <gtest/gtest.h>

#include <cmath>

#include <Eigen/Dense>

#include "amfem/fem.hpp"
#include "helpers.hpp"

using namespace amfem;
using test_util::custom;
using test_util::single_triangle;
using test_util::square;

namespace {

SaddleSystem assemble_for(const MeshPtr& m, const ProblemSpec& p) {
  return assemble(m, p, build_dofmap(*m), project_f(p.f, *m));
}

/// Flux coefficients of the RT0 interpolant of a constant field q.
std::vector<double> interpolate_constant(const Mesh& m, Vec2 q) {
  std::vector<double> c(m.num_edges());
  for (int id = 0; id < m.num_edges(); ++id) c[id] = dot(q, m.edge_normal(id)) * m.edge_length(id);
  return c;
}

}  // namespace

TEST(DofMap, Counts) {
  auto two = create_initial(Domain::unit_square);
  auto d2 = build_dofmap(*two);
  EXPECT_EQ(d2.num_flux, 5);
  EXPECT_EQ(d2.num_disp, 2);
  auto four = refine(two, std::vector<int>{0}, 1).mesh;
  auto d4 = build_dofmap(*four);
  // five vertices and four triangles: Euler's formula leaves 5 + 4 - 1 = 8 edges
  EXPECT_EQ(d4.num_flux, 8);
  EXPECT_EQ(d4.num_disp, 4);
  auto one = build_dofmap(*single_triangle({0, 0}, {1, 0}, {0, 1}));
  EXPECT_EQ(one.num_flux, 3);
  EXPECT_EQ(one.num_disp, 1);
}

TEST(LocalFlux, UnitBasisHasUnitNormalFlux) {
  auto m = square(2);
  for (int id = 0; id < m->num_edges(); ++id) {
    std::vector<double> c(m->num_edges(), 0.0);
    c[id] = 1.0;
    const Edge& ed = m->edge(id);
    const Point mid = midpoint(m->vertices()[ed.v[0]], m->vertices()[ed.v[1]]);
    for (int side = 0; side < 2; ++side) {
      if (ed.elem[side] < 0) continue;
      const LocalFlux q = local_flux(*m, ed.elem[side], c);
      EXPECT_NEAR(dot(q(mid), m->edge_normal(id)) * m->edge_length(id), 1.0, 1e-13);
    }
  }
}

TEST(LocalFlux, ConstantFieldIsReproduced) {
  auto m = square(3);
  const Vec2 q{0.3, -1.7};
  const auto c = interpolate_constant(*m, q);
  for (int e = 0; e < m->num_elements(); ++e) {
    const LocalFlux f = local_flux(*m, e, c);
    EXPECT_NEAR(f.d, 0.0, 1e-13);
    EXPECT_NEAR(f.value.x, q.x, 1e-13);
    EXPECT_NEAR(f.value.y, q.y, 1e-13);
  }
}

TEST(ProjectF, ConstantsAndLinearOnReferenceTriangles) {
  auto m = square(3);
  const ScalarField three = [](Point, const Cell&) { return 3.0; };
  for (double v : project_f(three, *m)) EXPECT_EQ(v, 3.0);

  const ScalarField x1 = [](Point x, const Cell&) { return x.x; };
  EXPECT_NEAR(project_f(x1, *single_triangle({0, 0}, {1, 0}, {0, 1}))[0], 1.0 / 3, 1e-15);
  EXPECT_NEAR(project_f(x1, *single_triangle({1, 0}, {1, 1}, {0, 1}))[0], 2.0 / 3, 1e-15);

  const ScalarField bad = [](Point, const Cell&) { return std::nan(""); };
  EXPECT_THROW(project_f(bad, *m), Error);
}

TEST(Assemble, DivergenceRowsArePlusMinusOne) {
  auto m = refine(square(2), std::vector<int>{0, 5}, 2).mesh;
  const auto sys = assemble_for(m, builtin("square_sine"));
  const Eigen::MatrixXd b = Eigen::MatrixXd(sys.b);
  ASSERT_EQ(b.rows(), m->num_elements());
  ASSERT_EQ(b.cols(), m->num_edges());
  for (int e = 0; e < m->num_elements(); ++e) {
    int nonzeros = 0;
    for (int j = 0; j < b.cols(); ++j) {
      if (b(e, j) == 0.0) continue;
      ++nonzeros;
      EXPECT_EQ(std::abs(b(e, j)), 1.0);
    }
    EXPECT_EQ(nonzeros, 3);
    for (int i = 0; i < 3; ++i) EXPECT_EQ(b(e, m->edge_of(e, i)), m->edge_sign(e, i));
  }
}

TEST(Assemble, ZeroDataGivesZeroRhs) {
  const auto sys = assemble_for(square(3), custom({{"source", "0"}}));
  EXPECT_EQ(sys.rhs_flux.lpNorm<Eigen::Infinity>(), 0.0);
  EXPECT_EQ(sys.rhs_div.lpNorm<Eigen::Infinity>(), 0.0);
}

TEST(Assemble, MassMatrixIsLinearInInverseCoefficient) {
  auto m = square(3);
  const auto m1 = assemble_for(m, custom({{"coefficient", "1"}, {"source", "1"}})).m;
  const auto m2 = assemble_for(m, custom({{"coefficient", "2"}, {"source", "1"}})).m;
  EXPECT_LT((Eigen::MatrixXd(m2) - 0.5 * Eigen::MatrixXd(m1)).cwiseAbs().maxCoeff(), 1e-14);
  const Eigen::MatrixXd dense = Eigen::MatrixXd(m1);
  EXPECT_LT((dense - dense.transpose()).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_GT(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(dense).eigenvalues().minCoeff(), 0.0);
}

TEST(Assemble, DivergenceRhsIsMinusAreaTimesFh) {
  auto m = square(2);
  const auto p = custom({{"source", "1 2 3"}});
  const auto f_h = project_f(p.f, *m);
  const auto sys = assemble(m, p, build_dofmap(*m), f_h);
  for (int e = 0; e < m->num_elements(); ++e) EXPECT_DOUBLE_EQ(sys.rhs_div[e], -m->area(e) * f_h[e]);
}

TEST(Assemble, NonPositiveCoefficientIsReported) {
  const auto p = custom({{"coefficient", "-1 2"}, {"source", "1"}});  // a = 2x - 1 < 0 left of x = 1/2
  EXPECT_THROW(assemble_for(square(2), p), Error);
}

TEST(Solve, ZeroDataGivesZeroSolution) {
  const auto sol = solve_problem(square(3), custom({{"source", "0"}, {"coefficient", "1 1 0 0 0 1"}}));
  for (double v : sol.p) EXPECT_EQ(v, 0.0);
  for (double v : sol.u) EXPECT_EQ(v, 0.0);
}

TEST(Solve, UnitSourceBalancesGlobalFlux) {
  auto m = refine(square(3), std::vector<int>{2, 9}, 2).mesh;
  const auto sol = solve_problem(m, custom({{"source", "1"}}));
  double total = 0.0;
  for (int e = 0; e < m->num_elements(); ++e) total += m->area(e) * sol.flux(e).div();
  EXPECT_NEAR(total, -1.0, 1e-12);
}

TEST(Solve, ResidualAndDivergenceContract) {
  for (const char* name : {"square_sine", "lshape_singular", "checkerboard", "square_pwconst"}) {
    const auto p = builtin(name);
    auto m = uniform_refine(create_initial(p.domain), 6);
    const auto sol = solve_problem(m, p);
    double fmax = 0.0;
    for (double v : sol.f_h) fmax = std::max(fmax, std::abs(v));
    EXPECT_LE(divergence_defect(sol), 1e-9 * (1 + fmax)) << name;
    EXPECT_EQ(sol.div_defect, divergence_defect(sol)) << name;
    EXPECT_LE(sol.residual, 1e-10 * (1 + fmax)) << name;
  }
}

TEST(Solve, SchurComplementAgreesWithDirect) {
  const auto p = builtin("checkerboard");
  auto m = uniform_refine(create_initial(p.domain), 4);
  const auto direct = solve_problem(m, p, SolverKind::direct);
  const auto schur = solve_problem(m, p, SolverKind::schur_cg);
  for (std::size_t i = 0; i < direct.p.size(); ++i) EXPECT_NEAR(direct.p[i], schur.p[i], 1e-8);
  for (std::size_t i = 0; i < direct.u.size(); ++i) EXPECT_NEAR(direct.u[i], schur.u[i], 1e-8);
}

TEST(Solve, FluxScalesWithCoefficient) {
  auto m = refine(square(4), std::vector<int>{3, 17}, 2).mesh;
  // boundary-driven part: p_h(cA) = c p_h(A)
  const auto g1 = solve_problem(m, custom({{"coefficient", "1 1"}, {"dirichlet", "0 1 0 0 2 -1"}}));
  const auto g3 = solve_problem(m, custom({{"coefficient", "3 3"}, {"dirichlet", "0 1 0 0 2 -1"}}));
  // source-driven part: p_h is independent of c
  const auto f1 = solve_problem(m, custom({{"coefficient", "1 1"}, {"source", "1 2 0 0 1"}}));
  const auto f3 = solve_problem(m, custom({{"coefficient", "3 3"}, {"source", "1 2 0 0 1"}}));
  for (std::size_t i = 0; i < g1.p.size(); ++i) {
    EXPECT_NEAR(g3.p[i], 3.0 * g1.p[i], 1e-10 * (1 + std::abs(g1.p[i])));
    EXPECT_NEAR(f3.p[i], f1.p[i], 1e-10 * (1 + std::abs(f1.p[i])));
  }
}

TEST(Convergence, FluxErrorHalvesWithMeshSize) {
  const auto p = builtin("square_sine");
  // h = 1/4 and 1/8 legs: 4 and 6 uniform bisection levels of the 2-triangle square
  const double e4 = exact_errors(solve_problem(square(4), p), p).flux;
  const double e8 = exact_errors(solve_problem(square(6), p), p).flux;
  EXPECT_NEAR(e4 / e8, 2.0, 0.2);
}

TEST(Prolongate, CoarseFieldIsReproducedOnRefinement) {
  const auto p = builtin("square_sine");
  auto coarse = square(3);
  const auto sol = solve_problem(coarse, p);
  auto fine = refine(coarse, std::vector<int>{0, 4, 11}, 2).mesh;
  const auto lifted = prolongate(sol, fine, project_f(p.f, *fine));
  EXPECT_LT(flux_difference2(lifted, sol, p), 1e-26);
  const auto anc = ancestor_map(*fine, *coarse);
  for (int e = 0; e < fine->num_elements(); ++e) {
    EXPECT_NEAR(lifted.flux(e).div(), sol.flux(anc[e]).div(), 1e-10);
    EXPECT_EQ(lifted.u[e], sol.u[anc[e]]);
  }
}
