#ifndef AMFEM_FEM_HPP
#define AMFEM_FEM_HPP

#include <array>
#include <span>
#include <vector>

#include <Eigen/Sparse>

#include "amfem/mesh.hpp"
#include "amfem/problems.hpp"

namespace amfem {

/// Lowest-order Raviart-Thomas flux dofs (one per edge, unit normal flux
/// along the global edge normal) and piecewise constant displacement dofs.
struct DofMap {
  int num_flux = 0;
  int num_disp = 0;
  std::vector<std::array<int, 3>> flux;  ///< global flux dof of local edge i
  std::vector<std::array<int, 3>> sign;  ///< orientation of that dof in the element
};

DofMap build_dofmap(const Mesh& mesh);

/// An RT0 field restricted to one triangle: q(x) = value + d (x - center).
struct LocalFlux {
  Point center;
  Vec2 value;
  double d = 0.0;

  Vec2 operator()(Point x) const { return {value.x + d * (x.x - center.x), value.y + d * (x.y - center.y)}; }
  double div() const { return 2.0 * d; }
};

/// Local field of element `e` for global flux coefficients `coeffs`.
LocalFlux local_flux(const Mesh& mesh, int e, std::span<const double> coeffs);

/// Element means of f, computed with the degree-4 rule. Throws Error(config)
/// on a non-finite sample.
std::vector<double> project_f(const ScalarField& f, const Mesh& mesh);

/// [[M, B^T], [B, 0]] [p; u] = [rhs_flux; rhs_div]
struct SaddleSystem {
  MeshPtr mesh;
  Eigen::SparseMatrix<double> m;
  Eigen::SparseMatrix<double> b;
  Eigen::VectorXd rhs_flux;
  Eigen::VectorXd rhs_div;
  std::vector<double> f_h;
};

SaddleSystem assemble(const MeshPtr& mesh, const ProblemSpec& problem, const DofMap& dofs,
                      std::span<const double> f_h);

struct MixedSolution {
  MeshPtr mesh;
  std::vector<double> p;    ///< flux coefficients, one per edge
  std::vector<double> u;    ///< displacement per element
  std::vector<double> f_h;  ///< projected source per element
  double residual = 0.0;    ///< infinity norm of the block residual
  double div_defect = 0.0;  ///< max_T |div p_h + f_h|

  LocalFlux flux(int e) const { return local_flux(*mesh, e, p); }
};

enum class SolverKind { direct, schur_cg };

/// Residual contract: ||r||_inf <= 1e-10 (1 + ||rhs||_inf). The direct
/// solver falls back to the Schur-complement iteration if it cannot meet it.
MixedSolution solve(const SaddleSystem& system, SolverKind kind = SolverKind::direct);

/// project_f + assemble + solve.
MixedSolution solve_problem(const MeshPtr& mesh, const ProblemSpec& problem,
                            SolverKind kind = SolverKind::direct);

/// The field of `coarse` written in the flux basis of a refinement `fine`
/// (RT0 spaces are nested). Displacement is copied from the ancestor and
/// f_h is taken from `fine_f_h`.
MixedSolution prolongate(const MixedSolution& coarse, const MeshPtr& fine, std::span<const double> fine_f_h);

/// max_T |div p_h|_T + f_h|_T|.
double divergence_defect(const MixedSolution& sol);

/// ||A^{-1/2}(q1 - q2)||^2 for two solutions on nested meshes (`fine` refines `coarse`).
double flux_difference2(const MixedSolution& fine, const MixedSolution& coarse, const ProblemSpec& problem);

}  // namespace amfem

#endif
