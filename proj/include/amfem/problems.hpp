#ifndef AMFEM_PROBLEMS_HPP
#define AMFEM_PROBLEMS_HPP

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "amfem/common.hpp"
#include "amfem/mesh.hpp"

namespace amfem {

/// Element a field is evaluated on. Data that is only piecewise smooth
/// (per macro region, per coarse element) is resolved through the lineage,
/// which also fixes the side of an edge point.
struct Cell {
  const Mesh& mesh;
  int id;
  int root() const { return mesh.lineage(id).root; }
};

using ScalarField = std::function<double(Point, const Cell&)>;
using VectorField = std::function<Vec2(Point, const Cell&)>;
using MatrixField = std::function<Mat2(Point, const Cell&)>;

struct ExactSolution {
  std::function<double(Point)> u;
  std::function<Vec2(Point)> p;        ///< A grad u
  std::function<double(Point)> div_p;  ///< equals -f
};

/// -div(A grad u) = f in the domain, u = g on its boundary.
struct ProblemSpec {
  std::string name;
  Domain domain = Domain::unit_square;
  MatrixField a;
  MatrixField a_inv;
  /// Vector c with curl(A^{-1} q) = c . q + A^{-1} : curl q, i.e.
  /// c_j = d_1 (A^{-1})_{2j} - d_2 (A^{-1})_{1j}; zero for piecewise constant A.
  VectorField curl_a_inv;
  ScalarField f;
  std::function<double(Point)> g;
  /// Gradient of an extension of g; its tangential part enters the boundary
  /// jump term. Empty means g is constant on every boundary edge.
  std::function<Vec2(Point)> grad_g;
  std::optional<ExactSolution> exact;
  /// f is constant on every initial triangle, so osc(f, T_k) vanishes.
  bool f_piecewise_constant = false;
};

/// square_sine, square_pwconst, lshape_singular, checkerboard.
ProblemSpec builtin(std::string_view name);
std::vector<std::string> builtin_names();

/// Quadratic polynomial c0 + c1 x + c2 y + c3 x^2 + c4 xy + c5 y^2.
struct Poly2 {
  std::array<double, 6> c{};

  double operator()(Point p) const {
    return c[0] + c[1] * p.x + c[2] * p.y + c[3] * p.x * p.x + c[4] * p.x * p.y + c[5] * p.y * p.y;
  }
  Vec2 gradient(Point p) const {
    return {c[1] + 2 * c[3] * p.x + c[4] * p.y, c[2] + c[4] * p.x + 2 * c[5] * p.y};
  }
  /// Up to six whitespace separated coefficients.
  static Poly2 parse(std::string_view text);
};

/// Custom problem from flat key-value configuration:
///   domain = unit_square | lshape | checkerboard
///   coefficient = <poly>        scalar a(x) with A = a I (default 1)
///   coefficient.<root> = <poly> override on one initial triangle
///   source = <poly>, source.<root> = <poly>
///   dirichlet = <poly>          (default 0)
///   name = <label>
ProblemSpec problem_from_config(const std::map<std::string, std::string>& kv);

/// Copy of `problem` whose source is the piecewise constant `values` on
/// `mesh`; fields evaluated on refinements of `mesh` resolve by lineage.
ProblemSpec with_piecewise_source(const ProblemSpec& problem, const MeshPtr& mesh, std::vector<double> values);

struct MixedSolution;

/// Errors of the stress and displacement variables.
struct ErrorTriple {
  double flux = 0.0;  ///< ||A^{-1/2}(p - p_h)||
  double div = 0.0;   ///< ||h div(p - p_h)||, h the element weight of the solution mesh
  double disp = 0.0;  ///< ||u - u_h||
  bool surrogate = false;

  double energy2() const { return flux * flux + div * div; }
};

/// Errors against the exact solution, or against `reference` (a solution on
/// a refinement of the solution mesh) when given; the latter is flagged surrogate.
ErrorTriple exact_errors(const MixedSolution& sol, const ProblemSpec& problem,
                         const MixedSolution* reference = nullptr);

}  // namespace amfem

#endif
