#include "amfem/fem.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include "amfem/quadrature.hpp"

namespace amfem {

namespace {

constexpr double kResidualTol = 1e-10;

/// s (x - z) / (2|T|) for the basis function of local edge i.
Vec2 basis(const Mesh& mesh, int e, int i, Point x) {
  const double s = mesh.edge_sign(e, i) / (2.0 * mesh.area(e));
  return s * (x - mesh.vertex(e, i));
}

Eigen::VectorXd residual(const SaddleSystem& sys, const Eigen::VectorXd& p, const Eigen::VectorXd& u) {
  const auto nf = sys.m.rows();
  Eigen::VectorXd r(nf + sys.b.rows());
  r.head(nf) = sys.rhs_flux - sys.m * p - sys.b.transpose() * u;
  r.tail(sys.b.rows()) = sys.rhs_div - sys.b * p;
  return r;
}

double rhs_scale(const SaddleSystem& sys) {
  double s = 0.0;
  if (sys.rhs_flux.size()) s = std::max(s, sys.rhs_flux.cwiseAbs().maxCoeff());
  if (sys.rhs_div.size()) s = std::max(s, sys.rhs_div.cwiseAbs().maxCoeff());
  return s;
}

/// max_T |(rhs_div - B p)_T| / |T|, the divergence equation in pointwise units.
double scaled_div_residual(const SaddleSystem& sys, const Eigen::VectorXd& p) {
  const Eigen::VectorXd r = sys.rhs_div - sys.b * p;
  double worst = 0.0;
  for (Eigen::Index t = 0; t < r.size(); ++t) worst = std::max(worst, std::abs(r[t]) / sys.mesh->area(static_cast<int>(t)));
  return worst;
}

double div_target(const SaddleSystem& sys) {
  double fmax = 0.0;
  for (double v : sys.f_h) fmax = std::max(fmax, std::abs(v));
  return 1e-11 * (1.0 + fmax);
}

bool solve_direct(const SaddleSystem& sys, Eigen::VectorXd& p, Eigen::VectorXd& u, double tol) {
  const int nf = static_cast<int>(sys.m.rows());
  const int nd = static_cast<int>(sys.b.rows());
  // symmetric diagonal scaling (flux dofs by the M diagonal, each divergence
  // row by its largest scaled entry) so that the tiny elements of graded
  // meshes are not left to roundoff
  Eigen::VectorXd s(nf + nd);
  for (int i = 0; i < nf; ++i) s[i] = 1.0 / std::sqrt(sys.m.coeff(i, i));
  Eigen::VectorXd rmax = Eigen::VectorXd::Zero(nd);
  for (int k = 0; k < sys.b.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(sys.b, k); it; ++it)
      rmax[it.row()] = std::max(rmax[it.row()], std::abs(it.value()) * s[it.col()]);
  for (int t = 0; t < nd; ++t) s[nf + t] = 1.0 / rmax[t];
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(sys.m.nonZeros() + 2 * sys.b.nonZeros());
  for (int k = 0; k < sys.m.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(sys.m, k); it; ++it) {
      const int i = static_cast<int>(it.row()), j = static_cast<int>(it.col());
      trip.emplace_back(i, j, s[i] * it.value() * s[j]);
    }
  for (int k = 0; k < sys.b.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(sys.b, k); it; ++it) {
      const int t = nf + static_cast<int>(it.row()), j = static_cast<int>(it.col());
      const double v = s[t] * it.value() * s[j];
      trip.emplace_back(t, j, v);
      trip.emplace_back(j, t, v);
    }
  Eigen::SparseMatrix<double> k(nf + nd, nf + nd);
  k.setFromTriplets(trip.begin(), trip.end());
  k.makeCompressed();

  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  lu.analyzePattern(k);
  lu.factorize(k);
  if (lu.info() != Eigen::Success) return false;

  auto scaled_solve = [&](const Eigen::VectorXd& r) -> Eigen::VectorXd {
    return s.cwiseProduct(lu.solve(Eigen::VectorXd(s.cwiseProduct(r))));
  };
  Eigen::VectorXd rhs(nf + nd);
  rhs << sys.rhs_flux, sys.rhs_div;
  Eigen::VectorXd x = scaled_solve(rhs);
  if (lu.info() != Eigen::Success || !x.allFinite()) return false;
  const double div_tol = div_target(sys);
  for (int it = 0; it < 4; ++it) {
    p = x.head(nf);
    u = x.tail(nd);
    const Eigen::VectorXd r = residual(sys, p, u);
    if (r.cwiseAbs().maxCoeff() <= 0.01 * tol && scaled_div_residual(sys, p) <= div_tol) break;
    x += scaled_solve(r);
  }
  p = x.head(nf);
  u = x.tail(nd);
  return residual(sys, p, u).cwiseAbs().maxCoeff() <= tol;
}

/// CG on the Schur complement B M^{-1} B^T u = B M^{-1} F - G.
bool solve_schur(const SaddleSystem& sys, Eigen::VectorXd& p, Eigen::VectorXd& u, double tol) {
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> chol(sys.m);
  if (chol.info() != Eigen::Success) return false;
  auto apply_s = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
    return sys.b * chol.solve(Eigen::VectorXd(sys.b.transpose() * v));
  };
  const Eigen::VectorXd minv_f = chol.solve(sys.rhs_flux);
  const Eigen::VectorXd rhs = sys.b * minv_f - sys.rhs_div;
  const auto n = rhs.size();
  u = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd r = rhs;
  Eigen::VectorXd d = r;
  double rr = r.squaredNorm();
  const double stop = 1e-28 * std::max(1.0, rhs.squaredNorm());
  for (Eigen::Index it = 0; it < 10 * n + 100 && rr > stop; ++it) {
    const Eigen::VectorXd sd = apply_s(d);
    const double alpha = rr / d.dot(sd);
    u += alpha * d;
    r -= alpha * sd;
    const double rr_new = r.squaredNorm();
    d = r + (rr_new / rr) * d;
    rr = rr_new;
  }
  p = chol.solve(Eigen::VectorXd(sys.rhs_flux - sys.b.transpose() * u));
  return p.allFinite() && u.allFinite() && residual(sys, p, u).cwiseAbs().maxCoeff() <= tol;
}

/// Sum of the signed edge fluxes of element e, accumulated in local edge order.
double flux_sum(const Mesh& mesh, int e, const double* p) {
  double s = 0.0;
  for (int i = 0; i < 3; ++i) s += mesh.edge_sign(e, i) * p[mesh.edge_of(e, i)];
  return s;
}

/// Moves the floating-point defect of every divergence row towards the
/// boundary so that each element's flux sum reproduces its right-hand side to
/// the last bit where the format allows. Elements are visited in reverse
/// breadth-first order from the boundary; an element may adjust any edge whose
/// other side is the boundary or a not yet visited element, preferring the
/// smallest coefficient (finest ulp). Changes are a few ulps.
void enforce_divergence(const SaddleSystem& sys, Eigen::VectorXd& p) {
  const Mesh& mesh = *sys.mesh;
  const int n = mesh.num_elements();
  std::vector<int> order;
  order.reserve(n);
  std::vector<char> seen(n, 0);
  for (int e = 0; e < n; ++e)
    for (int i = 0; i < 3; ++i)
      if (mesh.edge(mesh.edge_of(e, i)).boundary()) {
        seen[e] = 1;
        order.push_back(e);
        break;
      }
  for (std::size_t head = 0; head < order.size(); ++head) {
    const int e = order[head];
    for (int i = 0; i < 3; ++i) {
      const Edge& edge = mesh.edge(mesh.edge_of(e, i));
      if (edge.boundary()) continue;
      const int nb = edge.elem[0] == e ? edge.elem[1] : edge.elem[0];
      if (seen[nb]) continue;
      seen[nb] = 1;
      order.push_back(nb);
    }
  }
  std::vector<char> done(n, 0);
  double* x = p.data();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const int e = *it;
    done[e] = 1;
    const double target = sys.rhs_div[e];
    double best_gap = std::abs(flux_sum(mesh, e, x) - target);
    if (best_gap == 0.0) continue;
    std::array<int, 3> free_local{};
    int n_free = 0;
    for (int i = 0; i < 3; ++i) {
      const Edge& edge = mesh.edge(mesh.edge_of(e, i));
      const int nb = edge.elem[0] == e ? edge.elem[1] : edge.elem[0];
      if (nb < 0 || !done[nb]) free_local[n_free++] = i;
    }
    std::sort(free_local.begin(), free_local.begin() + n_free, [&](int a, int b) {
      return std::abs(x[mesh.edge_of(e, a)]) < std::abs(x[mesh.edge_of(e, b)]);
    });
    for (int f = 0; f < n_free && best_gap > 0.0; ++f) {
      const int id = mesh.edge_of(e, free_local[f]);
      const double sign = mesh.edge_sign(e, free_local[f]);
      const double start = x[id];
      double best = start;
      // first-order update, then a short ulp search around it
      double cand = start + sign * (target - flux_sum(mesh, e, x));
      for (int step = 0; step < 8; ++step) {
        x[id] = cand;
        const double gap = flux_sum(mesh, e, x) - target;
        if (std::abs(gap) < best_gap) {
          best_gap = std::abs(gap);
          best = cand;
        }
        if (gap == 0.0) break;
        cand = std::nextafter(cand, (gap * sign > 0.0) ? -HUGE_VAL : HUGE_VAL);
      }
      x[id] = best;
    }
  }

  // Leftover defects are single ulps that no free edge of the element could
  // absorb. Walk them, one exact edge update at a time, to the boundary.
  for (int start = 0; start < n; ++start) {
    if (flux_sum(mesh, start, x) == sys.rhs_div[start]) continue;
    std::vector<std::pair<int, double>> undo;
    std::vector<int> visited{start};
    int cur = start;
    bool closed = false;
    for (int step = 0; step < 256 && !closed; ++step) {
      std::array<int, 3> cand{0, 1, 2};
      std::sort(cand.begin(), cand.end(), [&](int a, int b) {
        const bool ba = mesh.edge(mesh.edge_of(cur, a)).boundary(), bb = mesh.edge(mesh.edge_of(cur, b)).boundary();
        if (ba != bb) return ba;
        return std::abs(x[mesh.edge_of(cur, a)]) < std::abs(x[mesh.edge_of(cur, b)]);
      });
      int next = -2;
      for (int i : cand) {
        const int id = mesh.edge_of(cur, i);
        const Edge& edge = mesh.edge(id);
        const int nb = edge.elem[0] == cur ? edge.elem[1] : edge.elem[0];
        if (nb >= 0 && std::find(visited.begin(), visited.end(), nb) != visited.end()) continue;
        const double sign = mesh.edge_sign(cur, i);
        const double old_value = x[id];
        double v = old_value + sign * (sys.rhs_div[cur] - flux_sum(mesh, cur, x));
        bool hit = false;
        for (int k = 0; k < 8; ++k) {
          x[id] = v;
          const double gap = flux_sum(mesh, cur, x) - sys.rhs_div[cur];
          if (gap == 0.0) {
            hit = true;
            break;
          }
          v = std::nextafter(v, (gap * sign > 0.0) ? -HUGE_VAL : HUGE_VAL);
        }
        if (!hit) {
          x[id] = old_value;
          continue;
        }
        undo.emplace_back(id, old_value);
        next = nb;
        break;
      }
      if (next == -2) break;
      if (next < 0 || flux_sum(mesh, next, x) == sys.rhs_div[next]) {
        closed = true;
        break;
      }
      visited.push_back(next);
      cur = next;
    }
    if (!closed)
      for (auto it = undo.rbegin(); it != undo.rend(); ++it) x[it->first] = it->second;
  }
}

}  // namespace

DofMap build_dofmap(const Mesh& mesh) {
  DofMap dofs;
  dofs.num_flux = mesh.num_edges();
  dofs.num_disp = mesh.num_elements();
  dofs.flux.resize(mesh.num_elements());
  dofs.sign.resize(mesh.num_elements());
  for (int e = 0; e < mesh.num_elements(); ++e)
    for (int i = 0; i < 3; ++i) {
      dofs.flux[e][i] = mesh.edge_of(e, i);
      dofs.sign[e][i] = mesh.edge_sign(e, i);
    }
  return dofs;
}

LocalFlux local_flux(const Mesh& mesh, int e, std::span<const double> coeffs) {
  LocalFlux q;
  q.center = mesh.centroid(e);
  const double scale = 1.0 / (2.0 * mesh.area(e));
  for (int i = 0; i < 3; ++i) {
    const double c = coeffs[mesh.edge_of(e, i)] * mesh.edge_sign(e, i) * scale;
    q.value = q.value + c * (q.center - mesh.vertex(e, i));
    q.d += c;
  }
  return q;
}

std::vector<double> project_f(const ScalarField& f, const Mesh& mesh) {
  std::vector<double> values(mesh.num_elements());
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const Cell cell{mesh, e};
    double sum = 0.0;
    double first = 0.0;
    bool constant = true;
    int k = 0;
    for (const auto& q : quad::triangle_deg4()) {
      const Point x = quad::map(q, mesh.vertex(e, 0), mesh.vertex(e, 1), mesh.vertex(e, 2));
      const double v = f(x, cell);
      if (!std::isfinite(v)) {
        std::ostringstream os;
        os << "source is not finite at (" << x.x << ", " << x.y << ")";
        throw Error(ErrorCode::config, os.str());
      }
      if (k++ == 0) first = v;
      constant = constant && v == first;
      sum += q.w * v;
    }
    // constants are reproduced exactly, so f - f_h vanishes identically
    values[e] = constant ? first : sum;
  }
  return values;
}

SaddleSystem assemble(const MeshPtr& mesh_ptr, const ProblemSpec& problem, const DofMap& dofs,
                      std::span<const double> f_h) {
  const Mesh& mesh = *mesh_ptr;
  if (static_cast<int>(f_h.size()) != mesh.num_elements() || dofs.num_flux != mesh.num_edges())
    throw Error(ErrorCode::mesh, "assemble: data sizes do not match the mesh");
  SaddleSystem sys;
  sys.mesh = mesh_ptr;
  sys.f_h.assign(f_h.begin(), f_h.end());
  sys.rhs_flux = Eigen::VectorXd::Zero(dofs.num_flux);
  sys.rhs_div = Eigen::VectorXd::Zero(dofs.num_disp);

  std::vector<Eigen::Triplet<double>> mt, bt;
  mt.reserve(9 * mesh.num_elements());
  bt.reserve(3 * mesh.num_elements());
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const Cell cell{mesh, e};
    const double area = mesh.area(e);
    double local[3][3] = {};
    for (const auto& q : quad::triangle_deg4()) {
      const Point x = quad::map(q, mesh.vertex(e, 0), mesh.vertex(e, 1), mesh.vertex(e, 2));
      const Mat2 ainv = problem.a_inv(x, cell);
      if (!ainv.is_spd()) {
        std::ostringstream os;
        os << "A^{-1} is not symmetric positive definite at (" << x.x << ", " << x.y << ")";
        throw Error(ErrorCode::config, os.str());
      }
      Vec2 phi[3];
      for (int i = 0; i < 3; ++i) phi[i] = basis(mesh, e, i, x);
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) local[i][j] += q.w * area * dot(phi[i], ainv * phi[j]);
    }
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) mt.emplace_back(dofs.flux[e][i], dofs.flux[e][j], local[i][j]);
      // int_T div phi_i = +-1
      bt.emplace_back(e, dofs.flux[e][i], static_cast<double>(dofs.sign[e][i]));
    }
    sys.rhs_div[e] = -area * f_h[e];
  }
  // natural boundary term int_{dOmega} g phi.nu
  for (int id = 0; id < mesh.num_edges(); ++id) {
    const Edge& edge = mesh.edge(id);
    if (!edge.boundary()) continue;
    const int side = edge.elem[0] >= 0 ? 0 : 1;
    const Point a = mesh.vertices()[edge.v[0]];
    const Point b = mesh.vertices()[edge.v[1]];
    double mean = 0.0;
    for (const auto& q : quad::gauss4()) mean += q.w * problem.g(quad::map(q, a, b));
    sys.rhs_flux[id] = (side == 0 ? 1.0 : -1.0) * mean;
  }
  sys.m.resize(dofs.num_flux, dofs.num_flux);
  sys.m.setFromTriplets(mt.begin(), mt.end());
  sys.b.resize(dofs.num_disp, dofs.num_flux);
  sys.b.setFromTriplets(bt.begin(), bt.end());
  return sys;
}

MixedSolution solve(const SaddleSystem& sys, SolverKind kind) {
  const double tol = kResidualTol * (1.0 + rhs_scale(sys));
  Eigen::VectorXd p, u;
  bool ok = false;
  if (kind == SolverKind::direct) ok = solve_direct(sys, p, u, tol);
  if (!ok) ok = solve_schur(sys, p, u, tol);
  if (!ok) throw Error(ErrorCode::solver, "saddle-point solve failed: singular system or residual above tolerance");
  enforce_divergence(sys, p);

  MixedSolution sol;
  sol.mesh = sys.mesh;
  sol.p.assign(p.data(), p.data() + p.size());
  sol.u.assign(u.data(), u.data() + u.size());
  sol.f_h = sys.f_h;
  sol.residual = residual(sys, p, u).cwiseAbs().maxCoeff();
  sol.div_defect = divergence_defect(sol);
  return sol;
}

MixedSolution solve_problem(const MeshPtr& mesh, const ProblemSpec& problem, SolverKind kind) {
  const auto f_h = project_f(problem.f, *mesh);
  return solve(assemble(mesh, problem, build_dofmap(*mesh), f_h), kind);
}

MixedSolution prolongate(const MixedSolution& coarse, const MeshPtr& fine, std::span<const double> fine_f_h) {
  const auto parent = ancestor_map(*fine, *coarse.mesh);
  MixedSolution out;
  out.mesh = fine;
  out.f_h.assign(fine_f_h.begin(), fine_f_h.end());
  out.p.resize(fine->num_edges());
  out.u.resize(fine->num_elements());
  for (int e = 0; e < fine->num_elements(); ++e) out.u[e] = coarse.u[parent[e]];
  for (int id = 0; id < fine->num_edges(); ++id) {
    const Edge& edge = fine->edge(id);
    const Point a = fine->vertices()[edge.v[0]];
    const Point b = fine->vertices()[edge.v[1]];
    // the normal component of an RT0 field is constant along any line
    const LocalFlux q = coarse.flux(parent[edge.any_element()]);
    out.p[id] = dot(q(midpoint(a, b)), fine->edge_normal(id)) * fine->edge_length(id);
  }
  out.div_defect = divergence_defect(out);
  return out;
}

double divergence_defect(const MixedSolution& sol) {
  const Mesh& mesh = *sol.mesh;
  double worst = 0.0;
  for (int e = 0; e < mesh.num_elements(); ++e)
    worst = std::max(worst, std::abs(flux_sum(mesh, e, sol.p.data()) / mesh.area(e) + sol.f_h[e]));
  return worst;
}

double flux_difference2(const MixedSolution& fine, const MixedSolution& coarse, const ProblemSpec& problem) {
  const Mesh& mesh = *fine.mesh;
  const auto parent = ancestor_map(mesh, *coarse.mesh);
  double sum = 0.0;
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const Cell cell{mesh, e};
    const LocalFlux qf = fine.flux(e);
    const LocalFlux qc = coarse.flux(parent[e]);
    double local = 0.0;
    for (const auto& q : quad::triangle_deg5()) {
      const Point x = quad::map(q, mesh.vertex(e, 0), mesh.vertex(e, 1), mesh.vertex(e, 2));
      const Vec2 diff = qf(x) - qc(x);
      local += q.w * dot(diff, problem.a_inv(x, cell) * diff);
    }
    sum += local * mesh.area(e);
  }
  return sum;
}

}  // namespace amfem
