#include "amfem/estimate.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "amfem/quadrature.hpp"

namespace amfem {

namespace {

void check_match(const Mesh& mesh, const MixedSolution& sol) {
  if (static_cast<int>(sol.p.size()) != mesh.num_edges() || static_cast<int>(sol.u.size()) != mesh.num_elements() ||
      static_cast<int>(sol.f_h.size()) != mesh.num_elements())
    throw Error(ErrorCode::mesh, "solution does not belong to this mesh");
}

/// Samples of one element at the degree-4 points.
struct ElementSamples {
  std::array<Point, 6> x;
  std::array<double, 6> w;  // includes |T|
};

ElementSamples element_samples(const Mesh& mesh, int e) {
  ElementSamples s;
  const auto rule = quad::triangle_deg4();
  for (std::size_t q = 0; q < rule.size(); ++q) {
    s.x[q] = quad::map(rule[q], mesh.vertex(e, 0), mesh.vertex(e, 1), mesh.vertex(e, 2));
    s.w[q] = rule[q].w * mesh.area(e);
  }
  return s;
}

/// ||g - Pi_1 g||^2 in the discrete inner product of the degree-4 rule.
double p1_remainder2(const Mesh& mesh, int e, const ElementSamples& s, const std::array<double, 6>& g) {
  const Point c = mesh.centroid(e);
  const double h = mesh.h(e);
  std::array<std::array<double, 3>, 6> phi;
  for (int q = 0; q < 6; ++q) phi[q] = {1.0, (s.x[q].x - c.x) / h, (s.x[q].y - c.y) / h};
  double gram[3][3] = {}, rhs[3] = {};
  for (int q = 0; q < 6; ++q)
    for (int i = 0; i < 3; ++i) {
      rhs[i] += s.w[q] * g[q] * phi[q][i];
      for (int j = 0; j < 3; ++j) gram[i][j] += s.w[q] * phi[q][i] * phi[q][j];
    }
  const double det = gram[0][0] * (gram[1][1] * gram[2][2] - gram[1][2] * gram[2][1]) -
                     gram[0][1] * (gram[1][0] * gram[2][2] - gram[1][2] * gram[2][0]) +
                     gram[0][2] * (gram[1][0] * gram[2][1] - gram[1][1] * gram[2][0]);
  const double scale = gram[0][0] * gram[1][1] * gram[2][2];
  if (!(det > 1e-10 * scale)) throw Error(ErrorCode::mesh, "ill-conditioned local mass matrix on element " + std::to_string(e));
  // Cramer's rule
  auto solve_col = [&](int col) {
    double m[3][3];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) m[i][j] = j == col ? rhs[i] : gram[i][j];
    return (m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
            m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])) /
           det;
  };
  const double c0 = solve_col(0), c1 = solve_col(1), c2 = solve_col(2);
  double rem = 0.0;
  for (int q = 0; q < 6; ++q) {
    const double r = g[q] - (c0 * phi[q][0] + c1 * phi[q][1] + c2 * phi[q][2]);
    rem += s.w[q] * r * r;
  }
  return rem;
}

/// int_E J^2 and int_E (J - Pi_2 J)^2 from 4-point Gauss samples.
std::pair<double, double> edge_norms(double length, const std::vector<double>& jump) {
  const auto rule = quad::gauss4();
  double full = 0.0;
  double coef[3] = {}, norm2[3] = {};
  for (std::size_t q = 0; q < rule.size(); ++q) {
    const double t = rule[q].t;
    const double leg[3] = {1.0, 2.0 * t - 1.0, 6.0 * t * t - 6.0 * t + 1.0};
    full += rule[q].w * jump[q] * jump[q];
    for (int k = 0; k < 3; ++k) {
      coef[k] += rule[q].w * jump[q] * leg[k];
      norm2[k] += rule[q].w * leg[k] * leg[k];
    }
  }
  double rem = 0.0;
  for (std::size_t q = 0; q < rule.size(); ++q) {
    const double t = rule[q].t;
    const double leg[3] = {1.0, 2.0 * t - 1.0, 6.0 * t * t - 6.0 * t + 1.0};
    double r = jump[q];
    for (int k = 0; k < 3; ++k) r -= coef[k] / norm2[k] * leg[k];
    rem += rule[q].w * r * r;
  }
  return {length * full, length * rem};
}

struct EdgeNorms {
  std::vector<double> full;
  std::vector<double> remainder;
};

EdgeNorms all_edge_norms(const Mesh& mesh, const MixedSolution& sol, const ProblemSpec& problem) {
  EdgeNorms n;
  n.full.resize(mesh.num_edges());
  n.remainder.resize(mesh.num_edges());
  for (int id = 0; id < mesh.num_edges(); ++id) {
    const auto [f, r] = edge_norms(mesh.edge_length(id), tangential_jump(mesh, sol, problem, id));
    n.full[id] = f;
    n.remainder[id] = r;
  }
  return n;
}

IndicatorReport indicators(const Mesh& mesh, const MixedSolution& sol, const ProblemSpec& problem,
                           EstimatorKind kind, double kappa) {
  check_match(mesh, sol);
  IndicatorReport rep;
  rep.kind = kind;
  rep.kappa = kappa;
  const int n = mesh.num_elements();
  rep.data.resize(n);
  rep.curl.resize(n);
  rep.jump.resize(n);
  rep.displacement.assign(n, 0.0);
  rep.h.resize(n);
  rep.local.resize(n);
  const EdgeNorms edges = all_edge_norms(mesh, sol, problem);

  for (int e = 0; e < n; ++e) {
    const Cell cell{mesh, e};
    const double h = mesh.h(e);
    const double h2 = mesh.area(e);
    const auto s = element_samples(mesh, e);
    const LocalFlux q = sol.flux(e);
    double data = 0.0, curl = 0.0, disp = 0.0;
    for (int k = 0; k < 6; ++k) {
      const double fx = problem.f(s.x[k], cell);
      const Vec2 qx = q(s.x[k]);
      const double r = kind == EstimatorKind::stress ? fx - sol.f_h[e] : fx + q.div();
      data += s.w[k] * r * r;
      const double c = dot(problem.curl_a_inv(s.x[k], cell), qx);
      curl += s.w[k] * c * c;
      if (kind == EstimatorKind::full) {
        const Vec2 v = problem.a_inv(s.x[k], cell) * qx;  // grad_h u_h = 0 for P0
        disp += s.w[k] * dot(v, v);
      }
    }
    double jump = 0.0;
    for (int i = 0; i < 3; ++i) jump += edges.full[mesh.edge_of(e, i)];
    rep.h[e] = h;
    rep.data[e] = (kind == EstimatorKind::stress ? h2 : std::pow(h2, kappa)) * data;
    rep.curl[e] = h2 * curl;
    rep.jump[e] = h * jump;
    rep.displacement[e] = h2 * disp;
    rep.local[e] = rep.data[e] + rep.curl[e] + rep.jump[e] + rep.displacement[e];
  }
  for (double v : rep.local) rep.total += v;
  return rep;
}

}  // namespace

double IndicatorReport::sum_over(std::span<const int> ids) const {
  std::vector<int> sorted(ids.begin(), ids.end());
  std::sort(sorted.begin(), sorted.end());
  double s = 0.0;
  for (int id : sorted) s += local.at(id);
  return s;
}

IndicatorReport indicators_stress(const Mesh& mesh, const MixedSolution& sol, const ProblemSpec& problem) {
  return indicators(mesh, sol, problem, EstimatorKind::stress, 1.0);
}

IndicatorReport indicators_full(const Mesh& mesh, const MixedSolution& sol, const ProblemSpec& problem,
                                double kappa) {
  if (!(kappa >= 0.0 && kappa <= 1.0)) throw Error(ErrorCode::config, "kappa must lie in [0, 1]");
  return indicators(mesh, sol, problem, EstimatorKind::full, kappa);
}

std::vector<double> tangential_jump(const Mesh& mesh, const MixedSolution& sol, const ProblemSpec& problem, int edge) {
  check_match(mesh, sol);
  if (edge < 0 || edge >= mesh.num_edges()) throw Error(ErrorCode::mesh, "edge id " + std::to_string(edge) + " out of range");
  const Edge& E = mesh.edge(edge);
  const Point a = mesh.vertices()[E.v[0]];
  const Point b = mesh.vertices()[E.v[1]];
  const Vec2 tau = mesh.edge_tangent(edge);
  std::vector<double> out;
  out.reserve(4);
  for (const auto& q : quad::gauss4()) {
    const Point x = quad::map(q, a, b);
    double j = 0.0;
    if (E.boundary()) {
      const int e = E.any_element();
      j = dot(problem.a_inv(x, Cell{mesh, e}) * sol.flux(e)(x), tau);
      if (problem.grad_g) j -= dot(problem.grad_g(x), tau);
    } else {
      const int plus = E.elem[0], minus = E.elem[1];
      j = dot(problem.a_inv(x, Cell{mesh, plus}) * sol.flux(plus)(x), tau) -
          dot(problem.a_inv(x, Cell{mesh, minus}) * sol.flux(minus)(x), tau);
    }
    out.push_back(j);
  }
  return out;
}

OscReport oscillations(const Mesh& mesh, const MixedSolution& sol, const ProblemSpec& problem) {
  check_match(mesh, sol);
  const int n = mesh.num_elements();
  OscReport rep;
  rep.curl.resize(n);
  rep.jump.resize(n);
  rep.data.resize(n);
  rep.displacement.resize(n);
  rep.local.resize(n);
  const EdgeNorms edges = all_edge_norms(mesh, sol, problem);
  for (int e = 0; e < n; ++e) {
    const Cell cell{mesh, e};
    const double h2 = mesh.area(e);
    const auto s = element_samples(mesh, e);
    const LocalFlux q = sol.flux(e);
    std::array<double, 6> curl{}, vx{}, vy{};
    double data = 0.0;
    for (int k = 0; k < 6; ++k) {
      const Vec2 qx = q(s.x[k]);
      curl[k] = dot(problem.curl_a_inv(s.x[k], cell), qx);
      const Vec2 v = problem.a_inv(s.x[k], cell) * qx;
      vx[k] = v.x;
      vy[k] = v.y;
      const double r = problem.f(s.x[k], cell) - sol.f_h[e];
      data += s.w[k] * r * r;
    }
    double jump = 0.0;
    for (int i = 0; i < 3; ++i) jump += edges.remainder[mesh.edge_of(e, i)];
    rep.curl[e] = h2 * p1_remainder2(mesh, e, s, curl);
    rep.jump[e] = std::sqrt(h2) * jump;
    rep.data[e] = h2 * data;
    rep.displacement[e] = h2 * (p1_remainder2(mesh, e, s, vx) + p1_remainder2(mesh, e, s, vy));
    rep.local[e] = rep.curl[e] + rep.jump[e] + rep.data[e];
  }
  for (int e = 0; e < n; ++e) {
    rep.osc2 += rep.local[e];
    rep.osc_f2 += rep.data[e];
    rep.osc_tilde2 += rep.curl[e] + rep.jump[e] + rep.displacement[e];
  }
  return rep;
}

std::vector<double> data_oscillation(const ScalarField& f, const Mesh& mesh) {
  const auto mean = project_f(f, mesh);
  std::vector<double> out(mesh.num_elements());
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const Cell cell{mesh, e};
    const auto s = element_samples(mesh, e);
    double sum = 0.0;
    for (int k = 0; k < 6; ++k) {
      const double r = f(s.x[k], cell) - mean[e];
      sum += s.w[k] * r * r;
    }
    out[e] = mesh.area(e) * sum;
  }
  return out;
}

double piecewise_oscillation2(const Mesh& fine, std::span<const double> values, const Mesh& coarse) {
  const auto parent = ancestor_map(fine, coarse);
  std::vector<double> mean(coarse.num_elements(), 0.0);
  for (int e = 0; e < fine.num_elements(); ++e) mean[parent[e]] += fine.area(e) * values[e];
  for (int c = 0; c < coarse.num_elements(); ++c) mean[c] /= coarse.area(c);
  double sum = 0.0;
  for (int e = 0; e < fine.num_elements(); ++e) {
    const double d = values[e] - mean[parent[e]];
    sum += coarse.area(parent[e]) * fine.area(e) * d * d;
  }
  return sum;
}

}  // namespace amfem
