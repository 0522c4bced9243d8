#include "amfem/problems.hpp"

#include <charconv>
#include <memory>
#include <numbers>
#include <sstream>

#include "amfem/fem.hpp"
#include "amfem/quadrature.hpp"

namespace amfem {

namespace {

using std::numbers::pi;

MatrixField constant_matrix(double s) {
  return [s](Point, const Cell&) { return Mat2::identity(s); };
}

VectorField zero_vector() {
  return [](Point, const Cell&) { return Vec2{}; };
}

ProblemSpec square_sine() {
  ProblemSpec p;
  p.name = "square_sine";
  p.domain = Domain::unit_square;
  p.a = constant_matrix(1.0);
  p.a_inv = constant_matrix(1.0);
  p.curl_a_inv = zero_vector();
  p.f = [](Point x, const Cell&) { return 2.0 * pi * pi * std::sin(pi * x.x) * std::sin(pi * x.y); };
  p.g = [](Point) { return 0.0; };
  ExactSolution ex;
  ex.u = [](Point x) { return std::sin(pi * x.x) * std::sin(pi * x.y); };
  ex.p = [](Point x) {
    return Vec2{pi * std::cos(pi * x.x) * std::sin(pi * x.y), pi * std::sin(pi * x.x) * std::cos(pi * x.y)};
  };
  ex.div_p = [](Point x) { return -2.0 * pi * pi * std::sin(pi * x.x) * std::sin(pi * x.y); };
  p.exact = std::move(ex);
  return p;
}

ProblemSpec square_pwconst() {
  ProblemSpec p;
  p.name = "square_pwconst";
  p.domain = Domain::unit_square;
  p.a = constant_matrix(1.0);
  p.a_inv = constant_matrix(1.0);
  p.curl_a_inv = zero_vector();
  p.f = [](Point, const Cell& c) { return c.root() == 0 ? 1.0 : -1.0; };
  p.g = [](Point) { return 0.0; };
  p.f_piecewise_constant = true;
  return p;
}

/// Polar angle on the L-shape, in [0, 3pi/2] with the reentrant corner at the origin.
double lshape_angle(Point x) {
  double phi = std::atan2(x.y, x.x);
  if (phi < 0.0) phi += 2.0 * pi;
  return phi;
}

double lshape_u(Point x) {
  const double r = std::hypot(x.x, x.y);
  if (r == 0.0) return 0.0;
  return std::pow(r, 2.0 / 3.0) * std::sin(2.0 * lshape_angle(x) / 3.0);
}

Vec2 lshape_grad(Point x) {
  const double r = std::hypot(x.x, x.y);
  const double phi = lshape_angle(x);
  const double s = 2.0 / 3.0 * std::pow(r, -1.0 / 3.0);
  return Vec2{-s * std::sin(phi / 3.0), s * std::cos(phi / 3.0)};
}

ProblemSpec lshape_singular() {
  ProblemSpec p;
  p.name = "lshape_singular";
  p.domain = Domain::lshape;
  p.a = constant_matrix(1.0);
  p.a_inv = constant_matrix(1.0);
  p.curl_a_inv = zero_vector();
  p.f = [](Point, const Cell&) { return 0.0; };
  p.g = lshape_u;
  p.grad_g = lshape_grad;
  p.f_piecewise_constant = true;
  ExactSolution ex;
  ex.u = lshape_u;
  ex.p = lshape_grad;
  ex.div_p = [](Point) { return 0.0; };
  p.exact = std::move(ex);
  return p;
}

/// a = 1 on the macro cells (0,0), (1,1) and 100 on (1,0), (0,1).
double checkerboard_value(int root) {
  const int cell = root / 2;
  return ((cell % 2) + (cell / 2)) % 2 == 0 ? 1.0 : 100.0;
}

ProblemSpec checkerboard() {
  ProblemSpec p;
  p.name = "checkerboard";
  p.domain = Domain::checkerboard;
  p.a = [](Point, const Cell& c) { return Mat2::identity(checkerboard_value(c.root())); };
  p.a_inv = [](Point, const Cell& c) { return Mat2::identity(1.0 / checkerboard_value(c.root())); };
  p.curl_a_inv = zero_vector();
  p.f = [](Point, const Cell&) { return 1.0; };
  p.g = [](Point) { return 0.0; };
  p.f_piecewise_constant = true;
  return p;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

/// Per-root polynomial table with a default.
struct RegionPoly {
  Poly2 fallback;
  std::map<int, Poly2> by_root;

  const Poly2& at(int root) const {
    auto it = by_root.find(root);
    return it == by_root.end() ? fallback : it->second;
  }
};

RegionPoly read_region_poly(const std::map<std::string, std::string>& kv, const std::string& key, Poly2 fallback) {
  RegionPoly rp;
  rp.fallback = fallback;
  if (auto it = kv.find(key); it != kv.end()) rp.fallback = Poly2::parse(it->second);
  const std::string prefix = key + ".";
  for (const auto& [k, v] : kv) {
    if (k.rfind(prefix, 0) != 0) continue;
    const std::string idx = k.substr(prefix.size());
    int root = -1;
    auto [ptr, ec] = std::from_chars(idx.data(), idx.data() + idx.size(), root);
    if (ec != std::errc() || ptr != idx.data() + idx.size() || root < 0)
      throw Error(ErrorCode::config, "bad region index in key '" + k + "'");
    rp.by_root[root] = Poly2::parse(v);
  }
  return rp;
}

}  // namespace

std::vector<std::string> builtin_names() {
  return {"square_sine", "square_pwconst", "lshape_singular", "checkerboard"};
}

ProblemSpec builtin(std::string_view name) {
  if (name == "square_sine") return square_sine();
  if (name == "square_pwconst") return square_pwconst();
  if (name == "lshape_singular") return lshape_singular();
  if (name == "checkerboard") return checkerboard();
  throw Error(ErrorCode::config, "unknown problem '" + std::string(name) + "'");
}

Poly2 Poly2::parse(std::string_view text) {
  Poly2 p;
  std::istringstream is{std::string(text)};
  std::string tok;
  int i = 0;
  while (is >> tok) {
    if (i >= 6) throw Error(ErrorCode::config, "polynomial has more than six coefficients: '" + std::string(text) + "'");
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v))
      throw Error(ErrorCode::config, "bad polynomial coefficient '" + tok + "'");
    p.c[i++] = v;
  }
  if (i == 0) throw Error(ErrorCode::config, "empty polynomial");
  return p;
}

ProblemSpec problem_from_config(const std::map<std::string, std::string>& kv) {
  ProblemSpec p;
  auto get = [&](const std::string& key, std::string fallback) {
    auto it = kv.find(key);
    return it == kv.end() ? fallback : trim(it->second);
  };
  p.name = get("name", "custom");
  p.domain = parse_domain(get("domain", "unit_square"));
  const int regions = create_initial(p.domain)->initial_size();
  for (const auto& [k, v] : kv) {
    const auto dot = k.find('.');
    const std::string base = k.substr(0, dot);
    const bool known = base == "name" || base == "domain" || base == "dirichlet" || base == "coefficient" ||
                       base == "source";
    if (!known || (dot != std::string::npos && base != "coefficient" && base != "source"))
      throw Error(ErrorCode::config, "unknown problem key '" + k + "'");
  }
  Poly2 one;
  one.c[0] = 1.0;
  auto coef = std::make_shared<const RegionPoly>(read_region_poly(kv, "coefficient", one));
  auto src = std::make_shared<const RegionPoly>(read_region_poly(kv, "source", Poly2{}));
  for (const RegionPoly* rp : {coef.get(), src.get()})
    if (!rp->by_root.empty() && rp->by_root.rbegin()->first >= regions)
      throw Error(ErrorCode::config, "region index " + std::to_string(rp->by_root.rbegin()->first) + " exceeds the " +
                                         std::to_string(regions) + " initial triangles of the domain");
  const Poly2 dirichlet = kv.contains("dirichlet") ? Poly2::parse(kv.at("dirichlet")) : Poly2{};

  p.a = [coef](Point x, const Cell& c) { return Mat2::identity(coef->at(c.root())(x)); };
  p.a_inv = [coef](Point x, const Cell& c) { return Mat2::identity(1.0 / coef->at(c.root())(x)); };
  // A^{-1} = I / a:  c = (d_2 a, -d_1 a) / a^2
  p.curl_a_inv = [coef](Point x, const Cell& c) {
    const Poly2& a = coef->at(c.root());
    const double v = a(x);
    const Vec2 g = a.gradient(x);
    return Vec2{g.y / (v * v), -g.x / (v * v)};
  };
  p.f = [src](Point x, const Cell& c) { return src->at(c.root())(x); };
  p.g = [dirichlet](Point x) { return dirichlet(x); };
  p.grad_g = [dirichlet](Point x) { return dirichlet.gradient(x); };
  bool pw_const = true;
  auto is_const = [](const Poly2& q) {
    for (int i = 1; i < 6; ++i)
      if (q.c[i] != 0.0) return false;
    return true;
  };
  pw_const = is_const(src->fallback);
  for (const auto& [r, q] : src->by_root) pw_const = pw_const && is_const(q);
  p.f_piecewise_constant = pw_const;
  return p;
}

ProblemSpec with_piecewise_source(const ProblemSpec& problem, const MeshPtr& mesh, std::vector<double> values) {
  if (static_cast<int>(values.size()) != mesh->num_elements())
    throw Error(ErrorCode::mesh, "piecewise source size does not match the mesh");
  struct Lookup {
    LineageIndex index;
    std::vector<double> values;
  };
  auto lookup = std::make_shared<const Lookup>(Lookup{LineageIndex(*mesh), std::move(values)});
  ProblemSpec out = problem;
  out.f = [lookup](Point, const Cell& c) {
    const int e = lookup->index.find(c.mesh.lineage(c.id));
    if (e < 0) throw Error(ErrorCode::mesh, "piecewise source evaluated outside its mesh hierarchy");
    return lookup->values[e];
  };
  return out;
}

ErrorTriple exact_errors(const MixedSolution& sol, const ProblemSpec& problem, const MixedSolution* reference) {
  ErrorTriple err;
  const Mesh& mesh = *sol.mesh;
  if (reference != nullptr) {
    err.surrogate = true;
    const Mesh& ref = *reference->mesh;
    const auto parent = ancestor_map(ref, mesh);
    double flux2 = 0.0, div2 = 0.0, disp2 = 0.0;
    for (int e = 0; e < ref.num_elements(); ++e) {
      const int c = parent[e];
      const Cell cell{ref, e};
      const LocalFlux qr = reference->flux(e);
      const LocalFlux qh = sol.flux(c);
      double local = 0.0;
      for (const auto& q : quad::triangle_deg5()) {
        const Point x = quad::map(q, ref.vertex(e, 0), ref.vertex(e, 1), ref.vertex(e, 2));
        const Vec2 d = qr(x) - qh(x);
        local += q.w * dot(d, problem.a_inv(x, cell) * d);
      }
      const double area = ref.area(e);
      flux2 += local * area;
      const double dd = qr.div() - qh.div();
      div2 += mesh.area(c) * dd * dd * area;
      const double du = reference->u[e] - sol.u[c];
      disp2 += du * du * area;
    }
    err.flux = std::sqrt(flux2);
    err.div = std::sqrt(div2);
    err.disp = std::sqrt(disp2);
    return err;
  }
  if (!problem.exact) throw Error(ErrorCode::config, "problem '" + problem.name + "' has no exact solution and no reference was given");
  const ExactSolution& ex = *problem.exact;
  double flux2 = 0.0, div2 = 0.0, disp2 = 0.0;
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const Cell cell{mesh, e};
    const LocalFlux qh = sol.flux(e);
    const double div_h = qh.div();
    double lf = 0.0, ld = 0.0, lu = 0.0;
    for (const auto& q : quad::triangle_deg5()) {
      const Point x = quad::map(q, mesh.vertex(e, 0), mesh.vertex(e, 1), mesh.vertex(e, 2));
      const Vec2 d = ex.p(x) - qh(x);
      lf += q.w * dot(d, problem.a_inv(x, cell) * d);
      const double dd = ex.div_p(x) - div_h;
      ld += q.w * dd * dd;
      const double du = ex.u(x) - sol.u[e];
      lu += q.w * du * du;
    }
    const double area = mesh.area(e);
    flux2 += lf * area;
    div2 += ld * area * area;  // h_T^2 |T|
    disp2 += lu * area;
  }
  err.flux = std::sqrt(flux2);
  err.div = std::sqrt(div2);
  err.disp = std::sqrt(disp2);
  return err;
}

}  // namespace amfem
