#include "amfem/mesh.hpp"

#include <algorithm>
#include <charconv>
#include <deque>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace amfem {

namespace {

std::uint64_t edge_key(int a, int b) {
  const auto lo = static_cast<std::uint64_t>(std::min(a, b));
  const auto hi = static_cast<std::uint64_t>(std::max(a, b));
  return (lo << 32) | hi;
}

[[noreturn]] void mesh_error(const std::string& what) { throw Error(ErrorCode::mesh, what); }

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

/// Forest of lineages keyed by (root, path); used by ancestor lookup and overlay.
class LineageTrie {
 public:
  explicit LineageTrie(int roots) : child_(roots, {-1, -1}), leaf_(roots, -1) {}

  int insert(const Lineage& lin, int value) {
    int node = lin.root;
    for (auto slot : lin.path) {
      if (child_[node][slot] < 0) {
        child_[node][slot] = static_cast<int>(child_.size());
        child_.push_back({-1, -1});
        leaf_.push_back(-1);
      }
      node = child_[node][slot];
    }
    leaf_[node] = value;
    return node;
  }

  const std::array<int, 2>& children(int node) const { return child_[node]; }

 private:
  std::vector<std::array<int, 2>> child_;
  std::vector<int> leaf_;
};

std::shared_ptr<const InitialMesh> make_initial(Domain domain) {
  auto init = std::make_shared<InitialMesh>();
  init->domain = domain;
  switch (domain) {
    case Domain::unit_square:
      init->vertices = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
      init->triangles = {{1, 2, 0}, {3, 0, 2}};
      break;
    case Domain::lshape:
      init->vertices = {{0, 0}, {1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}, {-1, -1}, {0, -1}};
      init->triangles = {{1, 2, 0}, {3, 0, 2}, {3, 4, 0}, {5, 0, 4}, {7, 0, 6}, {5, 6, 0}};
      break;
    case Domain::checkerboard:
      for (int j = 0; j <= 2; ++j)
        for (int i = 0; i <= 2; ++i) init->vertices.push_back({0.5 * i, 0.5 * j});
      for (int j = 0; j < 2; ++j) {
        for (int i = 0; i < 2; ++i) {
          const int a = j * 3 + i, b = a + 1, c = a + 4, d = a + 3;
          init->triangles.push_back({b, c, a});
          init->triangles.push_back({d, a, c});
        }
      }
      break;
  }
  return init;
}

MeshPtr mesh_from_initial(const std::shared_ptr<const InitialMesh>& init) {
  std::vector<Lineage> lin;
  for (int r = 0; r < static_cast<int>(init->triangles.size()); ++r) lin.push_back({r, {}});
  return std::make_shared<const Mesh>(init, init->vertices, init->triangles, std::move(lin));
}

/// Rebuilds a mesh from the leaves of a lineage trie by replaying bisections.
MeshPtr build_from_trie(const std::shared_ptr<const InitialMesh>& init, const LineageTrie& trie) {
  std::vector<Point> verts = init->vertices;
  std::vector<std::array<int, 3>> tris;
  std::vector<Lineage> lins;
  std::unordered_map<std::uint64_t, int> mids;
  Lineage current;

  std::function<void(int, std::array<int, 3>)> visit = [&](int node, std::array<int, 3> t) {
    const auto& ch = trie.children(node);
    if (ch[0] < 0 && ch[1] < 0) {
      tris.push_back(t);
      lins.push_back(current);
      return;
    }
    if (ch[0] < 0 || ch[1] < 0) mesh_error("lineage forest has a half-bisected element");
    const auto key = edge_key(t[1], t[2]);
    auto it = mids.find(key);
    int m;
    if (it == mids.end()) {
      m = static_cast<int>(verts.size());
      verts.push_back(midpoint(verts[t[1]], verts[t[2]]));
      mids.emplace(key, m);
    } else {
      m = it->second;
    }
    current.path.push_back(0);
    visit(ch[0], {m, t[0], t[1]});
    current.path.back() = 1;
    visit(ch[1], {m, t[2], t[0]});
    current.path.pop_back();
  };

  for (int r = 0; r < static_cast<int>(init->triangles.size()); ++r) {
    current = Lineage{r, {}};
    visit(r, init->triangles[r]);
  }
  return std::make_shared<const Mesh>(init, std::move(verts), std::move(tris), std::move(lins));
}

}  // namespace

// ---------------------------------------------------------------------------

std::string_view to_string(Domain d) {
  switch (d) {
    case Domain::unit_square: return "unit_square";
    case Domain::lshape: return "lshape";
    case Domain::checkerboard: return "checkerboard";
  }
  return "unknown";
}

Domain parse_domain(std::string_view name) {
  if (name == "unit_square") return Domain::unit_square;
  if (name == "lshape") return Domain::lshape;
  if (name == "checkerboard") return Domain::checkerboard;
  throw Error(ErrorCode::config, "unknown domain descriptor '" + std::string(name) + "'");
}

std::string Lineage::label() const {
  std::string s = std::to_string(root) + ":";
  for (auto slot : path) s.push_back(slot ? '1' : '0');
  return s;
}

Lineage Lineage::parse_label(std::string_view label) {
  const auto colon = label.find(':');
  if (colon == std::string_view::npos) mesh_error("malformed lineage label '" + std::string(label) + "'");
  Lineage lin;
  auto [ptr, ec] = std::from_chars(label.data(), label.data() + colon, lin.root);
  if (ec != std::errc() || ptr != label.data() + colon || lin.root < 0)
    mesh_error("malformed lineage root in '" + std::string(label) + "'");
  for (char c : label.substr(colon + 1)) {
    if (c != '0' && c != '1') mesh_error("malformed lineage path in '" + std::string(label) + "'");
    lin.path.push_back(static_cast<std::uint8_t>(c - '0'));
  }
  return lin;
}

// ---------------------------------------------------------------------------

Mesh::Mesh(std::shared_ptr<const InitialMesh> initial, std::vector<Point> vertices,
           std::vector<std::array<int, 3>> triangles, std::vector<Lineage> lineage)
    : initial_(std::move(initial)),
      vertices_(std::move(vertices)),
      triangles_(std::move(triangles)),
      lineage_(std::move(lineage)) {
  if (lineage_.size() != triangles_.size()) mesh_error("lineage count does not match triangle count");
  const int nv = num_vertices();
  areas_.resize(triangles_.size());
  elem_edges_.resize(triangles_.size());
  elem_signs_.resize(triangles_.size());

  std::unordered_map<std::uint64_t, int> lookup;
  lookup.reserve(triangles_.size() * 2);
  for (int e = 0; e < num_elements(); ++e) {
    const auto& t = triangles_[e];
    for (int v : t)
      if (v < 0 || v >= nv) mesh_error("triangle " + std::to_string(e) + " references a missing vertex");
    if (lineage_[e].root < 0 || lineage_[e].root >= static_cast<int>(initial_->triangles.size()))
      mesh_error("triangle " + std::to_string(e) + " has an invalid lineage root");
    const double a2 = cross(vertices_[t[1]] - vertices_[t[0]], vertices_[t[2]] - vertices_[t[0]]);
    if (!(a2 > 0.0)) mesh_error("triangle " + std::to_string(e) + " has non-positive signed area");
    areas_[e] = 0.5 * a2;

    for (int i = 0; i < 3; ++i) {
      const int a = t[(i + 1) % 3];
      const int b = t[(i + 2) % 3];
      const auto key = edge_key(a, b);
      auto [it, inserted] = lookup.try_emplace(key, num_edges());
      if (inserted) {
        Edge edge;
        edge.v = {std::min(a, b), std::max(a, b)};
        edges_.push_back(edge);
      }
      Edge& edge = edges_[it->second];
      // counter-clockwise traversal a->b has outward normal (b-a) rotated by -90 degrees
      const int side = a < b ? 0 : 1;
      if (edge.elem[side] >= 0) mesh_error("edge shared by more than two triangles or with inconsistent orientation");
      edge.elem[side] = e;
      edge.local[side] = i;
      elem_edges_[e][i] = it->second;
      elem_signs_[e][i] = side == 0 ? 1 : -1;
    }
  }
  edge_lookup_.assign(lookup.begin(), lookup.end());
  std::sort(edge_lookup_.begin(), edge_lookup_.end());
}

int Mesh::find_edge(int a, int b) const {
  const auto key = edge_key(a, b);
  auto it = std::lower_bound(edge_lookup_.begin(), edge_lookup_.end(), std::pair<std::uint64_t, int>{key, -1});
  if (it == edge_lookup_.end() || it->first != key) return -1;
  return it->second;
}

double Mesh::diameter(int e) const {
  const auto& t = triangles_[e];
  double d = 0.0;
  for (int i = 0; i < 3; ++i) d = std::max(d, norm(vertices_[t[(i + 1) % 3]] - vertices_[t[(i + 2) % 3]]));
  return d;
}

Point Mesh::centroid(int e) const {
  const auto& t = triangles_[e];
  return (1.0 / 3.0) * (vertices_[t[0]] + vertices_[t[1]] + vertices_[t[2]]);
}

Vec2 Mesh::edge_tangent(int id) const {
  const Vec2 d = vertices_[edges_[id].v[1]] - vertices_[edges_[id].v[0]];
  return (1.0 / norm(d)) * d;
}

Vec2 Mesh::edge_normal(int id) const {
  const Vec2 t = edge_tangent(id);
  return {t.y, -t.x};
}

// ---------------------------------------------------------------------------

MeshPtr create_initial(Domain domain) {
  auto mesh = mesh_from_initial(make_initial(domain));
  if (auto bad = audit_conformity(*mesh)) mesh_error("initial mesh is not conforming: " + *bad);
  // compatibility of the refinement-edge labels: isolated two-level bisection
  // of every element must close into a conforming mesh
  for (int e = 0; e < mesh->num_elements(); ++e) {
    const int marked[] = {e};
    auto fine = refine(mesh, marked, 2).mesh;
    if (auto bad = audit_conformity(*fine))
      mesh_error("initial refinement-edge labeling is not compatible: " + *bad);
  }
  return mesh;
}

RefineResult refine(const MeshPtr& mesh, std::span<const int> marked, int bisections) {
  if (bisections < 1) throw Error(ErrorCode::config, "number of bisections must be >= 1");
  const int n = mesh->num_elements();
  std::vector<char> is_marked(n, 0);
  for (int id : marked) {
    if (id < 0 || id >= n) mesh_error("marked element id " + std::to_string(id) + " out of range");
    is_marked[id] = 1;
  }

  struct Work {
    std::array<int, 3> v;
    Lineage lin;
    int origin;
    int depth;
  };

  std::vector<Point> verts = mesh->vertices();
  std::vector<Work> cur;
  cur.reserve(n);
  for (int e = 0; e < n; ++e) cur.push_back({mesh->triangle(e), mesh->lineage(e), e, 0});

  std::unordered_map<std::uint64_t, int> mids;
  for (;;) {
    std::vector<int> todo;
    for (int i = 0; i < static_cast<int>(cur.size()); ++i)
      if (is_marked[cur[i].origin] && cur[i].depth < bisections) todo.push_back(i);
    if (todo.empty()) break;

    std::unordered_map<std::uint64_t, std::array<int, 2>> incident;
    incident.reserve(cur.size() * 2);
    for (int i = 0; i < static_cast<int>(cur.size()); ++i) {
      const auto& v = cur[i].v;
      for (int l = 0; l < 3; ++l) {
        auto [it, inserted] = incident.try_emplace(edge_key(v[(l + 1) % 3], v[(l + 2) % 3]), std::array<int, 2>{i, -1});
        if (!inserted) it->second[1] = i;
      }
    }

    std::unordered_set<std::uint64_t> marked_edges;
    std::deque<std::uint64_t> queue;
    auto mark = [&](std::uint64_t key) {
      if (marked_edges.insert(key).second) queue.push_back(key);
    };
    for (int i : todo) mark(edge_key(cur[i].v[1], cur[i].v[2]));
    // closure: an element with any marked edge must have its refinement edge marked
    while (!queue.empty()) {
      const auto key = queue.front();
      queue.pop_front();
      for (int i : incident.at(key)) {
        if (i < 0) continue;
        mark(edge_key(cur[i].v[1], cur[i].v[2]));
      }
    }

    std::vector<Work> next;
    next.reserve(cur.size() + 2 * marked_edges.size());
    std::function<void(Work&&)> split = [&](Work&& w) {
      const auto key = edge_key(w.v[1], w.v[2]);
      if (!marked_edges.contains(key)) {
        next.push_back(std::move(w));
        return;
      }
      auto [it, inserted] = mids.try_emplace(key, static_cast<int>(verts.size()));
      if (inserted) verts.push_back(midpoint(verts[w.v[1]], verts[w.v[2]]));
      const int m = it->second;
      split(Work{{m, w.v[0], w.v[1]}, w.lin.child(0), w.origin, w.depth + 1});
      split(Work{{m, w.v[2], w.v[0]}, w.lin.child(1), w.origin, w.depth + 1});
    };
    for (auto& w : cur) split(std::move(w));
    cur = std::move(next);
  }

  RefineResult result;
  result.marked_count = static_cast<int>(std::count(is_marked.begin(), is_marked.end(), 1));
  std::vector<std::array<int, 3>> tris;
  std::vector<Lineage> lins;
  std::vector<char> refined(n, 0);
  tris.reserve(cur.size());
  lins.reserve(cur.size());
  result.parent.reserve(cur.size());
  for (auto& w : cur) {
    tris.push_back(w.v);
    lins.push_back(std::move(w.lin));
    result.parent.push_back(w.origin);
    if (w.depth > 0) refined[w.origin] = 1;
  }
  for (int e = 0; e < n; ++e)
    if (refined[e]) result.refined_set.push_back(e);
  result.mesh = std::make_shared<const Mesh>(mesh->initial_ptr(), std::move(verts), std::move(tris), std::move(lins));
  return result;
}

MeshPtr uniform_refine(const MeshPtr& mesh, int levels) {
  if (levels == 0) return mesh;
  std::vector<int> all(mesh->num_elements());
  for (int e = 0; e < mesh->num_elements(); ++e) all[e] = e;
  return refine(mesh, all, levels).mesh;
}

MeshPtr overlay(const Mesh& m1, const Mesh& m2) {
  if (!m1.initial().same_as(m2.initial())) mesh_error("overlay of meshes with different initial triangulations");
  LineageTrie trie(m1.initial_size());
  for (int e = 0; e < m1.num_elements(); ++e) trie.insert(m1.lineage(e), e);
  for (int e = 0; e < m2.num_elements(); ++e) trie.insert(m2.lineage(e), e);
  auto result = build_from_trie(m1.initial_ptr(), trie);
  if (auto bad = audit_conformity(*result)) mesh_error("overlay is not conforming: " + *bad);
  return result;
}

LineageIndex::LineageIndex(const Mesh& mesh) : child_(mesh.initial_size(), {-1, -1}), leaf_(mesh.initial_size(), -1) {
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const Lineage& lin = mesh.lineage(e);
    int node = lin.root;
    for (auto slot : lin.path) {
      if (child_[node][slot] < 0) {
        child_[node][slot] = static_cast<int>(child_.size());
        child_.push_back({-1, -1});
        leaf_.push_back(-1);
      }
      node = child_[node][slot];
    }
    leaf_[node] = e;
  }
}

int LineageIndex::find(const Lineage& lin) const {
  if (lin.root < 0 || lin.root >= static_cast<int>(child_.size())) return -1;
  int node = lin.root;
  if (leaf_[node] >= 0) return leaf_[node];
  for (auto slot : lin.path) {
    node = child_[node][slot];
    if (node < 0) return -1;
    if (leaf_[node] >= 0) return leaf_[node];
  }
  return -1;
}

std::vector<int> ancestor_map(const Mesh& fine, const Mesh& coarse) {
  if (!fine.initial().same_as(coarse.initial())) mesh_error("meshes have different initial triangulations");
  const LineageIndex index(coarse);
  std::vector<int> map(fine.num_elements());
  for (int e = 0; e < fine.num_elements(); ++e) {
    map[e] = index.find(fine.lineage(e));
    if (map[e] < 0) mesh_error("mesh is not a refinement of the coarse mesh (element " + std::to_string(e) + ")");
  }
  return map;
}

ElementGeometry geometry(const Mesh& mesh, int e) {
  if (e < 0 || e >= mesh.num_elements()) mesh_error("element id " + std::to_string(e) + " out of range");
  ElementGeometry g;
  g.area = mesh.area(e);
  g.h = mesh.h(e);
  g.diam = mesh.diameter(e);
  g.patch.push_back(e);
  for (int i = 0; i < 3; ++i) {
    const int id = mesh.edge_of(e, i);
    auto& eg = g.edges[i];
    eg.id = id;
    eg.length = mesh.edge_length(id);
    eg.tangent = mesh.edge_tangent(id);
    eg.normal = mesh.edge_normal(id);
    eg.sign = mesh.edge_sign(e, i);
    const Edge& edge = mesh.edge(id);
    const int other = edge.elem[0] == e ? edge.elem[1] : edge.elem[0];
    if (other >= 0) g.patch.push_back(other);
  }
  std::sort(g.patch.begin(), g.patch.end());
  return g;
}

std::optional<std::string> audit_conformity(const Mesh& mesh) {
  const auto& init = mesh.initial();
  std::vector<std::pair<Point, Point>> boundary;
  {
    std::unordered_map<std::uint64_t, int> count;
    for (const auto& t : init.triangles)
      for (int i = 0; i < 3; ++i) ++count[edge_key(t[(i + 1) % 3], t[(i + 2) % 3])];
    for (const auto& [key, c] : count)
      if (c == 1) boundary.emplace_back(init.vertices[key >> 32], init.vertices[key & 0xffffffffu]);
  }
  auto on_boundary = [&](Point p) {
    for (const auto& [a, b] : boundary) {
      const Vec2 d = b - a;
      const double len2 = dot(d, d);
      const Vec2 r = p - a;
      if (std::abs(cross(d, r)) > 1e-12 * len2) continue;
      const double s = dot(d, r);
      if (s >= -1e-12 * len2 && s <= len2 * (1 + 1e-12)) return true;
    }
    return false;
  };

  double total = 0.0;
  for (int e = 0; e < mesh.num_elements(); ++e) {
    if (!(mesh.area(e) > 0.0)) return "element " + std::to_string(e) + " has non-positive area";
    total += mesh.area(e);
  }
  for (int id = 0; id < mesh.num_edges(); ++id) {
    const Edge& edge = mesh.edge(id);
    if (!edge.boundary()) continue;
    const Point a = mesh.vertices()[edge.v[0]];
    const Point b = mesh.vertices()[edge.v[1]];
    if (!on_boundary(a) || !on_boundary(b) || !on_boundary(midpoint(a, b)))
      return "edge " + std::to_string(id) + " has a single neighbour but is interior (hanging node)";
  }
  double init_area = 0.0;
  for (const auto& t : init.triangles)
    init_area += 0.5 * cross(init.vertices[t[1]] - init.vertices[t[0]], init.vertices[t[2]] - init.vertices[t[0]]);
  if (std::abs(total - init_area) > 1e-12 * init_area) return "total area differs from the initial mesh";
  return std::nullopt;
}

double shape_ratio(const Mesh& mesh, int e) {
  const double d = mesh.diameter(e);
  return d * d / mesh.area(e);
}

// ---------------------------------------------------------------------------

void write_mesh(std::ostream& out, const Mesh& mesh) {
  out << "amfem-mesh v1\n";
  out << "domain " << to_string(mesh.initial().domain) << "\n";
  out << "vertices " << mesh.num_vertices() << "\n";
  for (const auto& p : mesh.vertices()) out << format_double(p.x) << ' ' << format_double(p.y) << '\n';
  out << "triangles " << mesh.num_elements() << "\n";
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const auto& t = mesh.triangle(e);
    out << t[0] << ' ' << t[1] << ' ' << t[2] << ' ' << mesh.lineage(e).label() << ' ' << mesh.generation(e) << '\n';
  }
}

namespace {

double parse_double(const std::string& tok) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) mesh_error("bad number '" + tok + "' in mesh file");
  return v;
}

long parse_count(std::istream& in, const std::string& keyword) {
  std::string line;
  if (!std::getline(in, line)) mesh_error("unexpected end of mesh file, expected '" + keyword + "'");
  std::istringstream ls(line);
  std::string kw;
  long count = -1;
  if (!(ls >> kw >> count) || kw != keyword || count < 0) mesh_error("expected '" + keyword + " <count>'");
  return count;
}

}  // namespace

MeshPtr read_mesh(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "amfem-mesh v1") mesh_error("missing 'amfem-mesh v1' header");
  if (!std::getline(in, line) || line.rfind("domain ", 0) != 0) mesh_error("missing domain line");
  const Domain domain = parse_domain(line.substr(7));
  auto init = make_initial(domain);

  const long nv = parse_count(in, "vertices");
  std::vector<Point> verts;
  verts.reserve(nv);
  for (long i = 0; i < nv; ++i) {
    if (!std::getline(in, line)) mesh_error("truncated vertex block");
    std::istringstream ls(line);
    std::string sx, sy;
    if (!(ls >> sx >> sy)) mesh_error("malformed vertex line");
    verts.push_back({parse_double(sx), parse_double(sy)});
  }
  const long nt = parse_count(in, "triangles");
  std::vector<std::array<int, 3>> tris;
  std::vector<Lineage> lins;
  tris.reserve(nt);
  lins.reserve(nt);
  for (long i = 0; i < nt; ++i) {
    if (!std::getline(in, line)) mesh_error("truncated triangle block");
    std::istringstream ls(line);
    std::array<int, 3> t{};
    std::string label;
    int gen = -1;
    if (!(ls >> t[0] >> t[1] >> t[2] >> label >> gen)) mesh_error("malformed triangle line");
    Lineage lin = Lineage::parse_label(label);
    if (lin.generation() != gen) mesh_error("generation does not match lineage label");
    tris.push_back(t);
    lins.push_back(std::move(lin));
  }
  return std::make_shared<const Mesh>(init, std::move(verts), std::move(tris), std::move(lins));
}

}  // namespace amfem
