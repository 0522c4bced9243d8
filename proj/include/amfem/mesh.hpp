#ifndef AMFEM_MESH_HPP
#define AMFEM_MESH_HPP

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "amfem/common.hpp"

namespace amfem {

/// Built-in polygonal domains with hard-coded compatible refinement-edge labels.
enum class Domain { unit_square, lshape, checkerboard };

std::string_view to_string(Domain d);
/// Accepts "unit_square", "lshape" and "checkerboard"; throws Error(config) otherwise.
Domain parse_domain(std::string_view name);

/// Position of an element in the bisection forest grown from the initial mesh.
///
/// `path[i]` is the child slot (0 or 1) taken at the i-th bisection below
/// initial triangle `root`. Two meshes refined from the same initial mesh
/// contain geometrically identical elements iff their lineages are equal.
struct Lineage {
  int root = 0;
  std::vector<std::uint8_t> path;

  int generation() const { return static_cast<int>(path.size()); }
  Lineage child(std::uint8_t slot) const {
    Lineage c{root, path};
    c.path.push_back(slot);
    return c;
  }
  /// "root:bits", e.g. "1:0110"; the initial triangle 1 itself is "1:".
  std::string label() const;
  static Lineage parse_label(std::string_view label);

  friend bool operator==(const Lineage&, const Lineage&) = default;
};

/// The initial triangulation every mesh of a run descends from.
struct InitialMesh {
  Domain domain = Domain::unit_square;
  std::vector<Point> vertices;
  std::vector<std::array<int, 3>> triangles;

  bool same_as(const InitialMesh& other) const {
    return domain == other.domain && vertices == other.vertices && triangles == other.triangles;
  }
};

/// Mesh edge. The tangent runs from `v[0]` to `v[1]` (`v[0] < v[1]`), the
/// normal is the tangent rotated by -90 degrees and points out of `elem[0]`.
/// On the boundary exactly one of `elem[0]`, `elem[1]` is -1.
struct Edge {
  std::array<int, 2> v{-1, -1};
  std::array<int, 2> elem{-1, -1};
  std::array<int, 2> local{-1, -1};

  bool boundary() const { return elem[0] < 0 || elem[1] < 0; }
  /// The (first) element touching the edge.
  int any_element() const { return elem[0] >= 0 ? elem[0] : elem[1]; }
};

struct EdgeGeometry {
  int id = -1;
  double length = 0.0;
  Vec2 tangent;
  Vec2 normal;  ///< global orientation
  int sign = 0; ///< +1 if `normal` is outward for the queried element
};

struct ElementGeometry {
  double h = 0.0;     ///< |T|^{1/2}, the estimator weight
  double area = 0.0;
  double diam = 0.0;  ///< longest edge, used for shape-regularity audits
  std::array<EdgeGeometry, 3> edges;
  std::vector<int> patch;  ///< T and its edge neighbours, ascending
};

/// Immutable conforming triangulation.
///
/// Triangles are stored counter-clockwise with the newest vertex ("peak")
/// first, so local edge 0 (opposite the peak) is the refinement edge. Local
/// edge i is opposite local vertex i.
class Mesh {
 public:
  Mesh(std::shared_ptr<const InitialMesh> initial, std::vector<Point> vertices,
       std::vector<std::array<int, 3>> triangles, std::vector<Lineage> lineage);

  int num_vertices() const { return static_cast<int>(vertices_.size()); }
  int num_elements() const { return static_cast<int>(triangles_.size()); }
  int num_edges() const { return static_cast<int>(edges_.size()); }

  const std::vector<Point>& vertices() const { return vertices_; }
  const std::vector<std::array<int, 3>>& triangles() const { return triangles_; }
  const std::array<int, 3>& triangle(int e) const { return triangles_[e]; }
  Point vertex(int e, int local) const { return vertices_[triangles_[e][local]]; }
  const Lineage& lineage(int e) const { return lineage_[e]; }
  int generation(int e) const { return lineage_[e].generation(); }

  const std::vector<Edge>& edges() const { return edges_; }
  const Edge& edge(int id) const { return edges_[id]; }
  int edge_of(int e, int local) const { return elem_edges_[e][local]; }
  /// +1 if the global edge normal is outward for element e.
  int edge_sign(int e, int local) const { return elem_signs_[e][local]; }
  /// Edge id joining vertices a and b, or -1.
  int find_edge(int a, int b) const;

  double area(int e) const { return areas_[e]; }
  double h(int e) const { return std::sqrt(areas_[e]); }
  double diameter(int e) const;
  Point centroid(int e) const;
  double edge_length(int id) const { return norm(vertices_[edges_[id].v[1]] - vertices_[edges_[id].v[0]]); }
  Vec2 edge_tangent(int id) const;
  Vec2 edge_normal(int id) const;

  const InitialMesh& initial() const { return *initial_; }
  const std::shared_ptr<const InitialMesh>& initial_ptr() const { return initial_; }
  int initial_size() const { return static_cast<int>(initial_->triangles.size()); }

 private:
  std::shared_ptr<const InitialMesh> initial_;
  std::vector<Point> vertices_;
  std::vector<std::array<int, 3>> triangles_;
  std::vector<Lineage> lineage_;
  std::vector<double> areas_;
  std::vector<Edge> edges_;
  std::vector<std::array<int, 3>> elem_edges_;
  std::vector<std::array<int, 3>> elem_signs_;
  std::vector<std::pair<std::uint64_t, int>> edge_lookup_;  // sorted by key
};

using MeshPtr = std::shared_ptr<const Mesh>;

struct RefineResult {
  MeshPtr mesh;
  std::vector<int> refined_set;  ///< ids of the input mesh that were bisected
  int marked_count = 0;
  std::vector<int> parent;       ///< input-mesh id containing each output element
};

/// Initial triangulation of a built-in domain.
MeshPtr create_initial(Domain domain);

/// Newest-vertex bisection: every marked element is bisected at least
/// `bisections` times; recursive closure restores conformity.
RefineResult refine(const MeshPtr& mesh, std::span<const int> marked, int bisections = 1);

/// Bisects every element `levels` times.
MeshPtr uniform_refine(const MeshPtr& mesh, int levels = 1);

/// Smallest common conforming refinement of two meshes with the same initial mesh.
MeshPtr overlay(const Mesh& m1, const Mesh& m2);

/// Point location by lineage: finds the element of a mesh that contains (or
/// equals) an element of any refinement of it.
class LineageIndex {
 public:
  explicit LineageIndex(const Mesh& mesh);
  /// Element whose lineage is a prefix of `lin`, or -1.
  int find(const Lineage& lin) const;

 private:
  std::vector<std::array<int, 2>> child_;
  std::vector<int> leaf_;
};

/// For every element of `fine`, the element of `coarse` containing it.
/// Throws Error(mesh) if `fine` is not a refinement of `coarse`.
std::vector<int> ancestor_map(const Mesh& fine, const Mesh& coarse);

ElementGeometry geometry(const Mesh& mesh, int e);

/// Exhaustive audit: positive areas, every edge shared by at most two
/// elements, every single-sided edge on the domain boundary, total area
/// preserved. Returns a description of the first violation.
std::optional<std::string> audit_conformity(const Mesh& mesh);

/// diam(T)^2 / |T|.
double shape_ratio(const Mesh& mesh, int e);

/// Plain-text format starting with the line `amfem-mesh v1`.
void write_mesh(std::ostream& out, const Mesh& mesh);
MeshPtr read_mesh(std::istream& in);

}  // namespace amfem

#endif
