#pragma once

#include <map>
#include <memory>
#include <string>

#include "amfem/mesh.hpp"
#include "amfem/problems.hpp"

namespace amfem::test_util {

/// A one-triangle mesh; the first vertex is the peak.
inline MeshPtr single_triangle(Point a, Point b, Point c) {
  auto init = std::make_shared<InitialMesh>();
  init->vertices = {a, b, c};
  init->triangles = {{0, 1, 2}};
  return std::make_shared<const Mesh>(init, init->vertices, init->triangles, std::vector<Lineage>{Lineage{0, {}}});
}

inline ProblemSpec custom(std::map<std::string, std::string> kv) { return problem_from_config(kv); }

/// Unit square refined uniformly `levels` times (2 * 2^levels triangles).
inline MeshPtr square(int levels) { return uniform_refine(create_initial(Domain::unit_square), levels); }

}  // namespace amfem::test_util
