#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "amfem/mesh.hpp"
#include "helpers.hpp"

using namespace amfem;
using amfem::test_util::single_triangle;
using amfem::test_util::square;

namespace {

double total_area(const Mesh& m) {
  double s = 0.0;
  for (int e = 0; e < m.num_elements(); ++e) s += m.area(e);
  return s;
}

}  // namespace

TEST(InitialMesh, UnitSquareHasTwoTrianglesSharingTheDiagonal) {
  auto m = create_initial(Domain::unit_square);
  ASSERT_EQ(m->num_elements(), 2);
  EXPECT_EQ(m->num_edges(), 5);
  const int diag = m->find_edge(0, 2);
  ASSERT_GE(diag, 0);
  // local edge 0 is the refinement edge in both triangles
  EXPECT_EQ(m->edge_of(0, 0), diag);
  EXPECT_EQ(m->edge_of(1, 0), diag);
  EXPECT_FALSE(audit_conformity(*m).has_value());
}

TEST(InitialMesh, LShapeAndCheckerboard) {
  auto l = create_initial(Domain::lshape);
  EXPECT_EQ(l->num_elements(), 6);
  EXPECT_DOUBLE_EQ(total_area(*l), 3.0);
  auto c = create_initial(Domain::checkerboard);
  EXPECT_EQ(c->num_elements(), 8);
  EXPECT_DOUBLE_EQ(total_area(*c), 1.0);
  for (auto m : {l, c}) EXPECT_FALSE(audit_conformity(*m).has_value());
  // every L-shape refinement edge ends at the reentrant corner
  for (int e = 0; e < l->num_elements(); ++e) {
    const Edge& edge = l->edge(l->edge_of(e, 0));
    EXPECT_TRUE(l->vertices()[edge.v[0]] == Point{} || l->vertices()[edge.v[1]] == Point{});
  }
}

TEST(Refine, MarkOneTriangleClosesIntoFour) {
  auto m = create_initial(Domain::unit_square);
  const int marked[] = {0};
  auto r = refine(m, marked, 1);
  EXPECT_EQ(r.mesh->num_elements(), 4);
  EXPECT_EQ(r.refined_set, (std::vector<int>{0, 1}));
  EXPECT_FALSE(audit_conformity(*r.mesh).has_value());
}

TEST(Refine, EmptyMarkingIsIdentity) {
  auto m = create_initial(Domain::unit_square);
  auto r = refine(m, {}, 1);
  EXPECT_TRUE(r.refined_set.empty());
  EXPECT_EQ(r.mesh->vertices(), m->vertices());
  EXPECT_EQ(r.mesh->triangles(), m->triangles());
}

TEST(Refine, MarkBothTwiceGivesEightEqualAreas) {
  auto m = create_initial(Domain::unit_square);
  const int marked[] = {0, 1};
  auto r = refine(m, marked, 2);
  ASSERT_EQ(r.mesh->num_elements(), 8);
  for (int e = 0; e < 8; ++e) {
    EXPECT_EQ(r.mesh->area(e), 0.125);
    EXPECT_EQ(r.mesh->generation(e), 2);
  }
}

TEST(Refine, OutOfRangeIdAndZeroBisectionsAreRejected) {
  auto m = create_initial(Domain::unit_square);
  const int bad[] = {2};
  EXPECT_THROW(refine(m, bad, 1), Error);
  const int ok[] = {0};
  EXPECT_THROW(refine(m, ok, 0), Error);
}

TEST(Refine, ParentMapAndUnrefinedElementsPreserved) {
  auto m = square(3);
  const int marked[] = {5};
  auto r = refine(m, marked, 1);
  ASSERT_EQ(static_cast<int>(r.parent.size()), r.mesh->num_elements());
  std::set<int> refined(r.refined_set.begin(), r.refined_set.end());
  EXPECT_TRUE(refined.contains(5));
  for (int e = 0; e < r.mesh->num_elements(); ++e) {
    const int p = r.parent[e];
    if (refined.contains(p)) {
      EXPECT_EQ(r.mesh->area(e) * 2, m->area(p));
    } else {
      EXPECT_EQ(r.mesh->lineage(e), m->lineage(p));
      for (int i = 0; i < 3; ++i) EXPECT_EQ(r.mesh->vertex(e, i), m->vertex(p, i));
    }
  }
}

TEST(Refine, UniformLevelsDoubleTheCount) {
  auto m = create_initial(Domain::lshape);
  for (int k = 1; k <= 4; ++k) EXPECT_EQ(uniform_refine(m, k)->num_elements(), 6 << k);
}

TEST(Overlay, ExamplesFromTheInitialSquare) {
  auto t0 = create_initial(Domain::unit_square);
  auto idem = overlay(*t0, *t0);
  EXPECT_EQ(idem->num_elements(), 2);

  const int a[] = {0}, b[] = {1};
  auto m1 = refine(t0, a, 1).mesh;
  auto m2 = refine(t0, b, 1).mesh;
  auto o = overlay(*m1, *m2);
  EXPECT_LE(o->num_elements(), 4 + 4 - 2);
  EXPECT_FALSE(audit_conformity(*o).has_value());

  auto absorbed = overlay(*m1, *t0);
  EXPECT_EQ(absorbed->num_elements(), m1->num_elements());
  for (int e = 0; e < m1->num_elements(); ++e) EXPECT_EQ(absorbed->lineage(e).label(), m1->lineage(e).label());
}

TEST(Overlay, DifferentInitialMeshesAreRejected) {
  auto sq = create_initial(Domain::unit_square);
  auto ls = create_initial(Domain::lshape);
  EXPECT_THROW(overlay(*sq, *ls), Error);
}

TEST(Lineage, LabelRoundTrip) {
  Lineage lin{3, {0, 1, 1, 0}};
  EXPECT_EQ(lin.label(), "3:0110");
  EXPECT_EQ(Lineage::parse_label("3:0110"), lin);
  EXPECT_EQ(Lineage::parse_label("1:"), (Lineage{1, {}}));
  EXPECT_THROW(Lineage::parse_label("x:01"), Error);
}

TEST(Lineage, AncestorMapLocatesContainingElement) {
  auto coarse = square(2);
  const int marked[] = {0, 3};
  auto fine = refine(refine(coarse, marked, 2).mesh, std::vector<int>{1}, 1).mesh;
  const auto anc = ancestor_map(*fine, *coarse);
  for (int e = 0; e < fine->num_elements(); ++e) {
    const Point c = fine->centroid(e);
    // barycentric inside-test against the claimed ancestor
    const Point a = coarse->vertex(anc[e], 0), b = coarse->vertex(anc[e], 1), d = coarse->vertex(anc[e], 2);
    const double s1 = cross(b - a, c - a), s2 = cross(d - b, c - b), s3 = cross(a - d, c - d);
    EXPECT_TRUE(s1 > 0 && s2 > 0 && s3 > 0) << e;
  }
  EXPECT_THROW(ancestor_map(*coarse, *fine), Error);
}

TEST(Geometry, ReferenceAndEquilateralTriangles) {
  auto ref = single_triangle({0, 0}, {1, 0}, {0, 1});
  const auto g = geometry(*ref, 0);
  EXPECT_DOUBLE_EQ(g.area, 0.5);
  EXPECT_DOUBLE_EQ(g.h, std::sqrt(0.5));
  double longest = 0.0;
  for (const auto& e : g.edges) {
    longest = std::max(longest, e.length);
    EXPECT_NEAR(norm(e.tangent), 1.0, 1e-15);
    EXPECT_NEAR(norm(e.normal), 1.0, 1e-15);
    EXPECT_NEAR(dot(e.tangent, e.normal), 0.0, 1e-15);
  }
  EXPECT_DOUBLE_EQ(longest, std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(g.diam, std::sqrt(2.0));

  auto eq = single_triangle({0, 0}, {1, 0}, {0.5, std::sqrt(3.0) / 2});
  EXPECT_NEAR(geometry(*eq, 0).area, std::sqrt(3.0) / 4, 1e-15);
}

TEST(Geometry, SignedNormalsPointOutward) {
  auto m = square(3);
  for (int e = 0; e < m->num_elements(); ++e) {
    const auto g = geometry(*m, e);
    const Point c = m->centroid(e);
    for (int i = 0; i < 3; ++i) {
      const Edge& ed = m->edge(g.edges[i].id);
      const Point mid = midpoint(m->vertices()[ed.v[0]], m->vertices()[ed.v[1]]);
      EXPECT_GT(g.edges[i].sign * dot(g.edges[i].normal, mid - c), 0.0);
    }
  }
}

TEST(Geometry, PatchOfInteriorElementOfFourTriangleSquare) {
  auto m = refine(create_initial(Domain::unit_square), std::vector<int>{0}, 1).mesh;
  for (int e = 0; e < 4; ++e) {
    const auto g = geometry(*m, e);
    EXPECT_EQ(g.patch.size(), 3u);  // itself and its two neighbours across the centre
    EXPECT_TRUE(std::is_sorted(g.patch.begin(), g.patch.end()));
  }
}

TEST(MeshIo, RoundTripIsBitExact) {
  auto m = refine(square(3), std::vector<int>{1, 7, 12}, 3).mesh;
  std::stringstream ss;
  write_mesh(ss, *m);
  auto back = read_mesh(ss);
  EXPECT_EQ(back->vertices(), m->vertices());
  EXPECT_EQ(back->triangles(), m->triangles());
  for (int e = 0; e < m->num_elements(); ++e) EXPECT_EQ(back->lineage(e), m->lineage(e));
  EXPECT_TRUE(back->initial().same_as(m->initial()));
  std::stringstream again;
  write_mesh(again, *back);
  std::stringstream first;
  write_mesh(first, *m);
  EXPECT_EQ(again.str(), first.str());
}

TEST(MeshIo, GarbageIsRejected) {
  std::stringstream ss("not a mesh\n");
  EXPECT_THROW(read_mesh(ss), Error);
}
