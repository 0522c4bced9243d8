// Randomized and run-based invariants, shared with `amfem verify`.
#include <gtest/gtest.h>

#include "amfem/verify.hpp"

using namespace amfem;

namespace {

void expect_all_pass(const std::vector<verify::CheckResult>& results) {
  ASSERT_FALSE(results.empty());
  for (const auto& r : results)
    EXPECT_TRUE(r.passed) << r.suite << '/' << r.name << " measured " << r.measured << " bound " << r.bound << ": "
                          << r.detail;
}

}  // namespace

TEST(Properties, MeshRefinement) { expect_all_pass(verify::run_suite("mesh", 11)); }

TEST(Properties, MeshRefinementOtherSeed) { expect_all_pass(verify::mesh_refinement(12345)); }

TEST(Properties, Dorfler) { expect_all_pass(verify::run_suite("dorfler", 7)); }

TEST(Properties, Pythagoras) { expect_all_pass(verify::run_suite("pythagoras", 0)); }

TEST(Properties, Reduction) { expect_all_pass(verify::run_suite("reduction", 0)); }

TEST(Properties, Oscillation) { expect_all_pass(verify::run_suite("oscillation", 0)); }

TEST(Properties, UpperBound) { expect_all_pass(verify::run_suite("upper_bound", 0)); }

TEST(Properties, SuitesAreSeedReproducible) {
  const auto a = verify::run_suite("mesh", 5);
  const auto b = verify::run_suite("mesh", 5);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].measured, b[i].measured);
    EXPECT_EQ(a[i].detail, b[i].detail);
  }
}

TEST(Properties, UnknownSuiteIsAConfigError) {
  try {
    verify::run_suite("bogus", 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::config);
  }
}

TEST(Properties, RandomIsPortable) {
  verify::Random r(42);
  for (int i = 0; i < 1000; ++i) {
    const double u = r.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    const int k = r.below(7);
    EXPECT_GE(k, 0);
    EXPECT_LT(k, 7);
  }
}
