#include <gtest/gtest.h>

#include <cmath>

#include "amfem/quadrature.hpp"

using namespace amfem;

namespace {

double factorial(int n) { return n <= 1 ? 1.0 : n * factorial(n - 1); }

// integral of x^a y^b over the reference triangle, divided by its area 1/2
double reference_mean(int a, int b) { return 2.0 * factorial(a) * factorial(b) / factorial(a + b + 2); }

template <class Rule>
double apply(const Rule& rule, int a, int b) {
  double s = 0.0;
  for (const auto& q : rule) {
    const Point x = quad::map(q, {0, 0}, {1, 0}, {0, 1});
    s += q.w * std::pow(x.x, a) * std::pow(x.y, b);
  }
  return s;
}

}  // namespace

TEST(Quadrature, TriangleDegree4IsExactUpToDegree4) {
  for (int a = 0; a <= 4; ++a)
    for (int b = 0; a + b <= 4; ++b) EXPECT_NEAR(apply(quad::triangle_deg4(), a, b), reference_mean(a, b), 1e-14) << a << ' ' << b;
}

TEST(Quadrature, TriangleDegree5IsExactUpToDegree5) {
  for (int a = 0; a <= 5; ++a)
    for (int b = 0; a + b <= 5; ++b) EXPECT_NEAR(apply(quad::triangle_deg5(), a, b), reference_mean(a, b), 1e-14) << a << ' ' << b;
}

TEST(Quadrature, Degree4RuleIsNotExactForDegree6) {
  EXPECT_GT(std::abs(apply(quad::triangle_deg4(), 6, 0) - reference_mean(6, 0)), 1e-6);
}

TEST(Quadrature, GaussFourPointIsExactUpToDegree7) {
  for (int k = 0; k <= 7; ++k) {
    double s = 0.0;
    for (const auto& q : quad::gauss4()) s += q.w * std::pow(q.t, k);
    EXPECT_NEAR(s, 1.0 / (k + 1), 1e-15) << k;
  }
  double s8 = 0.0;
  for (const auto& q : quad::gauss4()) s8 += q.w * std::pow(q.t, 8);
  EXPECT_GT(std::abs(s8 - 1.0 / 9), 1e-8);
}

TEST(Quadrature, WeightsSumToOneAndPointsInside) {
  double w = 0.0;
  for (const auto& q : quad::triangle_deg4()) {
    w += q.w;
    EXPECT_GE(q.l0, 0.0);
    EXPECT_GE(q.l1, 0.0);
    EXPECT_GE(q.l2, 0.0);
    EXPECT_NEAR(q.l0 + q.l1 + q.l2, 1.0, 1e-15);
  }
  EXPECT_NEAR(w, 1.0, 1e-15);
}
