#include "amfem/quadrature.hpp"

#include <cmath>

namespace amfem::quad {

namespace {

constexpr double kA1 = 0.445948490915964886318329253883;
constexpr double kW1 = 0.223381589678011465944806574389;
constexpr double kA2 = 0.091576213509770743459571463402;
constexpr double kW2 = 0.109951743655321867388526758944;

const std::array<TriPoint, 6> kDeg4 = {{
    {1.0 - 2.0 * kA1, kA1, kA1, kW1},
    {kA1, 1.0 - 2.0 * kA1, kA1, kW1},
    {kA1, kA1, 1.0 - 2.0 * kA1, kW1},
    {1.0 - 2.0 * kA2, kA2, kA2, kW2},
    {kA2, 1.0 - 2.0 * kA2, kA2, kW2},
    {kA2, kA2, 1.0 - 2.0 * kA2, kW2},
}};

std::array<TriPoint, 7> make_deg5() {
  const double s15 = std::sqrt(15.0);
  const double a = (6.0 - s15) / 21.0;
  const double b = (6.0 + s15) / 21.0;
  const double wa = (155.0 - s15) / 1200.0;
  const double wb = (155.0 + s15) / 1200.0;
  const double third = 1.0 / 3.0;
  return {{
      {third, third, third, 9.0 / 40.0},
      {1.0 - 2.0 * a, a, a, wa},
      {a, 1.0 - 2.0 * a, a, wa},
      {a, a, 1.0 - 2.0 * a, wa},
      {1.0 - 2.0 * b, b, b, wb},
      {b, 1.0 - 2.0 * b, b, wb},
      {b, b, 1.0 - 2.0 * b, wb},
  }};
}

std::array<LinePoint, 4> make_gauss4() {
  const double r = 2.0 / 7.0 * std::sqrt(6.0 / 5.0);
  const double x_in = std::sqrt(3.0 / 7.0 - r);
  const double x_out = std::sqrt(3.0 / 7.0 + r);
  const double w_in = (18.0 + std::sqrt(30.0)) / 36.0;
  const double w_out = (18.0 - std::sqrt(30.0)) / 36.0;
  // map [-1,1] -> [0,1], weights sum to 1
  return {{
      {0.5 * (1.0 - x_out), 0.5 * w_out},
      {0.5 * (1.0 - x_in), 0.5 * w_in},
      {0.5 * (1.0 + x_in), 0.5 * w_in},
      {0.5 * (1.0 + x_out), 0.5 * w_out},
  }};
}

const std::array<TriPoint, 7> kDeg5 = make_deg5();
const std::array<LinePoint, 4> kGauss4 = make_gauss4();

}  // namespace

std::span<const TriPoint> triangle_deg4() { return kDeg4; }
std::span<const TriPoint> triangle_deg5() { return kDeg5; }
std::span<const LinePoint> gauss4() { return kGauss4; }

}  // namespace amfem::quad
