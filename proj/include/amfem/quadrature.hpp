#ifndef AMFEM_QUADRATURE_HPP
#define AMFEM_QUADRATURE_HPP

#include <array>
#include <span>

#include "amfem/common.hpp"

namespace amfem::quad {

/// Triangle rule in barycentric coordinates; weights sum to 1 (scale by |T|).
struct TriPoint {
  double l0, l1, l2;
  double w;
};

/// Line rule on the unit parameter interval [0,1]; weights sum to 1 (scale by |E|).
struct LinePoint {
  double t;
  double w;
};

/// Symmetric 6-point rule, exact for degree 4.
std::span<const TriPoint> triangle_deg4();
/// Radon 7-point rule, exact for degree 5.
std::span<const TriPoint> triangle_deg5();
/// 4-point Gauss-Legendre, exact for degree 7.
std::span<const LinePoint> gauss4();

inline Point map(const TriPoint& q, Point a, Point b, Point c) {
  return {q.l0 * a.x + q.l1 * b.x + q.l2 * c.x, q.l0 * a.y + q.l1 * b.y + q.l2 * c.y};
}

inline Point map(const LinePoint& q, Point a, Point b) {
  return {a.x + q.t * (b.x - a.x), a.y + q.t * (b.y - a.y)};
}

}  // namespace amfem::quad

#endif
