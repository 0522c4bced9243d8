#ifndef AMFEM_COMMON_HPP
#define AMFEM_COMMON_HPP

#include <cmath>
#include <stdexcept>
#include <string>

namespace amfem {

/// 2D point / vector.
struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend Vec2 operator*(Vec2 a, double s) { return {s * a.x, s * a.y}; }
  friend bool operator==(Vec2 a, Vec2 b) = default;
};

using Point = Vec2;

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline Point midpoint(Point a, Point b) { return {0.5 * (a.x + b.x), 0.5 * (a.y + b.y)}; }

/// Symmetric-or-not 2x2 matrix, row major.
struct Mat2 {
  double a11 = 0.0, a12 = 0.0, a21 = 0.0, a22 = 0.0;

  static Mat2 identity(double s = 1.0) { return {s, 0.0, 0.0, s}; }

  Vec2 operator*(Vec2 v) const { return {a11 * v.x + a12 * v.y, a21 * v.x + a22 * v.y}; }
  Mat2 operator*(const Mat2& b) const {
    return {a11 * b.a11 + a12 * b.a21, a11 * b.a12 + a12 * b.a22,
            a21 * b.a11 + a22 * b.a21, a21 * b.a12 + a22 * b.a22};
  }
  friend Mat2 operator*(double s, const Mat2& m) {
    return {s * m.a11, s * m.a12, s * m.a21, s * m.a22};
  }
  double det() const { return a11 * a22 - a12 * a21; }
  Mat2 inverse() const {
    const double d = det();
    return {a22 / d, -a12 / d, -a21 / d, a11 / d};
  }
  bool is_spd(double rel_tol = 1e-12) const {
    const double scale = std::abs(a11) + std::abs(a22) + std::abs(a12) + std::abs(a21);
    if (!(scale > 0.0) || !std::isfinite(scale)) return false;
    if (std::abs(a12 - a21) > rel_tol * scale) return false;
    return a11 > 0.0 && det() > 0.0;
  }
};

/// Failure categories; the CLI maps them onto exit codes.
enum class ErrorCode { config, mesh, solver, verification };

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace amfem

#endif
