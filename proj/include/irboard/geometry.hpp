#pragma once

// Projective camera -> screen calibration.
//
// Corner order everywhere is the Z pattern: top-left, top-right,
// bottom-left, bottom-right.

#include <array>
#include <span>
#include <stdexcept>
#include <string>

namespace irboard::geometry {

inline constexpr double kSolveTolerance = 1e-9;
inline constexpr double kPivotTolerance = 1e-9;
inline constexpr double kSingularTolerance = 1e-12;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

/// Position on the IR camera grid; fractional after averaging.
struct CameraPoint {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const CameraPoint&, const CameraPoint&) = default;
};

/// Normalized screen position. The projected image is [0,1]^2; the lateral
/// zones live just outside it, so other values are legal.
struct ScreenPoint {
  double u = 0.0;
  double v = 0.0;
  friend bool operator==(const ScreenPoint&, const ScreenPoint&) = default;
};

enum class GeometryErrc { DegenerateConfiguration, AtInfinity, NonFinite };

class GeometryError : public std::runtime_error {
 public:
  GeometryError(GeometryErrc code, const std::string& what);
  GeometryErrc code() const noexcept { return code_; }

 private:
  GeometryErrc code_;
};

using Matrix3 = std::array<std::array<double, 3>, 3>;

/// 3x3 projective map normalized so that m(2,2) == 1.
class Homography {
 public:
  Homography();  // identity

  /// Normalizes by m[2][2]. Throws DegenerateConfiguration when m[2][2] or
  /// the determinant is too small to represent a usable map.
  static Homography from_matrix(const Matrix3& m);

  double operator()(int row, int col) const { return m_[row][col]; }
  const Matrix3& matrix() const noexcept { return m_; }
  double determinant() const noexcept;

  friend bool operator==(const Homography&, const Homography&) = default;

 private:
  Matrix3 m_;
};

/// Maps src[i] onto dst[i] for the four correspondences.
Homography solve_homography(std::span<const Vec2, 4> src, std::span<const Vec2, 4> dst);
Homography solve_homography(std::span<const CameraPoint, 4> src,
                            std::span<const ScreenPoint, 4> dst);

Vec2 transform(const Homography& h, Vec2 p);
ScreenPoint apply(const Homography& h, CameraPoint p);

Homography invert(const Homography& h);

/// Unit-square corners in Z order.
inline constexpr std::array<ScreenPoint, 4> kUnitSquareZ{
    ScreenPoint{0.0, 0.0}, ScreenPoint{1.0, 0.0}, ScreenPoint{0.0, 1.0}, ScreenPoint{1.0, 1.0}};

}  // namespace irboard::geometry
