#include "irboard/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace irboard::geometry {

namespace {

[[noreturn]] void degenerate(const std::string& what) {
  throw GeometryError(GeometryErrc::DegenerateConfiguration, what);
}

Matrix3 multiply(const Matrix3& a, const Matrix3& b) {
  Matrix3 r{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) r[i][j] += a[i][k] * b[k][j];
  return r;
}

double det3(const Matrix3& m) {
  return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
         m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
         m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

// Similarity that moves the centroid to the origin and the mean distance
// from it to sqrt(2). Keeps the pivot threshold meaningful regardless of
// whether the points are in camera units or normalized screen units.
struct Conditioning {
  double scale = 1.0;
  Vec2 centroid;

  Vec2 forward(Vec2 p) const { return {(p.x - centroid.x) * scale, (p.y - centroid.y) * scale}; }
  Matrix3 matrix() const {
    return {{{scale, 0.0, -scale * centroid.x}, {0.0, scale, -scale * centroid.y}, {0.0, 0.0, 1.0}}};
  }
  Matrix3 inverse_matrix() const {
    return {{{1.0 / scale, 0.0, centroid.x}, {0.0, 1.0 / scale, centroid.y}, {0.0, 0.0, 1.0}}};
  }
};

Conditioning condition(std::span<const Vec2, 4> pts, const char* which) {
  Conditioning c;
  for (const auto& p : pts) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw GeometryError(GeometryErrc::NonFinite, std::string(which) + " point is not finite");
    }
    c.centroid.x += p.x / 4.0;
    c.centroid.y += p.y / 4.0;
  }
  double mean_dist = 0.0;
  for (const auto& p : pts) mean_dist += std::hypot(p.x - c.centroid.x, p.y - c.centroid.y) / 4.0;
  if (!(mean_dist > 0.0)) degenerate(std::string(which) + " points coincide");
  c.scale = std::sqrt(2.0) / mean_dist;
  return c;
}

void require_general_position(const std::array<Vec2, 4>& p, const char* which) {
  static constexpr int kTriples[4][3] = {{0, 1, 2}, {0, 1, 3}, {0, 2, 3}, {1, 2, 3}};
  for (const auto& t : kTriples) {
    const Vec2 a = p[t[0]], b = p[t[1]], c = p[t[2]];
    const double cross = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
    if (std::abs(cross) < kPivotTolerance) {
      degenerate(std::string(which) + " points " + std::to_string(t[0]) + "," + std::to_string(t[1]) +
                 "," + std::to_string(t[2]) + " are collinear or coincident");
    }
  }
}

// Solves the 8x8 system in place by Gaussian elimination with partial
// pivoting; returns the solution vector.
std::array<double, 8> eliminate(std::array<std::array<double, 9>, 8>& a) {
  constexpr int n = 8;
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int row = col + 1; row < n; ++row) {
      if (std::abs(a[row][col]) > std::abs(a[pivot][col])) pivot = row;
    }
    if (std::abs(a[pivot][col]) < kPivotTolerance) degenerate("pivot below tolerance in column " + std::to_string(col));
    std::swap(a[col], a[pivot]);
    for (int row = col + 1; row < n; ++row) {
      const double f = a[row][col] / a[col][col];
      if (f == 0.0) continue;
      for (int k = col; k <= n; ++k) a[row][k] -= f * a[col][k];
    }
  }
  std::array<double, 8> x{};
  for (int row = n - 1; row >= 0; --row) {
    double acc = a[row][n];
    for (int k = row + 1; k < n; ++k) acc -= a[row][k] * x[k];
    x[row] = acc / a[row][row];
  }
  return x;
}

}  // namespace

GeometryError::GeometryError(GeometryErrc code, const std::string& what)
    : std::runtime_error(what), code_(code) {}

Homography::Homography() : m_{{{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}}} {}

Homography Homography::from_matrix(const Matrix3& m) {
  for (const auto& row : m)
    for (double v : row)
      if (!std::isfinite(v)) throw GeometryError(GeometryErrc::NonFinite, "matrix entry is not finite");
  if (std::abs(m[2][2]) <= kSingularTolerance) degenerate("m22 vanishes; cannot normalize");
  Homography h;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) h.m_[i][j] = m[i][j] / m[2][2];
  h.m_[2][2] = 1.0;
  if (std::abs(h.determinant()) <= kSingularTolerance) degenerate("determinant below tolerance");
  return h;
}

double Homography::determinant() const noexcept { return det3(m_); }

Homography solve_homography(std::span<const Vec2, 4> src, std::span<const Vec2, 4> dst) {
  const Conditioning cs = condition(src, "source");
  const Conditioning cd = condition(dst, "destination");

  std::array<Vec2, 4> s{}, d{};
  for (int i = 0; i < 4; ++i) {
    s[i] = cs.forward(src[i]);
    d[i] = cd.forward(dst[i]);
  }
  require_general_position(s, "source");
  require_general_position(d, "destination");

  // Unknowns h00 h01 h02 h10 h11 h12 h20 h21 with h22 = 1:
  //   u (h20 x + h21 y + 1) = h00 x + h01 y + h02
  //   v (h20 x + h21 y + 1) = h10 x + h11 y + h12
  std::array<std::array<double, 9>, 8> a{};
  for (int i = 0; i < 4; ++i) {
    const double x = s[i].x, y = s[i].y, u = d[i].x, v = d[i].y;
    a[2 * i] = {x, y, 1.0, 0.0, 0.0, 0.0, -x * u, -y * u, u};
    a[2 * i + 1] = {0.0, 0.0, 0.0, x, y, 1.0, -x * v, -y * v, v};
  }
  const auto h = eliminate(a);
  const Matrix3 normalized{{{h[0], h[1], h[2]}, {h[3], h[4], h[5]}, {h[6], h[7], 1.0}}};

  const Homography result =
      Homography::from_matrix(multiply(cd.inverse_matrix(), multiply(normalized, cs.matrix())));

  double extent = 1.0;
  for (const auto& q : dst) extent = std::max({extent, std::abs(q.x), std::abs(q.y)});
  for (int i = 0; i < 4; ++i) {
    const Vec2 got = transform(result, src[i]);
    if (!(std::abs(got.x - dst[i].x) <= kSolveTolerance * extent &&
          std::abs(got.y - dst[i].y) <= kSolveTolerance * extent)) {
      degenerate("solution does not reproduce correspondence " + std::to_string(i));
    }
  }
  return result;
}

Homography solve_homography(std::span<const CameraPoint, 4> src, std::span<const ScreenPoint, 4> dst) {
  std::array<Vec2, 4> s{}, d{};
  for (int i = 0; i < 4; ++i) {
    s[i] = {src[i].x, src[i].y};
    d[i] = {dst[i].u, dst[i].v};
  }
  return solve_homography(std::span<const Vec2, 4>(s), std::span<const Vec2, 4>(d));
}

Vec2 transform(const Homography& h, Vec2 p) {
  const auto& m = h.matrix();
  const double w = m[2][0] * p.x + m[2][1] * p.y + m[2][2];
  if (!(std::abs(w) > kSingularTolerance)) {
    throw GeometryError(GeometryErrc::AtInfinity, "point maps to infinity");
  }
  return {(m[0][0] * p.x + m[0][1] * p.y + m[0][2]) / w, (m[1][0] * p.x + m[1][1] * p.y + m[1][2]) / w};
}

ScreenPoint apply(const Homography& h, CameraPoint p) {
  const Vec2 r = transform(h, {p.x, p.y});
  return {r.x, r.y};
}

Homography invert(const Homography& h) {
  const auto& m = h.matrix();
  const double det = h.determinant();
  if (!(std::abs(det) > kSingularTolerance)) degenerate("determinant below tolerance; not invertible");
  Matrix3 adj{};
  adj[0][0] = m[1][1] * m[2][2] - m[1][2] * m[2][1];
  adj[0][1] = m[0][2] * m[2][1] - m[0][1] * m[2][2];
  adj[0][2] = m[0][1] * m[1][2] - m[0][2] * m[1][1];
  adj[1][0] = m[1][2] * m[2][0] - m[1][0] * m[2][2];
  adj[1][1] = m[0][0] * m[2][2] - m[0][2] * m[2][0];
  adj[1][2] = m[0][2] * m[1][0] - m[0][0] * m[1][2];
  adj[2][0] = m[1][0] * m[2][1] - m[1][1] * m[2][0];
  adj[2][1] = m[0][1] * m[2][0] - m[0][0] * m[2][1];
  adj[2][2] = m[0][0] * m[1][1] - m[0][1] * m[1][0];
  return Homography::from_matrix(adj);
}

}  // namespace irboard::geometry
