#ifndef GROUNDFLOW_GEOMETRY_HPP
#define GROUNDFLOW_GEOMETRY_HPP

#include <cmath>

namespace groundflow
{
struct Vec2
{
  double x = 0.0;
  double y = 0.0;

  Vec2 & operator+=(const Vec2 & o)
  {
    x += o.x;
    y += o.y;
    return *this;
  }
  Vec2 & operator-=(const Vec2 & o)
  {
    x -= o.x;
    y -= o.y;
    return *this;
  }
  Vec2 & operator*=(double s)
  {
    x *= s;
    y *= s;
    return *this;
  }
  friend Vec2 operator+(Vec2 a, const Vec2 & b) { return a += b; }
  friend Vec2 operator-(Vec2 a, const Vec2 & b) { return a -= b; }
  friend Vec2 operator*(Vec2 a, double s) { return a *= s; }
  friend Vec2 operator*(double s, Vec2 a) { return a *= s; }
  friend Vec2 operator-(const Vec2 & a) { return {-a.x, -a.y}; }
  friend bool operator==(const Vec2 &, const Vec2 &) = default;

  double norm() const { return std::hypot(x, y); }
  double squared_norm() const { return x * x + y * y; }
};

inline double dot(const Vec2 & a, const Vec2 & b) { return a.x * b.x + a.y * b.y; }
inline double cross(const Vec2 & a, const Vec2 & b) { return a.x * b.y - a.y * b.x; }

/// Row-major 2x2 matrix [[a, b], [c, d]].
struct Mat2
{
  double a = 1.0, b = 0.0;
  double c = 0.0, d = 1.0;

  static Mat2 rotation(double theta)
  {
    const double cs = std::cos(theta);
    const double sn = std::sin(theta);
    return {cs, -sn, sn, cs};
  }

  double det() const { return a * d - b * c; }
  Mat2 transposed() const { return {a, c, b, d}; }

  friend Mat2 operator*(const Mat2 & m, const Mat2 & n)
  {
    return {
      m.a * n.a + m.b * n.c, m.a * n.b + m.b * n.d, m.c * n.a + m.d * n.c, m.c * n.b + m.d * n.d};
  }
  friend Vec2 operator*(const Mat2 & m, const Vec2 & v)
  {
    return {m.a * v.x + m.b * v.y, m.c * v.x + m.d * v.y};
  }
};

/// Rotates v counter-clockwise by theta.
inline Vec2 rotate(const Vec2 & v, double theta) { return Mat2::rotation(theta) * v; }

}  // namespace groundflow

#endif  // GROUNDFLOW_GEOMETRY_HPP
