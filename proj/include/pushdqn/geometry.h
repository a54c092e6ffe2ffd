#ifndef PUSHDQN_GEOMETRY_H_
#define PUSHDQN_GEOMETRY_H_

#include <cmath>

#include <nlohmann/json.hpp>

namespace pushdqn {

// Planar vector on the work-surface, in centimeters.
struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  constexpr Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
  constexpr Vec2& operator+=(const Vec2& o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  constexpr bool operator==(const Vec2&) const = default;

  double Norm() const { return std::hypot(x, y); }
  constexpr double Dot(const Vec2& o) const { return x * o.x + y * o.y; }
};

inline double Distance(const Vec2& a, const Vec2& b) { return (a - b).Norm(); }

// Distance from p to the closed segment [a, b].
double DistanceToSegment(const Vec2& p, const Vec2& a, const Vec2& b);

void to_json(nlohmann::json& j, const Vec2& v);
void from_json(const nlohmann::json& j, Vec2& v);

}  // namespace pushdqn

#endif  // PUSHDQN_GEOMETRY_H_
