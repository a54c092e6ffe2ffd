#include "pushdqn/geometry.h"

#include <algorithm>

namespace pushdqn {

double DistanceToSegment(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.Dot(ab);
  if (len2 == 0.0) return Distance(p, a);
  const double t = std::clamp((p - a).Dot(ab) / len2, 0.0, 1.0);
  return Distance(p, a + ab * t);
}

void to_json(nlohmann::json& j, const Vec2& v) { j = {{"x", v.x}, {"y", v.y}}; }

void from_json(const nlohmann::json& j, Vec2& v) {
  v.x = j.at("x").get<double>();
  v.y = j.at("y").get<double>();
}

}  // namespace pushdqn
