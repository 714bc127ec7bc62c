#pragma once

#include <cmath>

namespace magicitem {

/// Meters for positions, m/s for velocities, degrees for Euler rotations.
struct Vec3 {
  double x = 0;
  double y = 0;
  double z = 0;

  friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator*(Vec3 a, double s) { return {a.x * s, a.y * s, a.z * s}; }
  Vec3& operator+=(Vec3 o) { return *this = *this + o; }
  friend bool operator==(const Vec3&, const Vec3&) = default;

  double length() const { return std::sqrt(x * x + y * y + z * z); }
  bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

}  // namespace magicitem
