#pragma once

#include <cmath>

#include <Eigen/Dense>

namespace helio {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = 3.14159265358979323846;

constexpr double deg2rad(double d) { return d * kPi / 180.0; }
constexpr double rad2deg(double r) { return r * 180.0 / kPi; }

/// Specular reflection of direction d about unit normal n.
inline Vec3 reflect(const Vec3 &d, const Vec3 &n) { return d - 2.0 * d.dot(n) * n; }

/// Angle between two directions, accurate near zero.
inline double angle_between(const Vec3 &a, const Vec3 &b) {
    return std::atan2(a.cross(b).norm(), a.dot(b));
}

/// Any unit vector orthogonal to `d` (d must be unit length).
inline Vec3 any_orthogonal(const Vec3 &d) {
    const Vec3 helper = std::abs(d.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
    return d.cross(helper).normalized();
}

} // namespace helio
