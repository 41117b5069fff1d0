#pragma once

#include <cmath>
#include <optional>
#include <string>

#include "heliostat/error.hpp"
#include "heliostat/geometry.hpp"
#include "heliostat/random.hpp"

namespace helio {

// World frame: x east, y north, z up; the tower foot is the origin and the field lies north.

/// Plant-level geometry shared by all scenes. Defaults follow a north-field research tower.
struct PlantConfig {
    double latitude_deg = 50.91;
    double target_height = 50.0;          // m, primary target centre
    double secondary_offset_east = -18.0; // m, negative = west
    double secondary_offset_up = 15.0;    // m
    double field_min_distance = 25.0;     // m, horizontal
    double field_max_distance = 300.0;    // m, horizontal
    double field_max_azimuth_deg = 45.0;  // from north, either side
    double pedestal_height = 2.0;         // m, heliostat centre above ground
    double min_sun_elevation_deg = 10.0;
    double aim_jitter = 0.0; // m, half-width of uniform aim-point jitter in the target plane
};

/// Planar receiver/target. (e1, e2, normal) is right-handed; the normal faces the field,
/// e1 points west (the observer's right when facing the tower) and e2 points up.
struct TargetPlane {
    Vec3 center = Vec3(0.0, 0.0, 50.0);
    Vec3 e1 = Vec3(-1.0, 0.0, 0.0);
    Vec3 e2 = Vec3(0.0, 0.0, 1.0);
    Vec3 normal = Vec3(0.0, 1.0, 0.0);

    Vec2 to_plane(const Vec3 &p) const {
        const Vec3 d = p - center;
        return {d.dot(e1), d.dot(e2)};
    }
    Vec3 to_world(const Vec2 &q) const { return center + q.x() * e1 + q.y() * e2; }
};

inline TargetPlane primary_target(const PlantConfig &cfg = {}) {
    TargetPlane t;
    t.center = Vec3(0.0, 0.0, cfg.target_height);
    return t;
}

inline TargetPlane secondary_target(const PlantConfig &cfg = {}) {
    TargetPlane t = primary_target(cfg);
    t.center += Vec3(cfg.secondary_offset_east, 0.0, cfg.secondary_offset_up);
    return t;
}

struct Scene {
    Vec3 sun_dir = Vec3(0.0, 0.0, -1.0); // unit, from the sun toward the field
    Vec3 heliostat_pos = Vec3(0.0, 100.0, 2.0);
    Vec3 aim_point = Vec3(0.0, 0.0, 50.0);
    TargetPlane target{};
    std::optional<Mat3> alignment; // heliostat frame -> world, columns are frame axes
};

/// Rotation whose z column is the bisector normal n = normalize(o - i); x stays horizontal.
/// i is the incoming sun direction, o the unit vector from the heliostat to the aim point.
inline Mat3 align_heliostat(const Vec3 &heliostat_pos, const Vec3 &sun_dir, const Vec3 &aim_point) {
    if (!(sun_dir.z() < 0.0))
        throw Error(ErrorKind::alignment, "sun below horizon");
    const Vec3 to_aim = aim_point - heliostat_pos;
    if (to_aim.norm() < 1e-9)
        throw Error(ErrorKind::alignment, "aim point coincides with heliostat");
    const Vec3 i = sun_dir.normalized();
    const Vec3 o = to_aim.normalized();
    const Vec3 bis = o - i;
    if (bis.norm() < 1e-9)
        throw Error(ErrorKind::alignment, "reflected and incoming directions coincide");
    const Vec3 n = bis.normalized();
    Vec3 x = Vec3::UnitZ().cross(n);
    if (x.norm() < 1e-12)
        x = Vec3::UnitX();
    x.normalize();
    const Vec3 y = n.cross(x);
    Mat3 r;
    r.col(0) = x;
    r.col(1) = y;
    r.col(2) = n;
    return r;
}

inline Scene aligned(Scene s) {
    s.alignment = align_heliostat(s.heliostat_pos, s.sun_dir, s.aim_point);
    return s;
}

/// Solar declination (deg) for a fractional day of year (Cooper's approximation).
inline double solar_declination_deg(double day_of_year) {
    return 23.44 * std::sin(2.0 * kPi * (284.0 + day_of_year) / 365.0);
}

/// Sun direction (pointing from the sun toward the ground) for latitude, declination and
/// hour angle (deg, 0 at solar noon, positive in the afternoon).
inline Vec3 sun_direction(double latitude_deg, double declination_deg, double hour_angle_deg) {
    const double phi = deg2rad(latitude_deg), dec = deg2rad(declination_deg), w = deg2rad(hour_angle_deg);
    const Vec3 to_sun(-std::cos(dec) * std::sin(w),
                      std::cos(phi) * std::sin(dec) - std::sin(phi) * std::cos(dec) * std::cos(w),
                      std::sin(phi) * std::sin(dec) + std::cos(phi) * std::cos(dec) * std::cos(w));
    return -to_sun.normalized();
}

inline Vec3 sun_direction_at(double latitude_deg, double day_of_year, double solar_hour) {
    return sun_direction(latitude_deg, solar_declination_deg(day_of_year), 15.0 * (solar_hour - 12.0));
}

inline double sun_elevation_deg(const Vec3 &sun_dir) { return rad2deg(std::asin(-sun_dir.normalized().z())); }

/// Uniform day of year and solar time, rejected below the minimum elevation.
inline Vec3 sample_sun_position(Rng &rng, double latitude_deg, double min_elevation_deg = 10.0) {
    for (int attempt = 0; attempt < 10000; ++attempt) {
        const double day = uniform(rng, 0.0, 365.0);
        const double hour = uniform(rng, 0.0, 24.0);
        const Vec3 d = sun_direction_at(latitude_deg, day, hour);
        if (sun_elevation_deg(d) >= min_elevation_deg)
            return d;
    }
    throw Error(ErrorKind::config, "no sun position above the minimum elevation after 10^4 draws");
}

/// Azimuth of a field position measured from north, positive toward east (deg).
inline double field_azimuth_deg(const Vec3 &p) { return rad2deg(std::atan2(p.x(), p.y())); }
inline double horizontal_distance(const Vec3 &p) { return std::hypot(p.x(), p.y()); }

inline Vec3 field_position(const PlantConfig &cfg, double distance, double azimuth_deg) {
    const double az = deg2rad(azimuth_deg);
    return {distance * std::sin(az), distance * std::cos(az), cfg.pedestal_height};
}

/// Area-uniform over the annular sector north of the tower.
inline Vec3 sample_field_position(Rng &rng, const PlantConfig &cfg = {}) {
    const double r0 = cfg.field_min_distance, r1 = cfg.field_max_distance;
    const double r = std::sqrt(uniform(rng, r0 * r0, r1 * r1));
    const double az = uniform(rng, -cfg.field_max_azimuth_deg, cfg.field_max_azimuth_deg);
    return field_position(cfg, r, az);
}

} // namespace helio
