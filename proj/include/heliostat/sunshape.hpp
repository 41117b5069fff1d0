#pragma once

#include <cmath>
#include <string>

#include <boost/math/special_functions/erf.hpp>

#include "heliostat/error.hpp"
#include "heliostat/geometry.hpp"
#include "heliostat/random.hpp"

namespace helio {

enum class SunShapeModel { pillbox, gaussian };

struct SunShape {
    SunShapeModel model = SunShapeModel::pillbox;
    double width_mrad = 4.65; // pillbox half-angle or gaussian sigma

    static SunShape pillbox(double half_angle_mrad = 4.65) { return {SunShapeModel::pillbox, half_angle_mrad}; }
    static SunShape gaussian(double sigma_mrad) { return {SunShapeModel::gaussian, sigma_mrad}; }
};

inline SunShapeModel parse_sunshape_model(const std::string &s) {
    if (s == "pillbox")
        return SunShapeModel::pillbox;
    if (s == "gaussian")
        return SunShapeModel::gaussian;
    throw Error(ErrorKind::config, "unknown sun shape model: " + s);
}

inline const char *to_string(SunShapeModel m) { return m == SunShapeModel::pillbox ? "pillbox" : "gaussian"; }

/// Maps (u1, u2) in [0,1)^2 to a direction around `dir`. u1 drives the polar angle, u2 the
/// azimuth. Pillbox: uniform in solid angle inside the cone. Gaussian: polar angle
/// |N(0, sigma)| via the inverse half-normal CDF.
inline Vec3 sunshape_direction(const Vec3 &dir, const SunShape &shape, double u1, double u2) {
    if (!(shape.width_mrad > 0.0))
        return dir;
    const double w = shape.width_mrad * 1e-3;
    double cos_t, sin_t;
    if (shape.model == SunShapeModel::pillbox) {
        const double one_minus_cos_max = 2.0 * std::sin(0.5 * w) * std::sin(0.5 * w);
        const double one_minus_cos = u1 * one_minus_cos_max;
        cos_t = 1.0 - one_minus_cos;
        sin_t = std::sqrt(one_minus_cos * (2.0 - one_minus_cos));
    } else {
        const double theta = w * std::sqrt(2.0) * boost::math::erf_inv(std::min(u1, 1.0 - 1e-16));
        cos_t = std::cos(theta);
        sin_t = std::sin(theta);
    }
    const double phi = 2.0 * kPi * u2;
    const Vec3 t1 = any_orthogonal(dir);
    const Vec3 t2 = dir.cross(t1);
    return (cos_t * dir + sin_t * (std::cos(phi) * t1 + std::sin(phi) * t2)).normalized();
}

/// Random direction drawn from the sun shape around `dir`.
inline Vec3 sample_sunshape(const Vec3 &dir, const SunShape &shape, Rng &rng) {
    const double u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    return sunshape_direction(dir, shape, u1, u2);
}

} // namespace helio
