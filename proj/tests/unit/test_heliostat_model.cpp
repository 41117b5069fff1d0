#include <gtest/gtest.h>

#include <random>

#include "heliostat/scene.hpp"
#include "heliostat/sunshape.hpp"
#include "heliostat/surface.hpp"
#include "heliostat/synth.hpp"

using namespace helio;

namespace {

HeliostatSurface random_surface(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1e-3, 1e-3);
    HeliostatSurface h;
    for (auto &f : h.facets)
        for (int i = 0; i < kGridSize; ++i)
            for (int j = 0; j < kGridSize; ++j)
                f.z_ctrl(i, j) = u(rng);
    return h;
}

// Brute-force mean over a dense cell-centred grid.
double dense_mean(const FacetSpline &s, int n = 256) {
    double m = 0.0;
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            m += surface_eval(s, (a + 0.5) / n, (b + 0.5) / n);
    return m / (n * n);
}

} // namespace

TEST(Reflect, Examples) {
    EXPECT_TRUE(reflect(Vec3(0, 0, -1), Vec3::UnitZ()).isApprox(Vec3(0, 0, 1)));
    const Vec3 r = reflect(Vec3(1, 0, -1).normalized(), Vec3::UnitZ());
    EXPECT_NEAR((r - Vec3(1, 0, 1).normalized()).norm(), 0.0, 1e-15);
    const Vec3 d = Vec3(1, 2, 0).normalized();
    EXPECT_EQ(reflect(d, Vec3::UnitZ()), d);
}

TEST(Align, Examples) {
    Mat3 r = align_heliostat(Vec3(0, 0, 0), Vec3(0, 0, -1), Vec3(0, 0, 10));
    EXPECT_NEAR((r.col(2) - Vec3(0, 0, 1)).norm(), 0.0, 1e-15);
    r = align_heliostat(Vec3(0, 0, 0), Vec3(0, 0, -1), Vec3(0, 10, 0));
    EXPECT_NEAR((r.col(2) - Vec3(0, 1, 1).normalized()).norm(), 0.0, 1e-15);
}

TEST(Align, ReflectionLawOnRandomScenes) {
    Rng rng(11);
    const PlantConfig plant;
    for (int n = 0; n < 1000; ++n) {
        const Vec3 pos = sample_field_position(rng, plant);
        const Vec3 sun = sample_sun_position(rng, plant.latitude_deg);
        const Vec3 aim = primary_target(plant).center + Vec3(uniform(rng, -1, 1), 0, uniform(rng, -1, 1));
        const Mat3 r = align_heliostat(pos, sun, aim);
        EXPECT_NEAR((r.transpose() * r - Mat3::Identity()).norm(), 0.0, 1e-12);
        EXPECT_NEAR(r.determinant(), 1.0, 1e-12);
        EXPECT_NEAR(r.col(0).z(), 0.0, 1e-12);
        const Vec3 out = reflect(sun, r.col(2));
        EXPECT_NEAR((out - (aim - pos).normalized()).norm(), 0.0, 1e-9);
    }
}

TEST(Align, Errors) {
    try {
        align_heliostat(Vec3(0, 100, 2), Vec3(0, 0, 1), Vec3(0, 0, 50));
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.kind(), ErrorKind::alignment);
    }
    EXPECT_THROW(align_heliostat(Vec3(0, 0, 50), Vec3(0, 0, -1), Vec3(0, 0, 50)), Error);
}

TEST(Sun, NoonElevations) {
    // Day 172 is the June solstice (declination +23.44 in Cooper's formula).
    EXPECT_NEAR(solar_declination_deg(172), 23.44, 0.01);
    EXPECT_NEAR(sun_elevation_deg(sun_direction(50.91, 23.44, 0.0)), 62.53, 0.1);
    EXPECT_NEAR(sun_elevation_deg(sun_direction(50.91, 0.0, 0.0)), 39.09, 0.01);
    EXPECT_NEAR(sun_elevation_deg(sun_direction_at(50.91, 172, 12.0)), 62.6, 0.1);
    // Noon sun is due south: the direction of travel points north.
    const Vec3 d = sun_direction(50.91, 0.0, 0.0);
    EXPECT_NEAR(d.x(), 0.0, 1e-15);
    EXPECT_GT(d.y(), 0.0);
}

TEST(Sun, MorningIsEast) {
    const Vec3 d = sun_direction_at(50.91, 172, 8.0);
    EXPECT_LT(d.x(), 0.0); // light travels west
}

TEST(Sun, SamplesAboveMinimumElevation) {
    Rng rng(12);
    for (int n = 0; n < 10000; ++n) {
        const Vec3 d = sample_sun_position(rng, 50.91, 10.0);
        EXPECT_GE(sun_elevation_deg(d), 10.0);
        EXPECT_NEAR(d.norm(), 1.0, 1e-12);
    }
    Rng polar(13);
    EXPECT_THROW(sample_sun_position(polar, 89.9, 80.0), Error);
}

TEST(Field, SampleBounds) {
    Rng rng(14);
    const PlantConfig plant;
    double min_d = 1e9, max_d = 0, max_az = 0;
    for (int n = 0; n < 10000; ++n) {
        const Vec3 p = sample_field_position(rng, plant);
        min_d = std::min(min_d, horizontal_distance(p));
        max_d = std::max(max_d, horizontal_distance(p));
        max_az = std::max(max_az, std::abs(field_azimuth_deg(p)));
        EXPECT_EQ(p.z(), plant.pedestal_height);
        EXPECT_GT(p.y(), 0.0);
    }
    EXPECT_GE(min_d, 25.0);
    EXPECT_LE(max_d, 300.0);
    EXPECT_LE(max_az, 45.0);
    EXPECT_LT(min_d, 30.0);
    EXPECT_GT(max_d, 295.0);
}

TEST(Sunshape, ZeroWidthReturnsDirection) {
    const Vec3 dir = Vec3(0.1, 0.3, -1).normalized();
    Rng rng(15);
    EXPECT_EQ(sample_sunshape(dir, SunShape::pillbox(0.0), rng), dir);
}

TEST(Sunshape, PillboxSupportAndMean) {
    const Vec3 dir = Vec3(0.2, 0.5, -1).normalized();
    const SunShape shape = SunShape::pillbox(4.65);
    Rng rng(16);
    const int n = 1000000;
    double max_angle = 0.0;
    Vec3 mean = Vec3::Zero();
    for (int k = 0; k < n; ++k) {
        const Vec3 d = sample_sunshape(dir, shape, rng);
        max_angle = std::max(max_angle, angle_between(d, dir));
        mean += d;
    }
    mean /= n;
    EXPECT_LE(max_angle, 4.65e-3 + 1e-12);
    EXPECT_GT(max_angle, 4.6e-3);
    // Transverse components have sd <= 4.65e-3 / 2; three standard errors.
    const double tol = 3.0 * 4.65e-3 / 2.0 / std::sqrt(double(n));
    const Vec3 t1 = any_orthogonal(dir), t2 = dir.cross(t1);
    EXPECT_LT(std::abs(mean.dot(t1)), tol);
    EXPECT_LT(std::abs(mean.dot(t2)), tol);
}

TEST(Sunshape, GaussianRadialSpread) {
    const Vec3 dir(0, 0, -1);
    Rng rng(17);
    const int n = 200000;
    double s2 = 0.0;
    for (int k = 0; k < n; ++k) {
        const double a = angle_between(sample_sunshape(dir, SunShape::gaussian(2.0), rng), dir);
        s2 += a * a;
    }
    // Polar angle is |N(0, sigma)| so E[theta^2] = sigma^2.
    EXPECT_NEAR(std::sqrt(s2 / n), 2e-3, 2e-5);
}

TEST(Layout, AreaIndependentOfGap) {
    HeliostatSurface h;
    const double a0 = h.mirror_area();
    EXPECT_NEAR(a0, 4 * 1.6 * 1.25, 1e-12);
    h.facet_layout.gap = 0.2;
    EXPECT_EQ(h.mirror_area(), a0);
    // Facets tile a 2x2 arrangement symmetric about the centre.
    for (int f = 0; f < kFacetCount; ++f) {
        const Vec3 o = h.facet_origin(f), opp = h.facet_origin(kFacetCount - 1 - f);
        EXPECT_NEAR(o.x() + kFacetWidth + opp.x(), 0.0, 1e-12);
        EXPECT_NEAR(o.y() + kFacetHeight + opp.y(), 0.0, 1e-12);
    }
    EXPECT_NEAR(h.facet_origin(1).x() - (h.facet_origin(0).x() + kFacetWidth), 0.2, 1e-12);
}

TEST(ZeroMean, ConstantOffsetRemoved) {
    HeliostatSurface h;
    for (auto &f : h.facets)
        f.z_ctrl.setConstant(1e-3);
    const HeliostatSurface z = enforce_zero_mean(h);
    for (const auto &f : z.facets)
        EXPECT_LT(f.z_ctrl.cwiseAbs().maxCoeff(), 1e-15);
}

TEST(ZeroMean, MeanMatchesDenseSampling) {
    const HeliostatSurface h = enforce_zero_mean(random_surface(21));
    for (const auto &f : h.facets) {
        EXPECT_NEAR(facet_mean_height(f), 0.0, 1e-15);
        EXPECT_NEAR(dense_mean(f), 0.0, 2e-6);
    }
}

TEST(ZeroMean, IdempotentAndCommutesWithRotation) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const HeliostatSurface h = random_surface(seed);
        const HeliostatSurface z = enforce_zero_mean(h);
        const HeliostatSurface zz = enforce_zero_mean(z);
        for (int f = 0; f < kFacetCount; ++f)
            EXPECT_LT((zz.facets[f].z_ctrl - z.facets[f].z_ctrl).cwiseAbs().maxCoeff(), 1e-18);
        const HeliostatSurface a = enforce_zero_mean(rotate_180(h)), b = rotate_180(enforce_zero_mean(h));
        for (int f = 0; f < kFacetCount; ++f)
            EXPECT_LT((a.facets[f].z_ctrl - b.facets[f].z_ctrl).cwiseAbs().maxCoeff(), 1e-15);
    }
}

TEST(ZeroMean, TiltKept) {
    FacetSpline s;
    s.z_ctrl = tilt_grid(s, 1e-3, 0.0);
    const FacetSpline z = enforce_zero_mean(s);
    EXPECT_LT((z.z_ctrl - s.z_ctrl).cwiseAbs().maxCoeff(), 1e-15);
    // A tilt about the corner picks up exactly the centre offset.
    FacetSpline c;
    for (int i = 0; i < kGridSize; ++i)
        c.z_ctrl.row(i).setConstant(1e-3 * c.control_x(i));
    const FacetSpline cz = enforce_zero_mean(c);
    EXPECT_LT((cz.z_ctrl - s.z_ctrl).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Rotate, InvolutionAndPointwise) {
    const HeliostatSurface h = random_surface(31);
    EXPECT_EQ(rotate_180(rotate_180(h)), h);
    EXPECT_EQ(rotate_180(flat_heliostat()), flat_heliostat());

    // z = a * X in the heliostat frame becomes z = -a * X.
    HeliostatSurface tilted;
    for (int f = 0; f < kFacetCount; ++f) {
        const Vec3 o = tilted.facet_origin(f);
        tilted.facets[f].z_ctrl = project_heights(tilted.facets[f], [&](double x, double) { return 1e-3 * (o.x() + x); });
    }
    const HeliostatSurface r = rotate_180(tilted);
    std::mt19937_64 rng(32);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int n = 0; n < 200; ++n) {
        const int f = static_cast<int>(rng() % 4);
        const double x = u(rng) * kFacetWidth, y = u(rng) * kFacetHeight;
        const Vec3 p = r.facet_origin(f) + Vec3(x, y, 0);
        // Point (-X, -Y) lives on the opposite facet at mirrored local coordinates.
        const int g = kFacetCount - 1 - f;
        const double zr = r.sample(f, x, y).z;
        const double zo = tilted.sample(g, kFacetWidth - x, kFacetHeight - y).z;
        EXPECT_NEAR(zr, zo, 1e-9);
        EXPECT_NEAR(zr, -1e-3 * p.x(), 1e-9);
    }
}
