#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "heliostat/parallel.hpp"
#include "heliostat/random.hpp"
#include "heliostat/scene.hpp"
#include "heliostat/sunshape.hpp"
#include "heliostat/surface.hpp"

namespace helio {

/// Ray landing point in target-plane coordinates (m along e1, e2).
struct Hit {
    double x = 0.0;
    double y = 0.0;
    std::uint8_t facet = 0;
};

struct HitList {
    std::vector<Hit> hits;
    std::size_t n_rays = 0;
    std::size_t n_missed = 0; // hit the mirror back side, travelled away from or parallel to the plane
};

struct TraceOptions {
    SunShape sunshape{};
    int threads = 0; // 0 = default_threads()
};

namespace detail {

inline constexpr double kGolden = 0.6180339887498949; // (sqrt 5 - 1) / 2

inline double frac(double x) { return x - std::floor(x); }

/// Largest change of the mirror normal per metre between neighbouring probes (rad/m).
template <MirrorModel Mirror>
double normal_variation(const Mirror &mirror, int probes = 17) {
    double worst = 0.0;
    std::vector<Vec3> n(static_cast<std::size_t>(probes) * probes);
    for (int f = 0; f < kFacetCount; ++f) {
        const double dx = mirror.facet_width(f) / probes, dy = mirror.facet_height(f) / probes;
        for (int j = 0; j < probes; ++j)
            for (int i = 0; i < probes; ++i)
                n[j * probes + i] = mirror.sample(f, (i + 0.5) * dx, (j + 0.5) * dy).normal;
        for (int j = 0; j < probes; ++j)
            for (int i = 0; i < probes; ++i) {
                const Vec3 &c = n[j * probes + i];
                if (i + 1 < probes)
                    worst = std::max(worst, (n[j * probes + i + 1] - c).norm() / dx);
                if (j + 1 < probes)
                    worst = std::max(worst, (n[(j + 1) * probes + i] - c).norm() / dy);
            }
    }
    return worst;
}

/// Relative image distortion below which facets count as planar.
inline constexpr double kPlanarDistortion = 0.1;

/// Number of sun-direction sweeps for a ray budget; each sweep shares one sun direction.
/// Curved mirrors (distortion above kPlanarDistortion) get about 3x more sweeps.
inline std::size_t sweep_count(std::size_t n_rays, double distortion = 0.0) {
    const std::size_t quads = n_rays / 4;
    const double scale = distortion < kPlanarDistortion ? 330.0 : 33.0;
    const auto k = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n_rays) / scale)));
    return std::clamp<std::size_t>(k, 1, std::max<std::size_t>(1, quads));
}

struct RayContext {
    Vec3 pos;
    Mat3 rot;
    TargetPlane target;
};

template <MirrorModel Mirror>
inline bool shoot(const RayContext &ctx, const Mirror &mirror, int f, double x, double y, const Vec3 &d, Hit &out) {
    const MirrorSample s = mirror.sample(f, x, y);
    const Vec3 local = mirror.layout().facet_origin(f, mirror.facet_width(f), mirror.facet_height(f)) + Vec3(x, y, s.z);
    const Vec3 p = ctx.pos + ctx.rot * local;
    const Vec3 n = ctx.rot * s.normal;
    if (d.dot(n) >= 0.0)
        return false;
    const Vec3 r = reflect(d, n);
    const double denom = r.dot(ctx.target.normal);
    if (denom >= 0.0)
        return false;
    const double t = (ctx.target.center - p).dot(ctx.target.normal) / denom;
    if (!(t > 0.0))
        return false;
    const Vec2 q = ctx.target.to_plane(p + t * r);
    out = {q.x(), q.y(), static_cast<std::uint8_t>(f)};
    return true;
}

} // namespace detail

/// Seeded Monte Carlo trace of one heliostat onto the scene's target plane.
///
/// Rays are organised in sweeps. Every sweep uses one sun direction from a randomly shifted
/// 2D Kronecker lattice over the sun shape, and places its rays on randomly shifted
/// Kronecker lattices over the facets. The sweep count depends on how much the mirror's
/// normal field distorts the image at the aim distance. Rays come in quads: facets 0 and 1 get lattice
/// points, facets 3 and 2 the point reflections of those (the heliostat is symmetric about
/// its centre), so equal-area facets receive equal ray counts. Each sweep draws from its
/// own stream derived from (seed, sweep), and results are concatenated in sweep order, so
/// the output does not depend on the thread count.
template <MirrorModel Mirror>
HitList trace(const Scene &scene, const Mirror &mirror, std::size_t n_rays, std::uint64_t seed,
              const TraceOptions &opt = {}) {
    if (!scene.alignment)
        throw Error(ErrorKind::usage, "scene is not aligned; call aligned() first");
    if (n_rays < 1)
        throw Error(ErrorKind::config, "n_rays must be >= 1");
    const double w = mirror.facet_width(0), h = mirror.facet_height(0);
    for (int f = 1; f < kFacetCount; ++f)
        if (mirror.facet_width(f) != w || mirror.facet_height(f) != h)
            throw Error(ErrorKind::input, "tracer requires equally sized facets");

    const detail::RayContext ctx{scene.heliostat_pos, *scene.alignment, scene.target};
    const Vec3 sun = scene.sun_dir.normalized();
    const double distance = (scene.aim_point - scene.heliostat_pos).norm();
    const std::size_t sweeps = detail::sweep_count(n_rays, 2.0 * distance * detail::normal_variation(mirror));
    const std::size_t quads = n_rays / 4, leftover = n_rays % 4;

    Rng sun_rng = make_rng(seed, {0x5a5a5a5aULL});
    const double s1 = uniform01(sun_rng), s2 = uniform01(sun_rng);

    std::vector<HitList> parts(sweeps);
    parallel_for(sweeps, opt.threads, [&](std::size_t k) {
        Rng rng = make_rng(seed, {k});
        const double u1 = detail::frac(s1 + (static_cast<double>(k) + 0.5) / static_cast<double>(sweeps));
        const double u2 = detail::frac(s2 + static_cast<double>(k) * detail::kGolden);
        const Vec3 d = sunshape_direction(sun, opt.sunshape, u1, u2);

        const std::size_t q = quads / sweeps + (k < quads % sweeps ? 1 : 0);
        const std::size_t extra = k + 1 == sweeps ? leftover : 0;
        HitList &part = parts[k];
        part.n_rays = 4 * q + extra;
        part.hits.reserve(part.n_rays);
        const std::array<double, 4> shift{uniform01(rng), uniform01(rng), uniform01(rng), uniform01(rng)};
        Hit hit;
        for (std::size_t i = 0; i < q; ++i) {
            for (int f = 0; f < 2; ++f) {
                const double x = w * detail::frac(shift[2 * f] + (static_cast<double>(i) + 0.5) / static_cast<double>(q));
                const double y = h * detail::frac(shift[2 * f + 1] + static_cast<double>(i) * detail::kGolden);
                if (detail::shoot(ctx, mirror, f, x, y, d, hit))
                    part.hits.push_back(hit);
                else
                    ++part.n_missed;
                if (detail::shoot(ctx, mirror, kFacetCount - 1 - f, w - x, h - y, d, hit))
                    part.hits.push_back(hit);
                else
                    ++part.n_missed;
            }
        }
        for (std::size_t e = 0; e < extra; ++e) {
            const int f = static_cast<int>(std::uniform_int_distribution<int>(0, kFacetCount - 1)(rng));
            const double x = w * uniform01(rng), y = h * uniform01(rng);
            if (detail::shoot(ctx, mirror, f, x, y, d, hit))
                part.hits.push_back(hit);
            else
                ++part.n_missed;
        }
    });

    HitList out;
    out.n_rays = n_rays;
    std::size_t total = 0;
    for (const auto &p : parts)
        total += p.hits.size();
    out.hits.reserve(total);
    for (auto &p : parts) {
        out.hits.insert(out.hits.end(), p.hits.begin(), p.hits.end());
        out.n_missed += p.n_missed;
    }
    return out;
}

/// Ideal heliostat: the same tracer with every control point at zero.
inline HitList trace_ideal_hits(const Scene &scene, std::size_t n_rays, std::uint64_t seed, const TraceOptions &opt = {}) {
    static const HeliostatSurface flat = flat_heliostat();
    return trace(scene, flat, n_rays, seed, opt);
}

} // namespace helio
