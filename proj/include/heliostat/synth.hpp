#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string>

#include "heliostat/normal_cloud.hpp"
#include "heliostat/random.hpp"
#include "heliostat/surface.hpp"

namespace helio {

/// Maximum |deviation| of any generated surface from the ideal plane (m).
inline constexpr double kMaxDeviation = 2e-3;

/// Per-facet slope pair (mrad): dz/dx and dz/dy of a rigid facet tilt.
struct FacetTilt {
    double dzdx_mrad = 0.0;
    double dzdy_mrad = 0.0;
};

/// Priors for the synthetic deformation families. All amplitudes are upper bounds or
/// scales; the concrete values are drawn from `seed`.
struct DeformationSpec {
    double canting_mrad = 0.5;    // sigma of each per-facet tilt slope
    double waviness_amp_mm = 1.0; // amplitude drawn in [0, this]
    double waviness_freq = 3.0;   // periods per facet drawn in [1, this]
    double edge_bend_mm = 1.5;    // corner bump amplitude drawn in [-this, this]
    double edge_bend_length = 0.25; // m, corner bump radius
    std::uint64_t seed = 0;
    std::optional<std::array<FacetTilt, kFacetCount>> fixed_tilts; // overrides random canting

    static DeformationSpec none() {
        DeformationSpec s;
        s.canting_mrad = s.waviness_amp_mm = s.edge_bend_mm = 0.0;
        return s;
    }
};

inline void validate(const DeformationSpec &s) {
    auto bad = [](double v) { return !std::isfinite(v) || v < 0.0; };
    if (bad(s.canting_mrad) || bad(s.waviness_amp_mm) || bad(s.edge_bend_mm) || bad(s.edge_bend_length))
        throw Error(ErrorKind::config, "deformation amplitudes must be finite and non-negative");
    if (!(s.waviness_freq >= 1.0) || !std::isfinite(s.waviness_freq))
        throw Error(ErrorKind::config, "waviness_freq must be >= 1 period per facet");
    const double half_extent = 0.5 * (kFacetWidth + kFacetHeight);
    if (s.waviness_amp_mm * 1e-3 > kMaxDeviation || s.edge_bend_mm * 1e-3 > kMaxDeviation ||
        s.canting_mrad * 1e-3 * half_extent > kMaxDeviation)
        throw Error(ErrorKind::config, "a deformation family alone exceeds the +-2 mm deviation bound");
    if (s.fixed_tilts) {
        for (const auto &t : *s.fixed_tilts)
            if (std::abs(t.dzdx_mrad) * 1e-3 * 0.5 * kFacetWidth + std::abs(t.dzdy_mrad) * 1e-3 * 0.5 * kFacetHeight >
                kMaxDeviation)
                throw Error(ErrorKind::config, "fixed tilt exceeds the +-2 mm deviation bound");
    }
}

/// Control grid reproducing the plane z = a (x - w/2) + b (y - h/2) exactly (linear
/// precision of the Greville lattice).
inline ControlGrid tilt_grid(const FacetSpline &shape, double dzdx, double dzdy) {
    ControlGrid g;
    for (int i = 0; i < kGridSize; ++i)
        for (int j = 0; j < kGridSize; ++j)
            g(i, j) = dzdx * (shape.control_x(i) - 0.5 * shape.width) + dzdy * (shape.control_y(j) - 0.5 * shape.height);
    return g;
}

/// Synthetic heliostat: canting tilt, separable sinusoidal waviness and corner bending,
/// projected onto the spline space, zero-mean per facet and bounded by +-2 mm.
inline HeliostatSurface gen_surface(const DeformationSpec &spec) {
    validate(spec);
    Rng rng = make_rng(spec.seed, {0x5eed});
    std::normal_distribution<double> tilt(0.0, spec.canting_mrad * 1e-3);
    HeliostatSurface h;
    h.id = "synthetic-" + std::to_string(spec.seed);
    for (int f = 0; f < kFacetCount; ++f) {
        FacetSpline &facet = h.facets[f];
        double a = 0.0, b = 0.0;
        if (spec.fixed_tilts) {
            a = (*spec.fixed_tilts)[f].dzdx_mrad * 1e-3;
            b = (*spec.fixed_tilts)[f].dzdy_mrad * 1e-3;
        } else if (spec.canting_mrad > 0.0) {
            a = tilt(rng);
            b = tilt(rng);
        }

        const double wav_amp = spec.waviness_amp_mm * 1e-3 * uniform01(rng);
        const double fx = uniform(rng, 1.0, spec.waviness_freq);
        const double fy = uniform(rng, 1.0, spec.waviness_freq);
        const double px = uniform(rng, 0.0, 2.0 * kPi);
        const double py = uniform(rng, 0.0, 2.0 * kPi);

        std::array<double, 4> bend{};
        for (auto &c : bend)
            c = spec.edge_bend_mm * 1e-3 * uniform(rng, -1.0, 1.0);

        ControlGrid z = tilt_grid(facet, a, b);
        if (wav_amp > 0.0 || spec.edge_bend_mm > 0.0) {
            const double w = facet.width, ht = facet.height, ell = spec.edge_bend_length;
            const std::array<Vec2, 4> corners{Vec2(0, 0), Vec2(w, 0), Vec2(0, ht), Vec2(w, ht)};
            z += project_heights(facet, [&](double x, double y) {
                double v = wav_amp * std::sin(2 * kPi * fx * x / w + px) * std::sin(2 * kPi * fy * y / ht + py);
                if (ell > 0.0)
                    for (int c = 0; c < 4; ++c) {
                        const double d2 = (Vec2(x, y) - corners[c]).squaredNorm();
                        v += bend[c] * std::exp(-d2 / (2.0 * ell * ell));
                    }
                return v;
            });
        }
        facet.z_ctrl = z;
    }
    h = enforce_zero_mean(h);
    const double peak = max_abs_control(h);
    if (peak > kMaxDeviation) {
        const double scale = kMaxDeviation / peak;
        for (auto &f : h.facets)
            f.z_ctrl *= scale;
    }
    return h;
}

/// Closed-form reference surfaces for out-of-basis fitting tests.
struct AnalyticSurface {
    enum class Kind { plane, paraboloid, sinusoid };
    Kind kind = Kind::plane;
    double slope_x = 0.0, slope_y = 0.0; // plane, facet-local
    double focal_length = 150.0;         // paraboloid about the heliostat centre
    double amplitude = 0.0, period_x = 1.0, period_y = 1.0; // sinusoid, facet-local
    FacetLayout facet_layout{};

    static AnalyticSurface plane(double dzdx, double dzdy = 0.0) {
        AnalyticSurface s;
        s.slope_x = dzdx;
        s.slope_y = dzdy;
        return s;
    }
    static AnalyticSurface paraboloid(double focal) {
        AnalyticSurface s;
        s.kind = Kind::paraboloid;
        s.focal_length = focal;
        return s;
    }
    static AnalyticSurface sinusoid(double amp, double px, double py) {
        AnalyticSurface s;
        s.kind = Kind::sinusoid;
        s.amplitude = amp;
        s.period_x = px;
        s.period_y = py;
        return s;
    }

    const FacetLayout &layout() const { return facet_layout; }
    double facet_width(int) const { return kFacetWidth; }
    double facet_height(int) const { return kFacetHeight; }

    /// Height and gradient (dz/dx, dz/dy) at facet-local coordinates.
    std::array<double, 3> jet(int f, double x, double y) const {
        switch (kind) {
        case Kind::plane:
            return {slope_x * x + slope_y * y, slope_x, slope_y};
        case Kind::paraboloid: {
            const Vec3 o = facet_layout.facet_origin(f);
            const double hx = o.x() + x, hy = o.y() + y, k = 1.0 / (4.0 * focal_length);
            return {k * (hx * hx + hy * hy), 2.0 * k * hx, 2.0 * k * hy};
        }
        case Kind::sinusoid: {
            const double ax = 2 * kPi / period_x, ay = 2 * kPi / period_y;
            return {amplitude * std::sin(ax * x) * std::sin(ay * y), amplitude * ax * std::cos(ax * x) * std::sin(ay * y),
                    amplitude * ay * std::sin(ax * x) * std::cos(ay * y)};
        }
        }
        return {0, 0, 0};
    }

    MirrorSample sample(int f, double x, double y) const {
        const auto j = jet(f, x, y);
        return {j[0], normal_from_slopes(j[1], j[2])};
    }
};

struct CloudOptions {
    double spacing = 0.005;   // m between samples
    double noise_mrad = 0.0;  // Gaussian angular noise per normal component
    std::uint64_t seed = 0;
    int min_per_axis = 50;
};

/// Regular per-facet grid of (position, normal) samples at cell centres. With the default
/// 5 mm spacing a 1.6 m x 1.25 m facet gives 320 x 250 = 80,000 samples.
template <MirrorModel Source>
NormalCloud synth_normal_cloud(const Source &source, const CloudOptions &opt = {}) {
    if (!(opt.spacing > 0.0) || !std::isfinite(opt.spacing))
        throw Error(ErrorKind::config, "cloud spacing must be positive");
    if (opt.noise_mrad < 0.0)
        throw Error(ErrorKind::config, "cloud noise must be non-negative");
    NormalCloud cloud;
    cloud.facet_layout = source.layout();
    Rng rng = make_rng(opt.seed, {0xc10d});
    std::normal_distribution<double> noise(0.0, opt.noise_mrad * 1e-3);
    for (int f = 0; f < kFacetCount; ++f) {
        const double w = source.facet_width(f), h = source.facet_height(f);
        const int nx = static_cast<int>(std::lround(w / opt.spacing));
        const int ny = static_cast<int>(std::lround(h / opt.spacing));
        if (nx < opt.min_per_axis || ny < opt.min_per_axis)
            throw Error(ErrorKind::config, "cloud spacing too coarse: need at least 50 x 50 samples per facet");
        CloudFacet &cf = cloud.facets[f];
        cf.width = w;
        cf.height = h;
        cf.points.reserve(static_cast<std::size_t>(nx) * ny);
        for (int iy = 0; iy < ny; ++iy)
            for (int ix = 0; ix < nx; ++ix) {
                const double x = w * (ix + 0.5) / nx, y = h * (iy + 0.5) / ny;
                MirrorSample s = source.sample(f, x, y);
                if (opt.noise_mrad > 0.0) {
                    const Vec3 t1 = any_orthogonal(s.normal), t2 = s.normal.cross(t1);
                    s.normal = (s.normal + noise(rng) * t1 + noise(rng) * t2).normalized();
                }
                cf.points.push_back({Vec3(x, y, s.z), s.normal});
            }
    }
    return cloud;
}

} // namespace helio
