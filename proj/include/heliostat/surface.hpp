#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "heliostat/facet_spline.hpp"
#include "heliostat/geometry.hpp"

namespace helio {

inline constexpr int kFacetCount = 4;

/// 2x2 facet arrangement in the heliostat frame. Facet f sits in column f % 2 (0 = -x side)
/// and row f / 2 (0 = -y side); the heliostat centre is the origin.
struct FacetLayout {
    double gap = 0.02; // m between adjacent facets

    /// Heliostat-frame position of the facet-local origin (the facet's (x=0, y=0) corner).
    Vec3 facet_origin(int f, double width = kFacetWidth, double height = kFacetHeight) const {
        const int col = f % 2, row = f / 2;
        const double ox = col == 0 ? -(width + 0.5 * gap) : 0.5 * gap;
        const double oy = row == 0 ? -(height + 0.5 * gap) : 0.5 * gap;
        return {ox, oy, 0.0};
    }
};

/// Local geometry of one mirror sample: height above the facet plane and unit normal,
/// both in the facet frame.
struct MirrorSample {
    double z = 0.0;
    Vec3 normal = Vec3::UnitZ();
};

/// Anything the ray tracer and cloud synthesiser can query facet by facet.
template <typename M>
concept MirrorModel = requires(const M &m, int f, double x, double y) {
    { m.layout() } -> std::convertible_to<FacetLayout>;
    { m.facet_width(f) } -> std::convertible_to<double>;
    { m.facet_height(f) } -> std::convertible_to<double>;
    { m.sample(f, x, y) } -> std::convertible_to<MirrorSample>;
};

/// Four spline facets plus their layout: the 256-parameter heliostat surface.
struct HeliostatSurface {
    std::array<FacetSpline, kFacetCount> facets{};
    FacetLayout facet_layout{};
    std::string id;

    const FacetLayout &layout() const { return facet_layout; }
    double facet_width(int f) const { return facets[f].width; }
    double facet_height(int f) const { return facets[f].height; }

    Vec3 facet_origin(int f) const { return facet_layout.facet_origin(f, facets[f].width, facets[f].height); }

    /// Height and normal at facet-local (x, y); coordinates are clamped onto the facet.
    MirrorSample sample(int f, double x, double y) const {
        const FacetSpline &s = facets[f];
        const double u = std::clamp(x / s.width, 0.0, 1.0);
        const double v = std::clamp(y / s.height, 0.0, 1.0);
        const SurfaceJet jet = surface_jet(s, basis_(s), u, v);
        return {jet.z, normal_from_slopes(jet.dz_du / s.width, jet.dz_dv / s.height)};
    }

    double mirror_area() const {
        double a = 0.0;
        for (const auto &s : facets)
            a += s.width * s.height;
        return a;
    }

    friend bool operator==(const HeliostatSurface &a, const HeliostatSurface &b) {
        return a.facets == b.facets && a.facet_layout.gap == b.facet_layout.gap;
    }

private:
    static const SplineBasis &basis_(const FacetSpline &s) {
        static const SplineBasis cubic(kDefaultDegree, kDefaultDegree);
        if (s.degree_u == kDefaultDegree && s.degree_v == kDefaultDegree)
            return cubic;
        thread_local SplineBasis other;
        if (other.degree_u() != s.degree_u || other.degree_v() != s.degree_v)
            other = SplineBasis(s);
        return other;
    }
};

inline HeliostatSurface flat_heliostat() { return HeliostatSurface{}; }

/// Number of samples per axis used for the per-facet mean height.
inline constexpr int kMeanSamples = 64;

/// Per-facet mean of z over a 64x64 cell-centred sample grid. Because the basis is a
/// partition of unity this is a fixed linear functional of z_ctrl.
inline double facet_mean_height(const FacetSpline &s) {
    const SplineBasis basis(s);
    Eigen::Matrix<double, kGridSize, 1> wu = Eigen::Matrix<double, kGridSize, 1>::Zero();
    Eigen::Matrix<double, kGridSize, 1> wv = Eigen::Matrix<double, kGridSize, 1>::Zero();
    for (int k = 0; k < kMeanSamples; ++k) {
        const double t = (k + 0.5) / kMeanSamples;
        const SpanBasis bu = basis.u(t), bv = basis.v(t);
        for (int a = 0; a <= basis.degree_u(); ++a)
            wu[bu.first + a] += bu.value[a] / kMeanSamples;
        for (int b = 0; b <= basis.degree_v(); ++b)
            wv[bv.first + b] += bv.value[b] / kMeanSamples;
    }
    return wu.dot(s.z_ctrl * wv);
}

inline FacetSpline enforce_zero_mean(FacetSpline s) {
    s.z_ctrl.array() -= facet_mean_height(s);
    return s;
}

/// Removes the unobservable constant offset of every facet.
inline HeliostatSurface enforce_zero_mean(HeliostatSurface h) {
    for (auto &f : h.facets)
        f = enforce_zero_mean(f);
    return h;
}

/// 180 degree rotation about the heliostat normal: facet order reversed, each grid
/// reversed along both axes. Applying it twice is the identity.
inline HeliostatSurface rotate_180(const HeliostatSurface &h) {
    HeliostatSurface out = h;
    for (int f = 0; f < kFacetCount; ++f)
        out.facets[kFacetCount - 1 - f].z_ctrl = h.facets[f].z_ctrl.reverse();
    return out;
}

/// Largest |z_ctrl| over all facets; by the convex hull property it bounds |z| everywhere.
inline double max_abs_control(const HeliostatSurface &h) {
    double m = 0.0;
    for (const auto &f : h.facets)
        m = std::max(m, f.z_ctrl.cwiseAbs().maxCoeff());
    return m;
}

} // namespace helio
