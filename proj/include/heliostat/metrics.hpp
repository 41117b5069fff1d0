#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "heliostat/flux.hpp"

namespace helio {

/// Relative L1 error sum|gt - pred| / sum|gt|.
inline double relative_l1(std::span<const double> gt, std::span<const double> pred) {
    if (gt.size() != pred.size())
        throw Error(ErrorKind::input, "image shapes differ");
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < gt.size(); ++k) {
        num += std::abs(gt[k] - pred[k]);
        den += std::abs(gt[k]);
    }
    if (!(den > 0.0))
        throw Error(ErrorKind::input, "ground-truth image is all zero");
    return num / den;
}

/// Flux accuracy: 1 - relative L1 error. 1 for identical images, 0 for pred = 0.
inline double acc(std::span<const double> gt, std::span<const double> pred) { return 1.0 - relative_l1(gt, pred); }

inline double relative_l1(const FluxImage &gt, const FluxImage &pred) { return relative_l1(gt.values, pred.values); }
inline double acc(const FluxImage &gt, const FluxImage &pred) { return acc(gt.values, pred.values); }

/// ACC(N1, N2) - ACC(N1, NURBS): the accuracy lost by replacing the measured mirror with
/// its spline fit, net of the tracer's own seed-to-seed noise.
template <MirrorModel Reference>
double nurbs_flux_loss(const HeliostatSurface &fit, const Reference &reference, const Scene &scene, std::size_t n_rays,
                       std::array<std::uint64_t, 3> seeds, const TraceOptions &opt = {}) {
    const FluxImage n1 = trace_flux(scene, reference, n_rays, seeds[0], opt);
    const FluxImage n2 = trace_flux(scene, reference, n_rays, seeds[1], opt);
    const FluxImage spline = trace_flux(scene, fit, n_rays, seeds[2], opt);
    return acc(n1, n2) - acc(n1, spline);
}

/// Mean |dz| over all 256 control points, in millimetres.
inline double mae_control_points(const HeliostatSurface &gt, const HeliostatSurface &pred) {
    double s = 0.0;
    int n = 0;
    for (int f = 0; f < kFacetCount; ++f) {
        if (gt.facets[f].z_ctrl.size() != pred.facets[f].z_ctrl.size())
            throw Error(ErrorKind::input, "control grid shapes differ");
        s += (gt.facets[f].z_ctrl - pred.facets[f].z_ctrl).cwiseAbs().sum();
        n += static_cast<int>(gt.facets[f].z_ctrl.size());
    }
    return 1e3 * s / n;
}

/// Five-number summary, linear interpolation between order statistics.
struct QuantileSummary {
    double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
    std::size_t count = 0;
};

inline double quantile(std::vector<double> values, double q) {
    if (values.empty())
        throw Error(ErrorKind::input, "quantile of an empty set");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

inline QuantileSummary summarize(const std::vector<double> &values) {
    QuantileSummary s;
    s.count = values.size();
    if (values.empty())
        throw Error(ErrorKind::input, "summary of an empty set");
    s.min = quantile(values, 0.0);
    s.q1 = quantile(values, 0.25);
    s.median = quantile(values, 0.5);
    s.q3 = quantile(values, 0.75);
    s.max = quantile(values, 1.0);
    return s;
}

} // namespace helio
