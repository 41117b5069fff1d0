#pragma once

#include <cstdint>
#include <vector>

#include "heliostat/fit.hpp"
#include "heliostat/flux.hpp"
#include "heliostat/metrics.hpp"
#include "heliostat/raytrace.hpp"
#include "heliostat/scene.hpp"
#include "heliostat/synth.hpp"

namespace helio {

/// Random aligned scene: heliostat at a horizontal distance in [min_distance, max_distance]
/// inside the field sector, random sun above the minimum elevation, aimed at the target centre.
inline Scene sample_scene(Rng &rng, const PlantConfig &plant, double min_distance, double max_distance,
                          bool secondary = false) {
    PlantConfig p = plant;
    p.field_min_distance = min_distance;
    p.field_max_distance = max_distance;
    Scene s;
    s.heliostat_pos = sample_field_position(rng, p);
    s.sun_dir = sample_sun_position(rng, p.latitude_deg, p.min_sun_elevation_deg);
    s.target = secondary ? secondary_target(p) : primary_target(p);
    s.aim_point = s.target.center;
    return aligned(s);
}

struct ExperimentOptions {
    std::size_t rays = 1000000;
    std::uint64_t seed = 0;
    CloudOptions cloud{};
    FitConfig fit{};
    TraceOptions trace{};
};

/// Synthetic measurement of a ground-truth surface followed by a spline fit.
struct MeasuredFit {
    NormalCloud cloud;
    HeliostatFit fit;
};

inline MeasuredFit measure_and_fit(const HeliostatSurface &truth, const ExperimentOptions &opt) {
    MeasuredFit m;
    m.cloud = synth_normal_cloud(truth, opt.cloud);
    m.fit = fit_heliostat(m.cloud, opt.fit, opt.trace.threads);
    return m;
}

struct IdealComparison {
    double acc_fit = 0.0;   // ACC(truth, fitted spline)
    double acc_ideal = 0.0; // ACC(truth, flat heliostat)
};

/// Ground truth, fitted spline and ideal flat mirror traced with distinct seeds.
inline IdealComparison compare_ideal(const HeliostatSurface &truth, const HeliostatSurface &fit, const Scene &scene,
                                     const ExperimentOptions &opt) {
    const FluxImage gt = trace_flux(scene, truth, opt.rays, derive_seed(opt.seed, {1}), opt.trace);
    const FluxImage pred = trace_flux(scene, fit, opt.rays, derive_seed(opt.seed, {2}), opt.trace);
    const FluxImage ideal = trace_ideal(scene, opt.rays, derive_seed(opt.seed, {3}), opt.trace);
    return {acc(gt, pred), acc(gt, ideal)};
}

/// Flux loss of a fit against its own normal cloud used as a dense micro-facet mirror.
inline double cloud_flux_loss(const MeasuredFit &m, const Scene &scene, const ExperimentOptions &opt) {
    const CloudMirror mirror(m.cloud);
    return nurbs_flux_loss(m.fit.surface, mirror, scene, opt.rays,
                           {derive_seed(opt.seed, {11}), derive_seed(opt.seed, {12}), derive_seed(opt.seed, {13})},
                           opt.trace);
}

} // namespace helio
