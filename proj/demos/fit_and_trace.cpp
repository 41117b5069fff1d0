// Generates a deformed heliostat, measures it, fits the spline and compares flux images.
#include <cstdio>

#include "heliostat/heliostat.hpp"

using namespace helio;

int main() {
    DeformationSpec spec;
    spec.seed = 2024;
    const HeliostatSurface truth = gen_surface(spec);

    ExperimentOptions opt;
    opt.rays = 1000000;
    const MeasuredFit m = measure_and_fit(truth, opt);
    std::printf("cloud: %zu normals, fit MAE %.3g mm\n", m.cloud.size(), mae_control_points(truth, m.fit.surface));
    for (int f = 0; f < kFacetCount; ++f)
        std::printf("facet %d: %d iterations, median residual %.3g mrad\n", f, m.fit.reports[f].iterations,
                    m.fit.reports[f].residual_mrad.median);

    Scene scene;
    scene.heliostat_pos = field_position(PlantConfig{}, 150.0, 20.0);
    scene.sun_dir = sun_direction_at(50.91, 80, 10.5);
    scene = aligned(scene);
    const IdealComparison c = compare_ideal(truth, m.fit.surface, scene, opt);
    std::printf("ACC fitted %.4f, ideal %.4f\n", c.acc_fit, c.acc_ideal);
    std::printf("surface file: %zu bytes\n", serialize(m.fit.surface).size());
}
