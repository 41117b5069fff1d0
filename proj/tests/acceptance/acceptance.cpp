// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "heliostat/heliostat.hpp"

namespace fs = std::filesystem;
using namespace helio;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int g_failed = 0;

void verdict(bool ok, const char *name, const std::string &detail) {
    std::printf("%s  %-28s %s\n", ok ? "PASS" : "FAIL", name, detail.c_str());
    std::fflush(stdout);
    g_failed += !ok;
}

void info(const char *name, const std::string &detail) {
    std::printf("INFO  %-28s %s\n", name, detail.c_str());
    std::fflush(stdout);
}

std::string fmt(const char *f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

constexpr std::uint64_t kRoot = 20240601;
constexpr std::size_t kRays = 1000000;

// Every flux image produced below passes through here.
struct FluxAudit {
    std::size_t images = 0;
    double worst_sum_error = 0.0;
    bool bookkeeping = true;
} g_audit;

template <MirrorModel M>
FluxImage audited_flux(const Scene &s, const M &mirror, std::size_t rays, std::uint64_t seed, double *trace_s = nullptr) {
    const auto t0 = Clock::now();
    const HitList hits = trace(s, mirror, rays, seed);
    const FluxImage img = flux_image(hits);
    if (trace_s)
        *trace_s = seconds_since(t0);
    ++g_audit.images;
    g_audit.worst_sum_error = std::max(g_audit.worst_sum_error, std::abs(img.sum() - kFluxTotal));
    g_audit.bookkeeping = g_audit.bookkeeping && hits.hits.size() + hits.n_missed == rays &&
                          img.binned + img.discarded == hits.hits.size() && rays == hits.n_rays;
    return img;
}

std::vector<HeliostatSurface> synthetic_surfaces(std::size_t n) {
    std::vector<HeliostatSurface> out;
    for (std::size_t k = 0; k < n; ++k) {
        DeformationSpec spec;
        spec.seed = derive_seed(kRoot, {k});
        out.push_back(gen_surface(spec));
    }
    return out;
}

Scene scene_at_distance(std::size_t k, double dmin, double dmax, bool secondary = false) {
    Rng rng = make_rng(kRoot, {k, 7});
    return sample_scene(rng, PlantConfig{}, dmin, dmax, secondary);
}

struct Fitted {
    HeliostatSurface truth;
    MeasuredFit m;
};

// In-basis round trip -------------------------------------------------------------------

std::vector<Fitted> criterion_fit_roundtrip() {
    const auto surfaces = synthetic_surfaces(20);
    std::vector<Fitted> out;
    double worst_mae = 0.0, worst_median = 0.0;
    const auto t0 = Clock::now();
    ExperimentOptions opt;
    for (const auto &s : surfaces) {
        Fitted f{s, measure_and_fit(s, opt)};
        worst_mae = std::max(worst_mae, 1e-3 * mae_control_points(s, f.m.fit.surface));
        for (const auto &r : f.m.fit.reports)
            worst_median = std::max(worst_median, r.residual_mrad.median);
        out.push_back(std::move(f));
    }
    const double t = seconds_since(t0);
    verdict(worst_mae < 1e-6 && worst_median < 1e-3 && t < 60.0, "in-basis-fit-roundtrip",
            fmt("20 surfaces, 80000 normals/facet: max MAE %.3g m (< 1e-6), max median residual %.3g mrad (< 1e-3), "
                "%.1f s (< 60)",
                worst_mae, worst_median, t));
    return out;
}

// Gradient check ---------------------------------------------------------------------------

void criterion_gradients() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(kRoot);
    std::uniform_real_distribution<double> u(0.0, 1.0), z(-2e-3, 2e-3);
    const double h = 1e-6;
    double worst_fit = 0.0, worst_surface = 0.0;
    int points = 0;
    for (int cfg = 0; cfg < 20; ++cfg) {
        HeliostatSurface truth;
        FacetSpline probe;
        for (int i = 0; i < kGridSize; ++i)
            for (int j = 0; j < kGridSize; ++j) {
                truth.facets[0].z_ctrl(i, j) = z(rng);
                probe.z_ctrl(i, j) = 2.0 * z(rng);
            }
        CloudOptions co;
        co.spacing = 0.02;
        const CloudFacet cloud = synth_normal_cloud(truth, co).facets[0];
        ControlGrid g;
        fit_loss_gradient(cloud, probe, &g);
        for (int k = 0; k < 5; ++k, ++points) {
            const int i = static_cast<int>(rng() % 8), j = static_cast<int>(rng() % 8);
            FacetSpline sp = probe, sm = probe;
            sp.z_ctrl(i, j) += h;
            sm.z_ctrl(i, j) -= h;
            const double fd = (fit_loss_gradient(cloud, sp, nullptr) - fit_loss_gradient(cloud, sm, nullptr)) / (2 * h);
            worst_fit = std::max(worst_fit, std::abs(g(i, j) - fd) / std::max(std::abs(fd), 1e-8));

            // Surface normal sensitivity at a random (u, v).
            const double uu = u(rng), vv = u(rng);
            const SurfaceSensitivity sens = surface_grad_z(probe, uu, vv);
            const Vec3 dn = (surface_normal(sp, uu, vv) - surface_normal(sm, uu, vv)) / (2 * h);
            for (int c = 0; c < 3; ++c)
                worst_surface = std::max(worst_surface, std::abs(sens.dnormal[c](i, j) - dn[c]) / std::max(std::abs(dn[c]), 1e-3));
        }
    }
    const double t = seconds_since(t0);
    verdict(points == 100 && worst_fit < 1e-5 && worst_surface < 1e-5 && t < 10.0, "gradient-correctness",
            fmt("%d points, 20 configs: max rel err loss %.2e, normal %.2e (< 1e-5), %.2f s (< 10)", points, worst_fit,
                worst_surface, t));
}

// Monte Carlo repeatability -----------------------------------------------------------------

void criterion_repeatability(const std::vector<Fitted> &fits) {
    double worst = 1.0, slowest = 0.0;
    const HeliostatSurface flat = flat_heliostat();
    for (std::size_t k = 0; k < 5; ++k) {
        const Scene s = scene_at_distance(100 + k, 100.0, 100.0);
        double t1 = 0, t2 = 0;
        const FluxImage a = audited_flux(s, flat, kRays, derive_seed(kRoot, {k, 1}), &t1);
        const FluxImage b = audited_flux(s, flat, kRays, derive_seed(kRoot, {k, 2}), &t2);
        worst = std::min(worst, acc(a, b));
        slowest = std::max({slowest, t1, t2});
    }
    verdict(worst >= 0.97 && slowest < 5.0, "mc-repeatability",
            fmt("ideal heliostat, 5 scenes at 100 m, 1e6 rays: min ACC %.4f (>= 0.97), slowest trace %.2f s (< 5)", worst,
                slowest));

    std::vector<double> deformed;
    for (std::size_t k = 0; k < 5; ++k) {
        const Scene s = scene_at_distance(100 + k, 100.0, 100.0);
        const FluxImage a = audited_flux(s, fits[k].truth, kRays, derive_seed(kRoot, {k, 3}));
        const FluxImage b = audited_flux(s, fits[k].truth, kRays, derive_seed(kRoot, {k, 4}));
        deformed.push_back(acc(a, b));
    }
    const QuantileSummary q = summarize(deformed);
    info("mc-repeatability-deformed", fmt("synthetic deformed surfaces, same scenes: ACC min %.4f median %.4f max %.4f",
                                         q.min, q.median, q.max));
}

// NURBS flux loss ------------------------------------------------------------------------

void criterion_nurbs_loss(const std::vector<Fitted> &fits, double fit_seconds) {
    const auto t0 = Clock::now();
    std::vector<double> losses;
    for (std::size_t k = 0; k < fits.size(); ++k) {
        const Scene s = scene_at_distance(k, 100.0, 100.0);
        const CloudMirror cloud(fits[k].m.cloud);
        const FluxImage n1 = audited_flux(s, cloud, kRays, derive_seed(kRoot, {k, 11}));
        const FluxImage n2 = audited_flux(s, cloud, kRays, derive_seed(kRoot, {k, 12}));
        const FluxImage sp = audited_flux(s, fits[k].m.fit.surface, kRays, derive_seed(kRoot, {k, 13}));
        losses.push_back(acc(n1, n2) - acc(n1, sp));
    }
    const double t = seconds_since(t0) + fit_seconds;
    const QuantileSummary q = summarize(losses);
    verdict(q.median <= 0.05 && t < 600.0, "nurbs-flux-loss",
            fmt("20 heliostats at 100 m: median loss %.4f (<= 0.05), q1 %.4f q3 %.4f max %.4f, %.1f s incl. fits (< 600)",
                q.median, q.q1, q.q3, q.max, t));
}

// Ideal baseline ordering ------------------------------------------------------------------

void criterion_ideal_ordering(const std::vector<Fitted> &fits) {
    int wins = 0;
    std::vector<double> af, ai;
    for (std::size_t k = 0; k < fits.size(); ++k) {
        const Scene s = scene_at_distance(200 + k, 50.0, 300.0);
        const FluxImage gt = audited_flux(s, fits[k].truth, kRays, derive_seed(kRoot, {k, 21}));
        const FluxImage fit = audited_flux(s, fits[k].m.fit.surface, kRays, derive_seed(kRoot, {k, 22}));
        const FluxImage ideal = audited_flux(s, flat_heliostat(), kRays, derive_seed(kRoot, {k, 23}));
        af.push_back(acc(gt, fit));
        ai.push_back(acc(gt, ideal));
        wins += af.back() > ai.back();
    }
    const double frac = double(wins) / double(fits.size());
    verdict(frac >= 0.95, "ideal-baseline-ordering",
            fmt("20 heliostats at 50-300 m: fitted beats ideal in %d/20 = %.0f%% (>= 95%%); median ACC fitted %.4f, "
                "ideal %.4f",
                wins, 100 * frac, quantile(af, 0.5), quantile(ai, 0.5)));
}

// Canting displacement law -----------------------------------------------------------------

void criterion_canting() {
    // Heliostat level with the target centre, low southern sun: the reflected central ray is
    // horizontal and meets the target plane square-on at 100 m.
    Scene s;
    s.heliostat_pos = Vec3(0, 100, 50);
    s.sun_dir = Vec3(0, 1, -0.2).normalized();
    s = aligned(s);
    DeformationSpec spec = DeformationSpec::none();
    std::array<FacetTilt, kFacetCount> tilts{};
    tilts[1].dzdx_mrad = 1.0;
    spec.fixed_tilts = tilts;
    const HeliostatSurface canted = gen_surface(spec);
    const TraceOptions point{SunShape::pillbox(0.0), 0};
    auto centroid = [&](const HeliostatSurface &h) {
        const HitList hl = trace(s, h, 400000, kRoot, point);
        Vec2 c = Vec2::Zero();
        int n = 0;
        for (const auto &hit : hl.hits)
            if (hit.facet == 1) {
                c += Vec2(hit.x, hit.y);
                ++n;
            }
        return Vec2(c / n);
    };
    const double traced = (centroid(canted) - centroid(flat_heliostat())).norm();

    // Brute-force oracle: reflect the central ray off the facet centre with and without tilt.
    const Mat3 &r = *s.alignment;
    const Vec3 centre = s.heliostat_pos + r * (canted.facet_origin(1) + Vec3(0.8, 0.625, 0));
    auto land = [&](const Vec3 &n_local) {
        const Vec3 n = r * n_local;
        const Vec3 out = reflect(s.sun_dir, n);
        const double t = (s.target.center - centre).dot(s.target.normal) / out.dot(s.target.normal);
        return s.target.to_plane(centre + t * out);
    };
    const double oracle = (land(normal_from_slopes(1e-3, 0)) - land(Vec3::UnitZ())).norm();
    const double law = 2.0 * 1e-3 * 100.0;
    verdict(std::abs(traced - law) <= 0.01 && std::abs(oracle - law) <= 0.01, "canting-displacement-law",
            fmt("1 mrad tilt at 100 m: traced shift %.4f m, geometric oracle %.4f m, 2*theta*d = %.3f m (+- 0.01)", traced,
                oracle, law));
}

// Serialization -------------------------------------------------------------------------------

void criterion_serialization(const std::vector<Fitted> &fits) {
    bool exact = true;
    std::size_t size = 0;
    const fs::path p = fs::temp_directory_path() / ("helio_accept_" + std::to_string(::getpid()) + ".hsrf");
    for (const auto &f : fits) {
        const io::Bytes b = serialize(f.m.fit.surface);
        size = std::max(size, b.size());
        save_heliostat(p, f.m.fit.surface);
        const HeliostatSurface back = load_heliostat(p);
        exact = exact && serialize(back) == b && io::read_file(p) == b;
        // A reloaded surface is f32-exact, so a second cycle reproduces every z_ctrl bit.
        exact = exact && deserialize(serialize(back)) == back;
    }
    fs::remove(p);
    verdict(size <= 7 * 1024 && exact, "serialization",
            fmt("heliostat file %zu bytes (<= 7168), round trip bit-exact over 20 surfaces: %s", size, exact ? "yes" : "no"));
}

// Spatial extrapolation -------------------------------------------------------------------

void criterion_extrapolation(const std::vector<Fitted> &fits) {
    std::vector<double> accs;
    for (std::size_t k = 0; k < 10; ++k) {
        const Scene s = scene_at_distance(300 + k, 100.0, 100.0, true);
        const FluxImage gt = audited_flux(s, fits[k].truth, kRays, derive_seed(kRoot, {k, 31}));
        const FluxImage fit = audited_flux(s, fits[k].m.fit.surface, kRays, derive_seed(kRoot, {k, 32}));
        accs.push_back(acc(gt, fit));
    }
    const QuantileSummary q = summarize(accs);
    verdict(q.min >= 0.85, "spatial-extrapolation",
            fmt("10 heliostats at 100 m on the secondary target: min ACC %.4f (>= 0.85), median %.4f", q.min, q.median));
}

// Flux invariants -------------------------------------------------------------------------

void criterion_flux_invariants(const std::vector<Fitted> &fits) {
    for (std::size_t rays : {1ul, 3ul, 7ul, 1000ul, 99999ul}) {
        const Scene s = scene_at_distance(400 + rays, 25.0, 300.0);
        audited_flux(s, fits[0].truth, rays, rays);
    }
    const bool ok = g_audit.worst_sum_error <= 1e-6 && g_audit.bookkeeping;
    verdict(ok, "flux-invariants",
            fmt("%zu images on a %dx%d grid over %.0f m: max |sum - 100| %.2e (<= 1e-6), bookkeeping exact: %s",
                g_audit.images, kFluxDim, kFluxDim, kFluxWindow, g_audit.worst_sum_error, g_audit.bookkeeping ? "yes" : "no"));
}

// Reproducibility -----------------------------------------------------------------------------

int run_cli(const std::string &args) {
    const int status = std::system((std::string(HELIO_CLI_PATH) + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path &p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

void criterion_reproducibility() {
    const fs::path dir = fs::temp_directory_path() / ("helio_accept_ds_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    bool ok = run_cli("gen-surfaces --count 4 --seed 7 --out " + (dir / "surf").string()) == 0;
    const std::string gen = "gen-dataset --surfaces " + (dir / "surf").string() + " --records 8 --samples 8 --rays 1e5 --seed 11 --out ";
    double slowest = 0.0;
    for (const char *name : {"a", "b"}) {
        const auto t0 = Clock::now();
        ok = ok && run_cli(gen + (dir / name).string()) == 0;
        slowest = std::max(slowest, seconds_since(t0));
    }
    const std::string pa = slurp(dir / "a" / "dataset.pack"), pb = slurp(dir / "b" / "dataset.pack");
    const bool same = ok && !pa.empty() && pa == pb && slurp(dir / "a" / "manifest.json") == slurp(dir / "b" / "manifest.json");
    const bool valid = ok && run_cli("eval --dataset " + (dir / "a").string()) == 0;
    fs::remove_all(dir);
    verdict(same && valid && slowest < 120.0, "reproducibility",
            fmt("gen-dataset twice (8 records x 8 images, 1e5 rays): byte-identical %s, invariants %s, slowest run %.1f s "
                "(< 120)",
                same ? "yes" : "no", valid ? "green" : "red", slowest));
}

} // namespace

int main() {
    const auto t0 = Clock::now();
    std::printf("threads: %d\n", default_threads());
    try {
        criterion_gradients();
        const auto tf = Clock::now();
        const std::vector<Fitted> fits = criterion_fit_roundtrip();
        const double fit_seconds = seconds_since(tf);
        criterion_repeatability(fits);
        criterion_nurbs_loss(fits, fit_seconds);
        criterion_ideal_ordering(fits);
        criterion_canting();
        criterion_serialization(fits);
        criterion_extrapolation(fits);
        criterion_flux_invariants(fits);
        criterion_reproducibility();
    } catch (const std::exception &e) {
        std::printf("FAIL  aborted: %s\n", e.what());
        return 1;
    }
    std::printf("%d criteria failed, %.1f s total\n", g_failed, seconds_since(t0));
    return g_failed == 0 ? 0 : 1;
}
