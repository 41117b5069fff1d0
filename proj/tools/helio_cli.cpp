#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "heliostat/heliostat.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace helio;

namespace {

int exit_code(ErrorKind k) {
    switch (k) {
    case ErrorKind::usage: return 2;
    case ErrorKind::io: return 3;
    case ErrorKind::format: return 4;
    case ErrorKind::config:
    case ErrorKind::domain: return 5;
    case ErrorKind::numerical: return 6;
    case ErrorKind::input: return 7;
    case ErrorKind::alignment: return 8;
    case ErrorKind::empty_flux: return 9;
    }
    return 1;
}

void report_error(const std::string &category, const std::string &message) {
    std::cerr << json{{"error", category}, {"message", message}}.dump() << "\n";
}

struct Logger {
    bool as_json = false;

    void event(const std::string &name, const json &fields) const {
        if (as_json) {
            json j = fields;
            j["event"] = name;
            std::cerr << j.dump() << "\n";
        } else {
            std::cerr << "[helio] " << name << ": " << fields.dump() << "\n";
        }
    }
};

Logger g_log;

std::size_t parse_count(const std::string &flag, const std::string &text) {
    double v = 0.0;
    try {
        std::size_t used = 0;
        v = std::stod(text, &used);
        if (used != text.size())
            throw std::invalid_argument(text);
    } catch (const std::exception &) {
        throw Error(ErrorKind::config, flag + " expects a number, got '" + text + "'");
    }
    if (!(v >= 1.0) || v != std::floor(v) || v > 1e12)
        throw Error(ErrorKind::config, flag + " must be a positive integer, got '" + text + "'");
    return static_cast<std::size_t>(v);
}

std::string read_text(const fs::path &p) {
    std::ifstream in(p);
    if (!in)
        throw Error(ErrorKind::io, "cannot open " + p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path &p, const std::string &text) {
    std::ofstream out(p, std::ios::trunc);
    if (!out)
        throw Error(ErrorKind::io, "cannot write " + p.string());
    out << text;
    if (!out)
        throw Error(ErrorKind::io, "failed writing " + p.string());
}

void make_dirs(const fs::path &p) {
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec)
        throw Error(ErrorKind::io, "cannot create " + p.string() + ": " + ec.message());
}

std::vector<fs::path> surface_files(const fs::path &dir) {
    if (!fs::is_directory(dir))
        throw Error(ErrorKind::io, "not a directory: " + dir.string());
    std::vector<fs::path> out;
    for (const auto &e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".hsrf")
            out.push_back(e.path());
    std::sort(out.begin(), out.end());
    if (out.empty())
        throw Error(ErrorKind::input, "no .hsrf files in " + dir.string());
    return out;
}

json vec_json(const Vec3 &v) { return {v.x(), v.y(), v.z()}; }

// Options shared by the subcommands that trace.
struct SceneArgs {
    std::string scene_file, pos, sun, aim, target;

    void add(CLI::App *app) {
        app->add_option("--scene", scene_file, "Scene config file (key = value lines)");
        app->add_option("--heliostat-pos", pos, "Heliostat centre 'x,y,z' (m), overrides the scene file");
        app->add_option("--sun-dir", sun, "Sun direction 'x,y,z' (from the sun), overrides the scene file");
        app->add_option("--aim", aim, "Aim point 'x,y,z' (m), overrides the scene file");
        app->add_option("--target", target, "primary or secondary")->check(CLI::IsMember({"primary", "secondary"}));
    }

    SceneConfig resolve() const {
        std::string text = scene_file.empty() ? std::string{} : read_text(scene_file);
        text += "\n";
        if (!pos.empty())
            text += "heliostat_pos = " + pos + "\n";
        if (!sun.empty())
            text += "sun_dir = " + sun + "\n";
        if (!aim.empty())
            text += "aim_point = " + aim + "\n";
        if (!target.empty())
            text += "target = " + target + "\n";
        return parse_scene_config(text);
    }
};

json scene_json(const SceneConfig &c, const Scene &s) {
    return {{"heliostat_pos", vec_json(s.heliostat_pos)},
            {"sun_dir", vec_json(s.sun_dir)},
            {"aim_point", vec_json(s.aim_point)},
            {"target", c.use_secondary ? "secondary" : "primary"},
            {"sunshape", {{"model", to_string(c.sunshape.model)}, {"width_mrad", c.sunshape.width_mrad}}}};
}

struct DeformArgs {
    DeformationSpec spec{};

    void add(CLI::App *app) {
        app->add_option("--canting-mrad", spec.canting_mrad, "Sigma of per-facet tilt slopes (mrad)")->capture_default_str();
        app->add_option("--waviness-mm", spec.waviness_amp_mm, "Maximum waviness amplitude (mm)")->capture_default_str();
        app->add_option("--waviness-freq", spec.waviness_freq, "Maximum waviness periods per facet")->capture_default_str();
        app->add_option("--edge-bend-mm", spec.edge_bend_mm, "Maximum corner bending amplitude (mm)")->capture_default_str();
        app->add_option("--edge-bend-length", spec.edge_bend_length, "Corner bending radius (m)")->capture_default_str();
    }

    json to_json() const {
        return {{"canting_mrad", spec.canting_mrad},
                {"waviness_mm", spec.waviness_amp_mm},
                {"waviness_freq", spec.waviness_freq},
                {"edge_bend_mm", spec.edge_bend_mm},
                {"edge_bend_length", spec.edge_bend_length}};
    }
};

std::vector<HeliostatSurface> generate_surfaces(const DeformationSpec &base, std::size_t count, std::uint64_t seed) {
    std::vector<HeliostatSurface> out;
    for (std::size_t k = 0; k < count; ++k) {
        DeformationSpec s = base;
        s.seed = derive_seed(seed, {k});
        HeliostatSurface h = gen_surface(s);
        char name[32];
        std::snprintf(name, sizeof name, "surface_%04zu", k);
        h.id = name;
        out.push_back(std::move(h));
    }
    return out;
}

// Ground-truth surfaces for the experiment subcommands: a directory of files or a
// freshly generated synthetic set.
struct SurfaceSource {
    std::string dir;
    std::size_t count = 20;
    DeformArgs deform;

    void add(CLI::App *app) {
        app->add_option("--surfaces", dir, "Directory of ground-truth .hsrf files");
        app->add_option("--count", count, "Synthetic surfaces to generate when --surfaces is absent")->capture_default_str();
        deform.add(app);
    }

    std::vector<HeliostatSurface> load(std::uint64_t seed) const {
        if (dir.empty())
            return generate_surfaces(deform.spec, count, derive_seed(seed, {0x6e6}));
        std::vector<HeliostatSurface> out;
        for (const auto &p : surface_files(dir))
            out.push_back(load_heliostat(p));
        return out;
    }

    json to_json() const { return dir.empty() ? json{{"generated", count}, {"deformation", deform.to_json()}} : json{{"dir", dir}}; }
};

void write_flux_csv(const fs::path &p, const FluxImage &img) {
    std::ostringstream out;
    out << std::setprecision(9);
    for (int r = 0; r < kFluxDim; ++r) {
        for (int c = 0; c < kFluxDim; ++c)
            out << (c ? "," : "") << img.at(r, c);
        out << "\n";
    }
    write_text(p, out.str());
}

void write_cloud_csv(const fs::path &p, const NormalCloud &cloud) {
    std::ostringstream out;
    out << std::setprecision(10) << "x,y,z,nx,ny,nz\n";
    for (int f = 0; f < kFacetCount; ++f) {
        const auto &facet = cloud.facets[f];
        const Vec3 o = cloud.facet_layout.facet_origin(f, facet.width, facet.height);
        for (const auto &pt : facet.points) {
            const Vec3 q = o + pt.position;
            out << q.x() << "," << q.y() << "," << q.z() << "," << pt.normal.x() << "," << pt.normal.y() << ","
                << pt.normal.z() << "\n";
        }
    }
    write_text(p, out.str());
}

AnalyticSurface parse_analytic(const std::string &text) {
    const auto colon = text.find(':');
    const std::string kind = text.substr(0, colon);
    const auto v = colon == std::string::npos ? std::vector<double>{} : detail::parse_numbers("--analytic", text.substr(colon + 1));
    if (kind == "plane" && (v.size() == 1 || v.size() == 2))
        return AnalyticSurface::plane(v[0], v.size() > 1 ? v[1] : 0.0);
    if (kind == "paraboloid" && v.size() == 1 && v[0] > 0)
        return AnalyticSurface::paraboloid(v[0]);
    if (kind == "sinusoid" && v.size() == 3 && v[1] > 0 && v[2] > 0)
        return AnalyticSurface::sinusoid(v[0], v[1], v[2]);
    throw Error(ErrorKind::config,
                "--analytic expects plane:SLOPE[,SLOPE_Y], paraboloid:FOCAL or sinusoid:AMP,PERIOD_X,PERIOD_Y");
}

// ---------------------------------------------------------------------------------------

int run_gen_surfaces(const fs::path &out, std::size_t count, std::uint64_t seed, const DeformArgs &d) {
    g_log.event("config", {{"command", "gen-surfaces"}, {"out", out.string()}, {"count", count}, {"seed", seed},
                           {"deformation", d.to_json()}});
    make_dirs(out);
    json files = json::array();
    for (const auto &h : generate_surfaces(d.spec, count, seed)) {
        const fs::path p = out / (h.id + ".hsrf");
        save_heliostat(p, h);
        files.push_back({{"file", p.filename().string()}, {"max_abs_mm", 1e3 * max_abs_control(h)}});
    }
    std::cout << json{{"surfaces", files}}.dump(2) << "\n";
    return 0;
}

int run_synth_cloud(const std::string &surface, const std::string &analytic, const fs::path &out,
                    const CloudOptions &opt) {
    g_log.event("config", {{"command", "synth-cloud"}, {"surface", surface}, {"analytic", analytic},
                           {"out", out.string()}, {"spacing", opt.spacing}, {"noise_mrad", opt.noise_mrad},
                           {"seed", opt.seed}});
    if (surface.empty() == analytic.empty())
        throw Error(ErrorKind::usage, "give exactly one of --surface or --analytic");
    const NormalCloud cloud = surface.empty() ? synth_normal_cloud(parse_analytic(analytic), opt)
                                              : synth_normal_cloud(load_heliostat(surface), opt);
    if (out.extension() == ".csv")
        write_cloud_csv(out, cloud);
    else
        save_cloud(out, cloud);
    std::cout << json{{"points", cloud.size()}, {"per_facet", cloud.facets[0].points.size()}}.dump() << "\n";
    return 0;
}

int run_fit(const fs::path &cloud_path, const fs::path &out, const std::string &report, const FitConfig &cfg,
            int threads) {
    g_log.event("config", {{"command", "fit-nurbs"}, {"cloud", cloud_path.string()}, {"out", out.string()},
                           {"max_iters", cfg.max_iters}, {"learning_rate", cfg.learning_rate},
                           {"tol_grad", cfg.tol_grad}, {"residual_tol_mrad", cfg.residual_tol_mrad},
                           {"threads", threads}});
    const NormalCloud cloud = load_cloud(cloud_path);
    HeliostatFit fit = fit_heliostat(cloud, cfg, threads);
    fit.surface.id = out.stem().string();
    save_heliostat(out, fit.surface);
    const std::string text = report_json(fit).dump(2) + "\n";
    if (!report.empty())
        write_text(report, text);
    std::cout << text;
    return 0;
}

int run_trace(const std::string &surface, const std::string &cloud, bool ideal, const SceneArgs &sa,
              const std::string &rays_text, std::uint64_t seed, const fs::path &out, const std::string &csv,
              int threads) {
    const SceneConfig cfg = sa.resolve();
    const Scene scene = cfg.scene();
    const std::size_t rays = parse_count("--rays", rays_text);
    g_log.event("config", {{"command", "trace"}, {"surface", surface}, {"cloud", cloud}, {"ideal", ideal},
                           {"rays", rays}, {"seed", seed}, {"out", out.string()}, {"scene", scene_json(cfg, scene)},
                           {"threads", threads}});
    if (int(!surface.empty()) + int(!cloud.empty()) + int(ideal) != 1)
        throw Error(ErrorKind::usage, "give exactly one of --surface, --cloud or --ideal");
    const TraceOptions opt{cfg.sunshape, threads};
    HitList hits;
    if (ideal)
        hits = trace_ideal_hits(scene, rays, seed, opt);
    else if (!surface.empty())
        hits = trace(scene, load_heliostat(surface), rays, seed, opt);
    else
        hits = trace(scene, CloudMirror(load_cloud(cloud)), rays, seed, opt);
    const FluxImage img = flux_image(hits);
    save_flux(out, img);
    if (!csv.empty())
        write_flux_csv(csv, img);
    const Vec3 c = img.center_world(scene.target);
    std::cout << json{{"rays", rays},
                      {"missed", hits.n_missed},
                      {"binned", img.binned},
                      {"discarded", img.discarded},
                      {"center_plane", {img.center.x(), img.center.y()}},
                      {"center_world", vec_json(c)},
                      {"sum", img.sum()}}
                     .dump(2)
              << "\n";
    return 0;
}

int eval_dataset(const fs::path &dir) {
    const json man = json::parse(read_text(dir / "manifest.json"), nullptr, false);
    if (man.is_discarded())
        throw Error(ErrorKind::format, "manifest.json is not valid JSON");
    for (const char *k : {"format", "record_count", "record_bytes", "splits", "base_split", "pack"})
        if (!man.contains(k))
            throw Error(ErrorKind::format, std::string("manifest.json lacks '") + k + "'");
    if (man["format"] != "HDSP" || man["record_bytes"] != kRecordBytes)
        throw Error(ErrorKind::format, "manifest does not describe an HDSP pack of this version");
    const auto recs = load_pack(dir / man["pack"].get<std::string>());
    if (recs.size() != man["record_count"].get<std::size_t>())
        throw Error(ErrorKind::format, "record count differs from manifest");

    std::array<std::set<std::uint32_t>, 3> declared;
    for (int s = 0; s < 3; ++s)
        for (auto b : man["base_split"][to_string(static_cast<Split>(s))])
            declared[s].insert(b.get<std::uint32_t>());
    bool disjoint = true;
    for (int s = 0; s < 3; ++s)
        for (int t = s + 1; t < 3; ++t)
            for (auto b : declared[s])
                disjoint = disjoint && !declared[t].count(b);

    std::size_t images = 0;
    double worst_sum = 0.0;
    bool bases_ok = true, zero_mean = true;
    for (const auto &r : recs) {
        const auto &pool = declared[static_cast<int>(r.split)];
        bases_ok = bases_ok && pool.count(r.base_a) && pool.count(r.base_b);
        for (const auto &s : r.samples) {
            ++images;
            // Pack images are stored as f32; the sum holds to single precision.
            worst_sum = std::max(worst_sum, std::abs(s.flux.sum() - kFluxTotal));
        }
        for (const auto &z : r.target_z) {
            FacetSpline f;
            f.z_ctrl = z;
            zero_mean = zero_mean && std::abs(facet_mean_height(f)) < 1e-8;
        }
    }
    const bool ok = disjoint && bases_ok && zero_mean && worst_sum < 1e-3;
    std::cout << json{{"records", recs.size()},
                      {"images", images},
                      {"max_sum_error", worst_sum},
                      {"splits_disjoint", disjoint},
                      {"records_use_split_bases", bases_ok},
                      {"targets_zero_mean", zero_mean},
                      {"ok", ok}}
                     .dump(2)
              << "\n";
    if (!ok)
        throw Error(ErrorKind::input, "dataset invariants violated");
    return 0;
}

int run_eval(const std::string &gt, const std::string &pred, const std::string &gt_dir, const std::string &pred_dir,
             const std::string &dataset, const std::string &out) {
    g_log.event("config", {{"command", "eval"}, {"gt", gt}, {"pred", pred}, {"gt_dir", gt_dir},
                           {"pred_dir", pred_dir}, {"dataset", dataset}, {"out", out}});
    const int modes = int(!gt.empty() || !pred.empty()) + int(!gt_dir.empty() || !pred_dir.empty()) + int(!dataset.empty());
    if (modes != 1)
        throw Error(ErrorKind::usage, "use one of: --gt/--pred, --gt-dir/--pred-dir, --dataset");
    if (!dataset.empty())
        return eval_dataset(dataset);
    if (!gt.empty() || !pred.empty()) {
        if (gt.empty() || pred.empty())
            throw Error(ErrorKind::usage, "--gt and --pred go together");
        std::cout << "acc = " << std::fixed << std::setprecision(6) << acc(load_flux(gt), load_flux(pred)) << "\n";
        return 0;
    }
    if (gt_dir.empty() || pred_dir.empty())
        throw Error(ErrorKind::usage, "--gt-dir and --pred-dir go together");
    std::vector<fs::path> names;
    for (const auto &e : fs::directory_iterator(gt_dir))
        if (e.path().extension() == ".flux")
            names.push_back(e.path().filename());
    std::sort(names.begin(), names.end());
    if (names.empty())
        throw Error(ErrorKind::input, "no .flux files in " + gt_dir);
    std::ostringstream csv;
    csv << std::setprecision(9) << "name,acc\n";
    std::vector<double> accs;
    for (const auto &n : names) {
        const double a = acc(load_flux(fs::path(gt_dir) / n), load_flux(fs::path(pred_dir) / n));
        accs.push_back(a);
        csv << n.string() << "," << a << "\n";
    }
    if (!out.empty())
        write_text(out, csv.str());
    const QuantileSummary q = summarize(accs);
    std::cout << json{{"count", q.count}, {"min", q.min}, {"q1", q.q1}, {"median", q.median}, {"q3", q.q3}, {"max", q.max}}.dump(2)
              << "\n";
    return 0;
}

int run_gen_dataset(const fs::path &surfaces, const fs::path &out, DatasetConfig cfg, const std::string &rays_text) {
    cfg.rays = parse_count("--rays", rays_text);
    std::vector<HeliostatSurface> bases;
    for (const auto &p : surface_files(surfaces))
        bases.push_back(load_heliostat(p));
    g_log.event("config", {{"command", "gen-dataset"}, {"surfaces", surfaces.string()}, {"bases", bases.size()},
                           {"out", out.string()}, {"records", cfg.records}, {"samples", cfg.samples_per_record},
                           {"rays", cfg.rays}, {"seed", cfg.seed}, {"val_fraction", cfg.val_fraction},
                           {"test_fraction", cfg.test_fraction}, {"threads", cfg.threads}});
    const DatasetSummary s = build_dataset(bases, cfg, out);
    json splits;
    for (int k = 0; k < 3; ++k)
        splits[to_string(static_cast<Split>(k))] = {{"records", s.plan.records[k].second - s.plan.records[k].first},
                                                    {"bases", s.plan.bases[k].size()}};
    std::cout << json{{"pack", s.pack.string()}, {"manifest", s.manifest.string()}, {"splits", splits}}.dump(2) << "\n";
    return 0;
}

struct ExperimentArgs {
    std::string rays = "1e6";
    std::uint64_t seed = 0;
    double spacing = 0.005;
    double noise_mrad = 0.0;
    std::string out;

    void add(CLI::App *app) {
        app->add_option("--rays", rays, "Rays per trace (accepts 1e6)")->capture_default_str();
        app->add_option("--seed", seed, "Root seed")->capture_default_str();
        app->add_option("--spacing", spacing, "Synthetic measurement spacing (m)")->capture_default_str();
        app->add_option("--noise-mrad", noise_mrad, "Angular noise of the synthetic measurement (mrad)")->capture_default_str();
        app->add_option("--out", out, "Per-heliostat CSV output")->required();
    }

    ExperimentOptions options(int threads) const {
        ExperimentOptions o;
        o.rays = parse_count("--rays", rays);
        o.seed = seed;
        o.cloud.spacing = spacing;
        o.cloud.noise_mrad = noise_mrad;
        o.trace.threads = threads;
        return o;
    }
};

int run_compare_ideal(const SurfaceSource &src, const ExperimentArgs &ea, double dmin, double dmax, int threads) {
    ExperimentOptions opt = ea.options(threads);
    g_log.event("config", {{"command", "compare-ideal"}, {"source", src.to_json()}, {"rays", opt.rays},
                           {"seed", opt.seed}, {"spacing", opt.cloud.spacing}, {"min_distance", dmin},
                           {"max_distance", dmax}, {"out", ea.out}});
    if (!(dmin > 0 && dmin <= dmax))
        throw Error(ErrorKind::config, "invalid distance range");
    const auto surfaces = src.load(opt.seed);
    std::ostringstream csv;
    csv << std::setprecision(9) << "id,distance,acc_fit,acc_ideal,ideal_beats_fit\n";
    std::size_t ideal_wins = 0;
    std::vector<double> fit_accs, ideal_accs;
    for (std::size_t k = 0; k < surfaces.size(); ++k) {
        Rng rng = make_rng(opt.seed, {k, 7});
        const Scene scene = sample_scene(rng, PlantConfig{}, dmin, dmax);
        ExperimentOptions o = opt;
        o.seed = derive_seed(opt.seed, {k});
        o.cloud.seed = o.seed;
        const MeasuredFit m = measure_and_fit(surfaces[k], o);
        const IdealComparison c = compare_ideal(surfaces[k], m.fit.surface, scene, o);
        const bool wins = c.acc_ideal >= c.acc_fit;
        ideal_wins += wins;
        fit_accs.push_back(c.acc_fit);
        ideal_accs.push_back(c.acc_ideal);
        csv << surfaces[k].id << "," << horizontal_distance(scene.heliostat_pos) << "," << c.acc_fit << ","
            << c.acc_ideal << "," << int(wins) << "\n";
        g_log.event("case", {{"id", surfaces[k].id}, {"acc_fit", c.acc_fit}, {"acc_ideal", c.acc_ideal}});
    }
    write_text(ea.out, csv.str());
    std::cout << json{{"count", surfaces.size()},
                      {"median_acc_fit", quantile(fit_accs, 0.5)},
                      {"median_acc_ideal", quantile(ideal_accs, 0.5)},
                      {"fraction_ideal_beats_fit", double(ideal_wins) / double(surfaces.size())}}
                     .dump(2)
              << "\n";
    return 0;
}

int run_loss_hist(const SurfaceSource &src, const ExperimentArgs &ea, double distance, const std::string &hist,
                  int bins, int threads) {
    ExperimentOptions opt = ea.options(threads);
    g_log.event("config", {{"command", "nurbs-loss-hist"}, {"source", src.to_json()}, {"rays", opt.rays},
                           {"seed", opt.seed}, {"spacing", opt.cloud.spacing}, {"distance", distance},
                           {"out", ea.out}, {"hist", hist}, {"bins", bins}});
    if (bins < 1)
        throw Error(ErrorKind::config, "--bins must be >= 1");
    const auto surfaces = src.load(opt.seed);
    std::ostringstream csv;
    csv << std::setprecision(9) << "id,distance,loss\n";
    std::vector<double> losses;
    for (std::size_t k = 0; k < surfaces.size(); ++k) {
        Rng rng = make_rng(opt.seed, {k, 7});
        const Scene scene = sample_scene(rng, PlantConfig{}, distance, distance);
        ExperimentOptions o = opt;
        o.seed = derive_seed(opt.seed, {k});
        o.cloud.seed = o.seed;
        const double loss = cloud_flux_loss(measure_and_fit(surfaces[k], o), scene, o);
        losses.push_back(loss);
        csv << surfaces[k].id << "," << horizontal_distance(scene.heliostat_pos) << "," << loss << "\n";
        g_log.event("case", {{"id", surfaces[k].id}, {"loss", loss}});
    }
    write_text(ea.out, csv.str());
    const QuantileSummary q = summarize(losses);
    if (!hist.empty()) {
        const double lo = q.min, hi = q.max > q.min ? q.max : q.min + 1e-9;
        std::vector<int> counts(bins, 0);
        for (double l : losses)
            ++counts[std::min(bins - 1, static_cast<int>((l - lo) / (hi - lo) * bins))];
        std::ostringstream h;
        h << std::setprecision(9) << "bin_lo,bin_hi,count\n";
        for (int b = 0; b < bins; ++b)
            h << lo + (hi - lo) * b / bins << "," << lo + (hi - lo) * (b + 1) / bins << "," << counts[b] << "\n";
        write_text(hist, h.str());
    }
    std::cout << json{{"count", q.count}, {"min", q.min}, {"q1", q.q1}, {"median", q.median}, {"q3", q.q3}, {"max", q.max}}.dump(2)
              << "\n";
    return 0;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Heliostat surface fitting, ray tracing and dataset generation"};
    app.require_subcommand(1);
    int threads = 0;
    bool log_json = false;
    app.add_option("--threads", threads, "Worker threads (0: HELIO_THREADS or all cores)")->capture_default_str();
    app.add_flag("--log-json", log_json, "Structured JSON log lines on stderr");

    // gen-surfaces
    auto *gs = app.add_subcommand("gen-surfaces", "Generate synthetic deformed heliostat surfaces");
    std::string gs_out;
    std::size_t gs_count = 4;
    std::uint64_t gs_seed = 0;
    DeformArgs gs_def;
    gs->add_option("--out", gs_out, "Output directory")->required();
    gs->add_option("--count", gs_count, "Number of surfaces")->capture_default_str()->check(CLI::PositiveNumber);
    gs->add_option("--seed", gs_seed, "Root seed")->capture_default_str();
    gs_def.add(gs);

    // synth-cloud
    auto *sc = app.add_subcommand("synth-cloud", "Sample a normal-vector cloud from a surface");
    std::string sc_surface, sc_analytic, sc_out;
    CloudOptions sc_opt;
    sc->add_option("--surface", sc_surface, "Source .hsrf surface");
    sc->add_option("--analytic", sc_analytic, "Analytic source: plane:S[,SY], paraboloid:F, sinusoid:A,PX,PY");
    sc->add_option("--out", sc_out, "Output cloud (.ncld binary or .csv)")->required();
    sc->add_option("--spacing", sc_opt.spacing, "Sample spacing (m)")->capture_default_str();
    sc->add_option("--noise-mrad", sc_opt.noise_mrad, "Gaussian angular noise per tangent axis (mrad)")->capture_default_str();
    sc->add_option("--seed", sc_opt.seed, "Noise seed")->capture_default_str();

    // fit-nurbs
    auto *fn = app.add_subcommand("fit-nurbs", "Fit the 4x8x8 spline surface to a normal cloud");
    std::string fn_cloud, fn_out, fn_report;
    FitConfig fn_cfg;
    fn->add_option("--cloud", fn_cloud, "Input cloud (.ncld or .csv)")->required();
    fn->add_option("--out", fn_out, "Output .hsrf surface")->required();
    fn->add_option("--report", fn_report, "Write the fit report JSON here as well as to stdout");
    fn->add_option("--max-iters", fn_cfg.max_iters, "Iteration cap per facet")->capture_default_str();
    fn->add_option("--lr", fn_cfg.learning_rate, "Initial step size (m)")->capture_default_str();
    fn->add_option("--tol-grad", fn_cfg.tol_grad, "Gradient-norm stopping threshold")->capture_default_str();
    fn->add_option("--residual-tol", fn_cfg.residual_tol_mrad, "Residual tolerance reported as frac_below_tol (mrad)")
        ->capture_default_str();

    // trace
    auto *tr = app.add_subcommand("trace", "Ray trace a heliostat onto the target and write a flux image");
    std::string tr_surface, tr_cloud, tr_out, tr_csv, tr_rays = "1e6";
    bool tr_ideal = false;
    std::uint64_t tr_seed = 0;
    SceneArgs tr_scene;
    tr->add_option("--surface", tr_surface, "Spline surface (.hsrf)");
    tr->add_option("--cloud", tr_cloud, "Normal cloud traced as dense micro-facets");
    tr->add_flag("--ideal", tr_ideal, "Trace the ideal flat heliostat");
    tr_scene.add(tr);
    tr->add_option("--rays", tr_rays, "Number of rays (accepts 1e6)")->capture_default_str();
    tr->add_option("--seed", tr_seed, "Trace seed")->capture_default_str();
    tr->add_option("--out", tr_out, "Output .flux image")->required();
    tr->add_option("--csv", tr_csv, "Also write the 64x64 image as CSV");

    // eval
    auto *ev = app.add_subcommand("eval", "Flux accuracy between images, or dataset invariant check");
    std::string ev_gt, ev_pred, ev_gt_dir, ev_pred_dir, ev_dataset, ev_out;
    ev->add_option("--gt", ev_gt, "Ground-truth .flux");
    ev->add_option("--pred", ev_pred, "Predicted .flux");
    ev->add_option("--gt-dir", ev_gt_dir, "Directory of ground-truth .flux files (batch)");
    ev->add_option("--pred-dir", ev_pred_dir, "Directory of predictions with matching names (batch)");
    ev->add_option("--dataset", ev_dataset, "Dataset directory to validate");
    ev->add_option("--out", ev_out, "Batch CSV output");

    // gen-dataset
    auto *gd = app.add_subcommand("gen-dataset", "Build an augmented flux/surface training corpus");
    std::string gd_surfaces, gd_out, gd_rays = "1e5";
    DatasetConfig gd_cfg;
    gd->add_option("--bases,--surfaces", gd_surfaces, "Directory of base .hsrf surfaces")->required();
    gd->add_option("--out", gd_out, "Output directory")->required();
    gd->add_option("--records", gd_cfg.records, "Records to generate")->capture_default_str();
    gd->add_option("--samples", gd_cfg.samples_per_record, "Flux images per record (1-8)")->capture_default_str();
    gd->add_option("--rays", gd_rays, "Rays per image (accepts 1e5)")->capture_default_str();
    gd->add_option("--seed", gd_cfg.seed, "Root seed")->capture_default_str();
    gd->add_option("--val-fraction", gd_cfg.val_fraction, "Validation share")->capture_default_str();
    gd->add_option("--test-fraction", gd_cfg.test_fraction, "Test share")->capture_default_str();
    gd->add_option("--rotate-probability", gd_cfg.rotate_probability, "Probability of 180 degree rotation")
        ->capture_default_str();
    gd->add_option("--aim-jitter", gd_cfg.aim_jitter, "Aim-point jitter half-width (m)")->capture_default_str();
    std::string gd_sunshape = "pillbox";
    gd->add_option("--sunshape", gd_sunshape, "pillbox or gaussian")->check(CLI::IsMember({"pillbox", "gaussian"}))
        ->capture_default_str();
    gd->add_option("--sunshape-mrad", gd_cfg.sunshape.width_mrad, "Sun shape half-angle or sigma (mrad)")
        ->capture_default_str();

    // compare-ideal
    auto *ci = app.add_subcommand("compare-ideal", "Fitted spline versus ideal flat heliostat accuracy");
    SurfaceSource ci_src;
    ExperimentArgs ci_args;
    double ci_min = 50.0, ci_max = 300.0;
    ci_src.add(ci);
    ci_args.add(ci);
    ci->add_option("--min-distance", ci_min, "Minimum heliostat distance (m)")->capture_default_str();
    ci->add_option("--max-distance", ci_max, "Maximum heliostat distance (m)")->capture_default_str();

    // nurbs-loss-hist
    auto *nl = app.add_subcommand("nurbs-loss-hist", "Flux accuracy lost by the spline fit, per heliostat");
    SurfaceSource nl_src;
    ExperimentArgs nl_args;
    double nl_distance = 100.0;
    std::string nl_hist;
    int nl_bins = 20;
    nl_src.add(nl);
    nl_args.add(nl);
    nl->add_option("--distance", nl_distance, "Heliostat distance (m)")->capture_default_str();
    nl->add_option("--hist", nl_hist, "Histogram CSV output");
    nl->add_option("--bins", nl_bins, "Histogram bins")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        report_error("usage", e.what());
        return 2;
    }

    g_log.as_json = log_json;
    try {
        if (*gs)
            return run_gen_surfaces(gs_out, gs_count, gs_seed, gs_def);
        if (*sc)
            return run_synth_cloud(sc_surface, sc_analytic, sc_out, sc_opt);
        if (*fn)
            return run_fit(fn_cloud, fn_out, fn_report, fn_cfg, threads);
        if (*tr)
            return run_trace(tr_surface, tr_cloud, tr_ideal, tr_scene, tr_rays, tr_seed, tr_out, tr_csv, threads);
        if (*ev)
            return run_eval(ev_gt, ev_pred, ev_gt_dir, ev_pred_dir, ev_dataset, ev_out);
        if (*gd) {
            gd_cfg.sunshape.model = parse_sunshape_model(gd_sunshape);
            gd_cfg.threads = threads;
            return run_gen_dataset(gd_surfaces, gd_out, gd_cfg, gd_rays);
        }
        if (*ci)
            return run_compare_ideal(ci_src, ci_args, ci_min, ci_max, threads);
        if (*nl)
            return run_loss_hist(nl_src, nl_args, nl_distance, nl_hist, nl_bins, threads);
    } catch (const Error &e) {
        report_error(std::string(to_string(e.kind())), e.what());
        return exit_code(e.kind());
    } catch (const std::exception &e) {
        report_error("internal", e.what());
        return 1;
    }
    return 1;
}
