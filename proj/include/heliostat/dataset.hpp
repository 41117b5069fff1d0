#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "heliostat/binary_io.hpp"
#include "heliostat/flux.hpp"
#include "heliostat/parallel.hpp"
#include "heliostat/scene.hpp"
#include "heliostat/surface.hpp"

namespace helio {

inline constexpr int kMaxSamples = 8;

/// 180 degree rotation about the heliostat normal (see rotate_180).
inline HeliostatSurface augment_rotate(const HeliostatSurface &s) { return rotate_180(s); }

/// Control-point-wise convex blend alpha * s1 + (1 - alpha) * s2.
inline HeliostatSurface augment_blend(const HeliostatSurface &s1, const HeliostatSurface &s2, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw Error(ErrorKind::domain, "blend weight must lie in (0, 1)");
    HeliostatSurface out = s1;
    for (int f = 0; f < kFacetCount; ++f) {
        if (s1.facets[f].degree_u != s2.facets[f].degree_u || s1.facets[f].degree_v != s2.facets[f].degree_v)
            throw Error(ErrorKind::input, "blended surfaces differ in spline degree");
        out.facets[f].z_ctrl = alpha * s1.facets[f].z_ctrl + (1.0 - alpha) * s2.facets[f].z_ctrl;
    }
    out.id.clear();
    return out;
}

enum class Split : std::uint32_t { train = 0, val = 1, test = 2 };

inline const char *to_string(Split s) {
    switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
    }
    return "?";
}

struct DatasetConfig {
    std::size_t records = 10;
    int samples_per_record = kMaxSamples;
    std::size_t rays = 100000;
    std::uint64_t seed = 0;
    double val_fraction = 0.1;
    double test_fraction = 0.1;
    double rotate_probability = 0.5;
    double aim_jitter = 0.5; // m, uniform half-width along both target axes
    PlantConfig plant{};
    SunShape sunshape{};
    int threads = 0;

    void validate() const {
        if (records < 1)
            throw Error(ErrorKind::config, "records must be >= 1");
        if (samples_per_record < 1 || samples_per_record > kMaxSamples)
            throw Error(ErrorKind::config, "samples per record must be in [1, 8]");
        if (rays < 1)
            throw Error(ErrorKind::config, "rays must be >= 1");
        if (!(val_fraction >= 0.0 && test_fraction >= 0.0 && val_fraction + test_fraction < 1.0))
            throw Error(ErrorKind::config, "invalid split fractions");
        if (!(rotate_probability >= 0.0 && rotate_probability <= 1.0))
            throw Error(ErrorKind::config, "rotate probability must be in [0, 1]");
        if (!(aim_jitter >= 0.0) || !std::isfinite(aim_jitter))
            throw Error(ErrorKind::config, "aim jitter must be non-negative");
    }
};

struct FluxSample {
    Vec3 sun_dir = Vec3::Zero();
    Vec3 aim_point = Vec3::Zero();
    FluxImage flux;
};

struct DatasetRecord {
    std::uint32_t index = 0;
    std::uint32_t base_a = 0, base_b = 0;
    std::uint32_t rotated = 0; // bit 0: base a rotated, bit 1: base b rotated
    double alpha = 0.0;
    Split split = Split::train;
    Vec3 heliostat_pos = Vec3::Zero();
    std::vector<FluxSample> samples;
    std::array<ControlGrid, kFacetCount> target_z{};
};

/// Disjoint partition of base-surface indices, and contiguous record ranges per split.
struct SplitPlan {
    std::array<std::vector<std::uint32_t>, 3> bases;                // by Split
    std::array<std::pair<std::size_t, std::size_t>, 3> records{};   // [begin, end)

    Split split_of_record(std::size_t r) const {
        for (int s = 0; s < 3; ++s)
            if (r >= records[s].first && r < records[s].second)
                return static_cast<Split>(s);
        throw Error(ErrorKind::domain, "record index outside the plan");
    }
};

inline SplitPlan plan_splits(std::size_t n_bases, const DatasetConfig &cfg) {
    if (n_bases < 2)
        throw Error(ErrorKind::config, "at least two base surfaces are required");
    std::size_t n_val = 0, n_test = 0;
    if (n_bases >= 3) {
        n_val = cfg.val_fraction > 0 ? std::max<std::size_t>(1, std::llround(cfg.val_fraction * n_bases)) : 0;
        n_test = cfg.test_fraction > 0 ? std::max<std::size_t>(1, std::llround(cfg.test_fraction * n_bases)) : 0;
    } else if (cfg.test_fraction > 0) {
        n_test = 1;
    }
    while (n_val + n_test >= n_bases) { // keep at least one training base
        if (n_val >= n_test && n_val > 0)
            --n_val;
        else
            --n_test;
    }
    std::vector<std::uint32_t> perm(n_bases);
    std::iota(perm.begin(), perm.end(), 0u);
    Rng rng = make_rng(cfg.seed, {0x5b117ULL});
    std::shuffle(perm.begin(), perm.end(), rng);
    SplitPlan plan;
    const std::size_t n_train = n_bases - n_val - n_test;
    plan.bases[0].assign(perm.begin(), perm.begin() + n_train);
    plan.bases[1].assign(perm.begin() + n_train, perm.begin() + n_train + n_val);
    plan.bases[2].assign(perm.begin() + n_train + n_val, perm.end());
    for (auto &b : plan.bases)
        std::sort(b.begin(), b.end());

    const std::size_t r = cfg.records;
    std::size_t r_val = plan.bases[1].empty() ? 0 : static_cast<std::size_t>(std::llround(cfg.val_fraction * r));
    std::size_t r_test = plan.bases[2].empty() ? 0 : static_cast<std::size_t>(std::llround(cfg.test_fraction * r));
    while (r_val + r_test > r - 1 && r_val + r_test > 0)
        (r_val >= r_test ? r_val : r_test)--;
    const std::size_t r_train = r - r_val - r_test;
    plan.records[0] = {0, r_train};
    plan.records[1] = {r_train, r_train + r_val};
    plan.records[2] = {r_train + r_val, r};
    return plan;
}

/// One record from its own RNG stream: the result does not depend on the other records.
inline DatasetRecord generate_record(const std::vector<HeliostatSurface> &bases, const SplitPlan &plan,
                                     const DatasetConfig &cfg, std::size_t index) {
    DatasetRecord rec;
    rec.index = static_cast<std::uint32_t>(index);
    rec.split = plan.split_of_record(index);
    const auto &pool = plan.bases[static_cast<int>(rec.split)];
    Rng rng = make_rng(cfg.seed, {index, 0});

    auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
    const std::size_t ia = pick(pool.size());
    std::size_t ib = ia;
    if (pool.size() > 1) {
        ib = pick(pool.size() - 1);
        if (ib >= ia)
            ++ib;
    }
    rec.base_a = pool[ia];
    rec.base_b = pool[ib];
    HeliostatSurface a = bases[rec.base_a], b = bases[rec.base_b];
    if (uniform01(rng) < cfg.rotate_probability) {
        a = augment_rotate(a);
        rec.rotated |= 1u;
    }
    if (uniform01(rng) < cfg.rotate_probability) {
        b = augment_rotate(b);
        rec.rotated |= 2u;
    }
    do
        rec.alpha = uniform01(rng);
    while (rec.alpha <= 0.0);
    HeliostatSurface surface = enforce_zero_mean(augment_blend(a, b, rec.alpha));
    for (int f = 0; f < kFacetCount; ++f)
        rec.target_z[f] = surface.facets[f].z_ctrl;

    rec.heliostat_pos = sample_field_position(rng, cfg.plant);
    const TargetPlane target = primary_target(cfg.plant);
    for (int k = 0; k < cfg.samples_per_record; ++k) {
        FluxSample s;
        s.sun_dir = sample_sun_position(rng, cfg.plant.latitude_deg, cfg.plant.min_sun_elevation_deg);
        const double j1 = uniform(rng, -1.0, 1.0) * cfg.aim_jitter, j2 = uniform(rng, -1.0, 1.0) * cfg.aim_jitter;
        s.aim_point = target.to_world(Vec2(j1, j2));
        Scene scene;
        scene.sun_dir = s.sun_dir;
        scene.heliostat_pos = rec.heliostat_pos;
        scene.aim_point = s.aim_point;
        scene.target = target;
        scene = aligned(scene);
        s.flux = trace_flux(scene, surface, cfg.rays, derive_seed(cfg.seed, {index, 1, static_cast<std::uint64_t>(k)}),
                            {cfg.sunshape, 1});
        rec.samples.push_back(std::move(s));
    }
    return rec;
}

// Pack layout (little-endian). Header: "HDSP", u16 version, u16 reserved, u32 record_count,
// u32 max_samples, u32 image_dim, u32 record_bytes. Records follow at a fixed stride, each
// a sequence of 4-byte words (see docs/formats.md).
inline constexpr std::uint16_t kPackVersion = 1;
inline constexpr std::size_t kPackHeaderBytes = 24;
inline constexpr std::size_t kSampleWords = 3 + 3 + 2 + kFluxPixels;
inline constexpr std::size_t kRecordWords = 7 + 3 + kMaxSamples * kSampleWords + kFacetCount * kGridSize * kGridSize;
inline constexpr std::size_t kRecordBytes = 4 * kRecordWords;

inline void write_record(io::Writer &w, const DatasetRecord &r) {
    w.u32(r.index);
    w.u32(r.base_a);
    w.u32(r.base_b);
    w.u32(r.rotated);
    w.f32(static_cast<float>(r.alpha));
    w.u32(static_cast<std::uint32_t>(r.split));
    w.u32(static_cast<std::uint32_t>(r.samples.size()));
    for (int k = 0; k < 3; ++k)
        w.f32(static_cast<float>(r.heliostat_pos[k]));
    for (int s = 0; s < kMaxSamples; ++s) {
        if (s >= static_cast<int>(r.samples.size())) {
            w.zeros(4 * kSampleWords);
            continue;
        }
        const FluxSample &fs = r.samples[s];
        for (int k = 0; k < 3; ++k)
            w.f32(static_cast<float>(fs.sun_dir[k]));
        for (int k = 0; k < 3; ++k)
            w.f32(static_cast<float>(fs.aim_point[k]));
        w.f32(static_cast<float>(fs.flux.center.x()));
        w.f32(static_cast<float>(fs.flux.center.y()));
        for (double v : fs.flux.values)
            w.f32(static_cast<float>(v));
    }
    for (int f = 0; f < kFacetCount; ++f)
        for (int i = 0; i < kGridSize; ++i)
            for (int j = 0; j < kGridSize; ++j)
                w.f32(static_cast<float>(r.target_z[f](i, j)));
}

inline DatasetRecord read_record(io::Reader &rd) {
    DatasetRecord r;
    r.index = rd.u32();
    r.base_a = rd.u32();
    r.base_b = rd.u32();
    r.rotated = rd.u32();
    r.alpha = rd.f32();
    const std::size_t split_at = rd.offset();
    const std::uint32_t split = rd.u32();
    if (split > 2)
        throw FormatError("invalid split id", split_at);
    r.split = static_cast<Split>(split);
    const std::size_t count_at = rd.offset();
    const std::uint32_t count = rd.u32();
    if (count < 1 || count > kMaxSamples)
        throw FormatError("invalid sample count", count_at);
    for (int k = 0; k < 3; ++k)
        r.heliostat_pos[k] = rd.f32();
    for (int s = 0; s < kMaxSamples; ++s) {
        if (s >= static_cast<int>(count)) {
            rd.skip(4 * kSampleWords);
            continue;
        }
        FluxSample fs;
        for (int k = 0; k < 3; ++k)
            fs.sun_dir[k] = rd.f32();
        for (int k = 0; k < 3; ++k)
            fs.aim_point[k] = rd.f32();
        fs.flux.center.x() = rd.f32();
        fs.flux.center.y() = rd.f32();
        for (auto &v : fs.flux.values)
            v = rd.f32();
        r.samples.push_back(std::move(fs));
    }
    for (int f = 0; f < kFacetCount; ++f)
        for (int i = 0; i < kGridSize; ++i)
            for (int j = 0; j < kGridSize; ++j)
                r.target_z[f](i, j) = rd.f32();
    return r;
}

inline io::Bytes pack_header(std::size_t records) {
    io::Writer w;
    w.magic("HDSP");
    w.u16(kPackVersion);
    w.u16(0);
    w.u32(static_cast<std::uint32_t>(records));
    w.u32(kMaxSamples);
    w.u32(kFluxDim);
    w.u32(static_cast<std::uint32_t>(kRecordBytes));
    return std::move(w).bytes();
}

inline std::vector<DatasetRecord> deserialize_pack(std::span<const std::uint8_t> bytes) {
    io::Reader rd(bytes);
    rd.expect_magic("HDSP");
    const std::size_t ver_at = rd.offset();
    if (rd.u16() != kPackVersion)
        throw FormatError("unsupported pack version", ver_at);
    rd.u16();
    const std::uint32_t n = rd.u32();
    const std::size_t dims_at = rd.offset();
    if (rd.u32() != kMaxSamples || rd.u32() != kFluxDim || rd.u32() != kRecordBytes)
        throw FormatError("unexpected pack dimensions", dims_at);
    if (static_cast<std::uint64_t>(n) * kRecordBytes != rd.remaining())
        throw FormatError("pack size does not match record count", rd.offset());
    std::vector<DatasetRecord> out;
    out.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i)
        out.push_back(read_record(rd));
    rd.expect_end();
    return out;
}

inline std::vector<DatasetRecord> load_pack(const std::filesystem::path &p) { return deserialize_pack(io::read_file(p)); }

inline nlohmann::json manifest_json(const DatasetConfig &cfg, const SplitPlan &plan, const std::vector<std::string> &base_ids,
                                    const std::string &pack_name) {
    using nlohmann::json;
    json splits, base_split;
    for (int s = 0; s < 3; ++s) {
        const char *name = to_string(static_cast<Split>(s));
        splits[name] = {plan.records[s].first, plan.records[s].second};
        base_split[name] = plan.bases[s];
    }
    return {{"format", "HDSP"},
            {"version", kPackVersion},
            {"pack", pack_name},
            {"seed", cfg.seed},
            {"record_count", cfg.records},
            {"record_bytes", kRecordBytes},
            {"header_bytes", kPackHeaderBytes},
            {"max_samples", kMaxSamples},
            {"image_dim", kFluxDim},
            {"splits", splits},
            {"bases", base_ids},
            {"base_split", base_split},
            {"config",
             {{"samples_per_record", cfg.samples_per_record},
              {"rays", cfg.rays},
              {"val_fraction", cfg.val_fraction},
              {"test_fraction", cfg.test_fraction},
              {"rotate_probability", cfg.rotate_probability},
              {"aim_jitter", cfg.aim_jitter},
              {"sunshape", {{"model", to_string(cfg.sunshape.model)}, {"width_mrad", cfg.sunshape.width_mrad}}},
              {"plant",
               {{"latitude_deg", cfg.plant.latitude_deg},
                {"target_height", cfg.plant.target_height},
                {"field_min_distance", cfg.plant.field_min_distance},
                {"field_max_distance", cfg.plant.field_max_distance},
                {"field_max_azimuth_deg", cfg.plant.field_max_azimuth_deg},
                {"pedestal_height", cfg.plant.pedestal_height},
                {"min_sun_elevation_deg", cfg.plant.min_sun_elevation_deg}}}}}};
}

struct DatasetSummary {
    SplitPlan plan;
    std::filesystem::path manifest, pack;
};

/// Generates all records and writes `manifest.json` and `dataset.pack` under `out_dir`.
/// Records are produced in parallel in index-ordered chunks and appended by a single writer.
inline DatasetSummary build_dataset(const std::vector<HeliostatSurface> &bases, const DatasetConfig &cfg,
                                    const std::filesystem::path &out_dir) {
    cfg.validate();
    DatasetSummary sum;
    sum.plan = plan_splits(bases.size(), cfg);
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec)
        throw Error(ErrorKind::io, "cannot create " + out_dir.string() + ": " + ec.message());
    sum.pack = out_dir / "dataset.pack";
    sum.manifest = out_dir / "manifest.json";

    std::ofstream pack(sum.pack, std::ios::binary | std::ios::trunc);
    if (!pack)
        throw Error(ErrorKind::io, "cannot write " + sum.pack.string());
    const io::Bytes header = pack_header(cfg.records);
    pack.write(reinterpret_cast<const char *>(header.data()), static_cast<std::streamsize>(header.size()));

    const int threads = cfg.threads > 0 ? cfg.threads : default_threads();
    const std::size_t chunk = static_cast<std::size_t>(std::max(1, threads)) * 4;
    for (std::size_t begin = 0; begin < cfg.records; begin += chunk) {
        const std::size_t n = std::min(chunk, cfg.records - begin);
        std::vector<DatasetRecord> recs(n);
        parallel_for(n, threads, [&](std::size_t i) { recs[i] = generate_record(bases, sum.plan, cfg, begin + i); });
        for (const auto &r : recs) {
            io::Writer w;
            write_record(w, r);
            pack.write(reinterpret_cast<const char *>(w.bytes().data()), static_cast<std::streamsize>(w.size()));
        }
    }
    pack.close();
    if (!pack)
        throw Error(ErrorKind::io, "failed writing " + sum.pack.string());

    std::vector<std::string> ids;
    for (const auto &b : bases)
        ids.push_back(b.id);
    std::ofstream man(sum.manifest, std::ios::trunc);
    if (!man)
        throw Error(ErrorKind::io, "cannot write " + sum.manifest.string());
    man << manifest_json(cfg, sum.plan, ids, sum.pack.filename().string()).dump(2) << "\n";
    if (!man)
        throw Error(ErrorKind::io, "failed writing " + sum.manifest.string());
    return sum;
}

} // namespace helio
