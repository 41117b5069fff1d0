#pragma once

#include <cmath>
#include <filesystem>
#include <vector>

#include "heliostat/binary_io.hpp"
#include "heliostat/raytrace.hpp"

namespace helio {

inline constexpr int kFluxDim = 64;
inline constexpr int kFluxPixels = kFluxDim * kFluxDim;
inline constexpr double kFluxWindow = 4.0; // m, square window edge
inline constexpr double kFluxTotal = 100.0;

/// Normalised flux density: 64 x 64 row-major, row 0 at the top (largest e2), column 0 at
/// the smallest e1. `center` is the window centre in target-plane coordinates.
struct FluxImage {
    std::vector<double> values = std::vector<double>(kFluxPixels, 0.0);
    Vec2 center = Vec2::Zero();
    std::size_t binned = 0;
    std::size_t discarded = 0;

    double &at(int row, int col) { return values[static_cast<std::size_t>(row) * kFluxDim + col]; }
    double at(int row, int col) const { return values[static_cast<std::size_t>(row) * kFluxDim + col]; }

    double sum() const {
        double s = 0.0;
        for (double v : values)
            s += v;
        return s;
    }

    Vec3 center_world(const TargetPlane &target) const { return target.to_world(center); }
};

inline FluxImage flux_image(const HitList &hits) {
    if (hits.hits.empty())
        throw Error(ErrorKind::empty_flux, "no ray reached the target plane");
    // Centre of mass, accumulated relative to the first hit.
    const double x0 = hits.hits.front().x, y0 = hits.hits.front().y;
    double sx = 0.0, sy = 0.0;
    for (const auto &h : hits.hits) {
        sx += h.x - x0;
        sy += h.y - y0;
    }
    const double n = static_cast<double>(hits.hits.size());
    FluxImage img;
    img.center = Vec2(x0 + sx / n, y0 + sy / n);

    const double pixel = kFluxWindow / kFluxDim, half = 0.5 * kFluxWindow;
    std::vector<std::size_t> counts(kFluxPixels, 0);
    for (const auto &h : hits.hits) {
        const double c = std::floor((h.x - img.center.x() + half) / pixel);
        const double r = std::floor((img.center.y() + half - h.y) / pixel);
        if (c < 0 || c >= kFluxDim || r < 0 || r >= kFluxDim) {
            ++img.discarded;
            continue;
        }
        ++counts[static_cast<std::size_t>(r) * kFluxDim + static_cast<std::size_t>(c)];
        ++img.binned;
    }
    if (img.binned == 0)
        throw Error(ErrorKind::empty_flux, "no hit inside the flux window");
    const double scale = kFluxTotal / static_cast<double>(img.binned);
    for (int k = 0; k < kFluxPixels; ++k)
        img.values[k] = static_cast<double>(counts[k]) * scale;
    return img;
}

template <MirrorModel Mirror>
FluxImage trace_flux(const Scene &scene, const Mirror &mirror, std::size_t n_rays, std::uint64_t seed,
                     const TraceOptions &opt = {}) {
    return flux_image(trace(scene, mirror, n_rays, seed, opt));
}

inline FluxImage trace_ideal(const Scene &scene, std::size_t n_rays, std::uint64_t seed, const TraceOptions &opt = {}) {
    return flux_image(trace_ideal_hits(scene, n_rays, seed, opt));
}

// FLUX layout (little-endian): "FLUX", 4096 f32 row-major, window centre 2 x f32.
inline constexpr std::size_t kFluxFileSize = 4 + 4 * kFluxPixels + 8;

inline io::Bytes serialize_flux(const FluxImage &img) {
    io::Writer w;
    w.magic("FLUX");
    for (double v : img.values)
        w.f32(static_cast<float>(v));
    w.f32(static_cast<float>(img.center.x()));
    w.f32(static_cast<float>(img.center.y()));
    return std::move(w).bytes();
}

inline FluxImage deserialize_flux(std::span<const std::uint8_t> bytes) {
    io::Reader r(bytes);
    r.expect_magic("FLUX");
    FluxImage img;
    for (auto &v : img.values) {
        const std::size_t at = r.offset();
        v = r.f32();
        if (!std::isfinite(v) || v < 0.0)
            throw FormatError("invalid flux value", at);
    }
    img.center.x() = r.f32();
    img.center.y() = r.f32();
    r.expect_end();
    return img;
}

inline void save_flux(const std::filesystem::path &path, const FluxImage &img) { io::write_file(path, serialize_flux(img)); }
inline FluxImage load_flux(const std::filesystem::path &path) { return deserialize_flux(io::read_file(path)); }

} // namespace helio
