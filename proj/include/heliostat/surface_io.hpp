#pragma once

#include <cmath>
#include <filesystem>

#include "heliostat/binary_io.hpp"
#include "heliostat/surface.hpp"

namespace helio {

// HSRF layout (little-endian), see docs/formats.md:
//   "HSRF" | version u16 | facet count u8 (=4)
//   per facet: degree u8 | grid dims u8 u8 (=8 8) | extent f32 f32 | 64 x f32 z_ctrl (i-major)
inline constexpr std::uint16_t kHsrfVersion = 1;
inline constexpr std::size_t kHsrfSize = 4 + 2 + 1 + kFacetCount * (1 + 2 + 8 + 4 * kGridSize * kGridSize);

/// Encodes z_ctrl as 32-bit floats; deserialize(serialize(h)) equals h rounded to f32.
inline io::Bytes serialize(const HeliostatSurface &h) {
    io::Writer w;
    w.magic("HSRF");
    w.u16(kHsrfVersion);
    w.u8(kFacetCount);
    for (const FacetSpline &f : h.facets) {
        if (f.degree_u != f.degree_v)
            throw Error(ErrorKind::config, "HSRF stores a single degree per facet");
        w.u8(static_cast<std::uint8_t>(f.degree_u));
        w.u8(kGridSize);
        w.u8(kGridSize);
        w.f32(static_cast<float>(f.width));
        w.f32(static_cast<float>(f.height));
        for (int i = 0; i < kGridSize; ++i)
            for (int j = 0; j < kGridSize; ++j)
                w.f32(static_cast<float>(f.z_ctrl(i, j)));
    }
    return std::move(w).bytes();
}

inline HeliostatSurface deserialize(std::span<const std::uint8_t> bytes) {
    io::Reader r(bytes);
    r.expect_magic("HSRF");
    const std::size_t version_at = r.offset();
    if (r.u16() != kHsrfVersion)
        throw FormatError("unsupported HSRF version", version_at);
    const std::size_t count_at = r.offset();
    if (r.u8() != kFacetCount)
        throw FormatError("HSRF facet count must be 4", count_at);
    HeliostatSurface h;
    for (FacetSpline &f : h.facets) {
        const std::size_t deg_at = r.offset();
        const int degree = r.u8();
        if (degree < 1 || degree > kMaxDegree)
            throw FormatError("invalid spline degree", deg_at);
        f.degree_u = f.degree_v = degree;
        const std::size_t dims_at = r.offset();
        if (r.u8() != kGridSize || r.u8() != kGridSize)
            throw FormatError("grid dims must be 8x8", dims_at);
        const std::size_t extent_at = r.offset();
        const float w = r.f32(), ht = r.f32();
        // f32 storage of the standard extent maps back to the exact double constant
        f.width = w == static_cast<float>(kFacetWidth) ? kFacetWidth : w;
        f.height = ht == static_cast<float>(kFacetHeight) ? kFacetHeight : ht;
        if (!(f.width > 0.0 && f.height > 0.0 && std::isfinite(f.width) && std::isfinite(f.height)))
            throw FormatError("invalid facet extent", extent_at);
        for (int i = 0; i < kGridSize; ++i)
            for (int j = 0; j < kGridSize; ++j) {
                const std::size_t at = r.offset();
                const float z = r.f32();
                if (!std::isfinite(z))
                    throw FormatError("non-finite control point", at);
                f.z_ctrl(i, j) = z;
            }
    }
    r.expect_end();
    return h;
}

inline void save_heliostat(const std::filesystem::path &path, const HeliostatSurface &h) {
    io::write_file(path, serialize(h));
}

inline HeliostatSurface load_heliostat(const std::filesystem::path &path) {
    HeliostatSurface h = deserialize(io::read_file(path));
    h.id = path.stem().string();
    return h;
}

} // namespace helio
