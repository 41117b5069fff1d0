#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "heliostat/binary_io.hpp"
#include "heliostat/surface.hpp"

namespace helio {

/// One deflectometry-style sample in facet-local coordinates.
struct CloudPoint {
    Vec3 position = Vec3::Zero(); // x in [0, width], y in [0, height], z height
    Vec3 normal = Vec3::UnitZ();  // unit
};

struct CloudFacet {
    double width = kFacetWidth;
    double height = kFacetHeight;
    std::vector<CloudPoint> points;
};

/// Normal-vector point cloud, one slice per facet, in the heliostat's facet layout.
struct NormalCloud {
    std::array<CloudFacet, kFacetCount> facets{};
    FacetLayout facet_layout{};

    std::size_t size() const {
        std::size_t n = 0;
        for (const auto &f : facets)
            n += f.points.size();
        return n;
    }
};

// NCLD layout (little-endian): "NCLD", then for each of the 4 facets a u32 point count
// followed by count x (x, y, z, nx, ny, nz) f32 in facet-local coordinates.
inline io::Bytes serialize_cloud(const NormalCloud &c) {
    io::Writer w;
    w.magic("NCLD");
    for (const auto &f : c.facets) {
        w.u32(static_cast<std::uint32_t>(f.points.size()));
        for (const auto &p : f.points) {
            for (int k = 0; k < 3; ++k)
                w.f32(static_cast<float>(p.position[k]));
            for (int k = 0; k < 3; ++k)
                w.f32(static_cast<float>(p.normal[k]));
        }
    }
    return std::move(w).bytes();
}

inline NormalCloud deserialize_cloud(std::span<const std::uint8_t> bytes) {
    io::Reader r(bytes);
    r.expect_magic("NCLD");
    NormalCloud c;
    for (auto &f : c.facets) {
        const std::size_t count_at = r.offset();
        const std::uint32_t n = r.u32();
        if (static_cast<std::uint64_t>(n) * 24 > r.remaining())
            throw FormatError("point count exceeds file size", count_at);
        f.points.resize(n);
        for (auto &p : f.points) {
            const std::size_t at = r.offset();
            for (int k = 0; k < 3; ++k)
                p.position[k] = r.f32();
            for (int k = 0; k < 3; ++k)
                p.normal[k] = r.f32();
            if (!p.position.allFinite() || !p.normal.allFinite() || p.normal.norm() < 0.5)
                throw FormatError("invalid cloud point", at);
        }
    }
    r.expect_end();
    return c;
}

inline void save_cloud(const std::filesystem::path &path, const NormalCloud &c) {
    io::write_file(path, serialize_cloud(c));
}

/// Statistics from a CSV import.
struct CsvImportStats {
    std::size_t rows = 0;
    std::size_t rejected = 0; // rows outside every facet (gaps, border)
};

/// Plain-text import: one `x,y,z,nx,ny,nz` row per sample in the heliostat frame (m).
/// Rows are assigned to the facet that contains (x, y); a non-numeric first row is
/// treated as a header. Normals are renormalised.
inline NormalCloud import_cloud_csv(std::istream &in, const FacetLayout &layout = {}, CsvImportStats *stats = nullptr) {
    NormalCloud c;
    c.facet_layout = layout;
    CsvImportStats st;
    std::string line;
    std::size_t line_no = 0;
    constexpr double tol = 1e-9;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#')
            continue;
        std::array<double, 6> v{};
        int k = 0;
        bool ok = true;
        const char *p = line.data();
        const char *end = line.data() + line.size();
        while (k < 6 && p < end) {
            while (p < end && (*p == ' ' || *p == '\t'))
                ++p;
            auto res = std::from_chars(p, end, v[k]);
            if (res.ec != std::errc()) {
                ok = false;
                break;
            }
            ++k;
            p = res.ptr;
            while (p < end && (*p == ' ' || *p == '\t' || *p == '\r'))
                ++p;
            if (p < end && *p == ',')
                ++p;
        }
        if (!ok || k != 6) {
            if (st.rows == 0 && line_no == 1)
                continue; // header
            throw Error(ErrorKind::format, "malformed CSV row at line " + std::to_string(line_no));
        }
        ++st.rows;
        Vec3 n(v[3], v[4], v[5]);
        if (!(n.norm() > 0.0))
            throw Error(ErrorKind::format, "zero normal at line " + std::to_string(line_no));
        n.normalize();
        if (n.z() < 0.0)
            n = -n;
        bool placed = false;
        for (int f = 0; f < kFacetCount && !placed; ++f) {
            auto &facet = c.facets[f];
            const Vec3 o = layout.facet_origin(f, facet.width, facet.height);
            const double lx = v[0] - o.x(), ly = v[1] - o.y();
            if (lx >= -tol && lx <= facet.width + tol && ly >= -tol && ly <= facet.height + tol) {
                facet.points.push_back({Vec3(std::clamp(lx, 0.0, facet.width), std::clamp(ly, 0.0, facet.height), v[2]), n});
                placed = true;
            }
        }
        if (!placed)
            ++st.rejected;
    }
    if (stats)
        *stats = st;
    return c;
}

inline NormalCloud load_cloud(const std::filesystem::path &path) {
    if (path.extension() == ".csv") {
        std::ifstream in(path);
        if (!in)
            throw Error(ErrorKind::io, "cannot open " + path.string());
        return import_cloud_csv(in);
    }
    return deserialize_cloud(io::read_file(path));
}

/// Mirror model that treats a normal cloud as dense micro-facets: every query returns the
/// nearest measured sample of that facet.
class CloudMirror {
public:
    explicit CloudMirror(NormalCloud cloud) : cloud_(std::move(cloud)) {
        for (int f = 0; f < kFacetCount; ++f)
            index_[f] = build_index(cloud_.facets[f]);
    }

    const FacetLayout &layout() const { return cloud_.facet_layout; }
    double facet_width(int f) const { return cloud_.facets[f].width; }
    double facet_height(int f) const { return cloud_.facets[f].height; }
    const NormalCloud &cloud() const { return cloud_; }

    MirrorSample sample(int f, double x, double y) const {
        const CloudPoint &p = nearest(f, x, y);
        return {p.position.z(), p.normal};
    }

    const CloudPoint &nearest(int f, double x, double y) const {
        const Index &ix = index_[f];
        const auto &pts = cloud_.facets[f].points;
        const int cx = std::clamp(static_cast<int>(x / ix.cell), 0, ix.nx - 1);
        const int cy = std::clamp(static_cast<int>(y / ix.cell), 0, ix.ny - 1);
        std::uint32_t best = 0;
        double best_d2 = std::numeric_limits<double>::infinity();
        // Grow the search ring until the nearest ring distance exceeds the best match.
        for (int ring = 0;; ++ring) {
            for (int gy = cy - ring; gy <= cy + ring; ++gy) {
                if (gy < 0 || gy >= ix.ny)
                    continue;
                for (int gx = cx - ring; gx <= cx + ring; ++gx) {
                    if (gx < 0 || gx >= ix.nx)
                        continue;
                    if (std::max(std::abs(gx - cx), std::abs(gy - cy)) != ring)
                        continue;
                    const int cell = gy * ix.nx + gx;
                    for (std::uint32_t k = ix.start[cell]; k < ix.start[cell + 1]; ++k) {
                        const CloudPoint &p = pts[ix.order[k]];
                        const double dx = p.position.x() - x, dy = p.position.y() - y;
                        const double d2 = dx * dx + dy * dy;
                        if (d2 < best_d2 || (d2 == best_d2 && ix.order[k] < best)) {
                            best_d2 = d2;
                            best = ix.order[k];
                        }
                    }
                }
            }
            const double reach = ring * ix.cell;
            if (best_d2 <= reach * reach || ring > ix.nx + ix.ny)
                break;
        }
        return pts[best];
    }

private:
    struct Index {
        double cell = 1.0;
        int nx = 1, ny = 1;
        std::vector<std::uint32_t> start; // CSR offsets per cell
        std::vector<std::uint32_t> order; // point indices grouped by cell
    };

    static Index build_index(const CloudFacet &facet) {
        if (facet.points.empty())
            throw Error(ErrorKind::input, "cloud facet has no points");
        Index ix;
        const double area = facet.width * facet.height;
        ix.cell = std::sqrt(area / static_cast<double>(facet.points.size()));
        ix.nx = std::max(1, static_cast<int>(std::ceil(facet.width / ix.cell)));
        ix.ny = std::max(1, static_cast<int>(std::ceil(facet.height / ix.cell)));
        const std::size_t cells = static_cast<std::size_t>(ix.nx) * ix.ny;
        std::vector<std::uint32_t> cell_of(facet.points.size());
        ix.start.assign(cells + 1, 0);
        for (std::size_t k = 0; k < facet.points.size(); ++k) {
            const auto &p = facet.points[k].position;
            const int gx = std::clamp(static_cast<int>(p.x() / ix.cell), 0, ix.nx - 1);
            const int gy = std::clamp(static_cast<int>(p.y() / ix.cell), 0, ix.ny - 1);
            cell_of[k] = static_cast<std::uint32_t>(gy * ix.nx + gx);
            ++ix.start[cell_of[k] + 1];
        }
        for (std::size_t c = 0; c < cells; ++c)
            ix.start[c + 1] += ix.start[c];
        ix.order.resize(facet.points.size());
        std::vector<std::uint32_t> fill(ix.start.begin(), ix.start.end() - 1);
        for (std::size_t k = 0; k < facet.points.size(); ++k)
            ix.order[fill[cell_of[k]]++] = static_cast<std::uint32_t>(k);
        return ix;
    }

    NormalCloud cloud_;
    std::array<Index, kFacetCount> index_;
};

} // namespace helio
