#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "heliostat/normal_cloud.hpp"
#include "heliostat/surface_io.hpp"
#include "heliostat/synth.hpp"

using namespace helio;

namespace {

HeliostatSurface f32_surface(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(-2e-3f, 2e-3f);
    HeliostatSurface h;
    for (auto &f : h.facets)
        for (int i = 0; i < kGridSize; ++i)
            for (int j = 0; j < kGridSize; ++j)
                f.z_ctrl(i, j) = u(rng);
    return h;
}

std::filesystem::path temp_path(const std::string &name) {
    return std::filesystem::temp_directory_path() / ("helio_test_" + std::to_string(::getpid()) + "_" + name);
}

} // namespace

TEST(Hsrf, SizeWithinSevenKilobytes) {
    const io::Bytes b = serialize(flat_heliostat());
    EXPECT_EQ(b.size(), kHsrfSize);
    EXPECT_LE(b.size(), 7u * 1024u);
}

TEST(Hsrf, RoundTripBitExact) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const HeliostatSurface h = f32_surface(seed);
        const io::Bytes b = serialize(h);
        const HeliostatSurface back = deserialize(b);
        EXPECT_EQ(back, h);
        for (int f = 0; f < kFacetCount; ++f)
            for (int i = 0; i < kGridSize; ++i)
                for (int j = 0; j < kGridSize; ++j)
                    EXPECT_EQ(std::bit_cast<std::uint64_t>(back.facets[f].z_ctrl(i, j)),
                              std::bit_cast<std::uint64_t>(h.facets[f].z_ctrl(i, j)));
        EXPECT_EQ(serialize(back), b);
    }
}

TEST(Hsrf, GeneratedSurfaceRoundTripsThroughFile) {
    DeformationSpec spec;
    spec.seed = 5;
    const HeliostatSurface h = gen_surface(spec);
    const auto p = temp_path("s.hsrf");
    save_heliostat(p, h);
    EXPECT_EQ(std::filesystem::file_size(p), kHsrfSize);
    const HeliostatSurface back = load_heliostat(p);
    EXPECT_EQ(serialize(back), serialize(h));
    EXPECT_EQ(back.facets[0].width, kFacetWidth);
    for (int f = 0; f < kFacetCount; ++f)
        EXPECT_LT((back.facets[f].z_ctrl - h.facets[f].z_ctrl).cwiseAbs().maxCoeff(), 1e-9);
    std::filesystem::remove(p);
}

TEST(Hsrf, TruncatedInputReportsOffset) {
    const io::Bytes b = serialize(f32_surface(1));
    for (std::size_t cut : {0ul, 3ul, 5ul, 100ul, b.size() - 1}) {
        const io::Bytes t(b.begin(), b.begin() + cut);
        try {
            deserialize(t);
            FAIL() << "cut " << cut;
        } catch (const FormatError &e) {
            EXPECT_LE(e.offset(), cut);
            EXPECT_EQ(e.kind(), ErrorKind::format);
        }
    }
}

TEST(Hsrf, RejectsCorruption) {
    io::Bytes b = serialize(flat_heliostat());
    io::Bytes bad_magic = b;
    bad_magic[0] = 'X';
    EXPECT_THROW(deserialize(bad_magic), FormatError);
    io::Bytes bad_version = b;
    bad_version[4] = 9;
    try {
        deserialize(bad_version);
        FAIL();
    } catch (const FormatError &e) {
        EXPECT_EQ(e.offset(), 4u);
    }
    io::Bytes nan = b;
    const std::uint32_t q = std::bit_cast<std::uint32_t>(std::numeric_limits<float>::quiet_NaN());
    const std::size_t at = 7 + 11; // first control point of facet 0
    for (int k = 0; k < 4; ++k)
        nan[at + k] = static_cast<std::uint8_t>(q >> (8 * k));
    try {
        deserialize(nan);
        FAIL();
    } catch (const FormatError &e) {
        EXPECT_EQ(e.offset(), at);
    }
    io::Bytes longer = b;
    longer.push_back(0);
    EXPECT_THROW(deserialize(longer), FormatError);
}

TEST(Hsrf, MissingFileIsIoError) {
    try {
        load_heliostat("/nonexistent/dir/x.hsrf");
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.kind(), ErrorKind::io);
    }
}

TEST(Ncld, RoundTrip) {
    CloudOptions opt;
    opt.spacing = 0.02;
    opt.min_per_axis = 50;
    const NormalCloud c = synth_normal_cloud(AnalyticSurface::paraboloid(100.0), opt);
    const io::Bytes b = serialize_cloud(c);
    const NormalCloud back = deserialize_cloud(b);
    ASSERT_EQ(back.size(), c.size());
    EXPECT_EQ(serialize_cloud(back), b);
    for (int f = 0; f < kFacetCount; ++f)
        for (std::size_t k = 0; k < c.facets[f].points.size(); k += 97)
            EXPECT_LT((back.facets[f].points[k].normal - c.facets[f].points[k].normal).norm(), 1e-7);
    const io::Bytes t(b.begin(), b.begin() + 1000);
    EXPECT_THROW(deserialize_cloud(t), FormatError);
}

TEST(Ncld, CsvImportAssignsFacets) {
    std::stringstream csv;
    csv << "x,y,z,nx,ny,nz\n";
    const FacetLayout layout;
    for (int f = 0; f < kFacetCount; ++f) {
        const Vec3 o = layout.facet_origin(f);
        csv << o.x() + 0.5 << "," << o.y() + 0.25 << ",0.001,0,0,2\n";
    }
    csv << "0,0,0,0,0,1\n"; // centre of the gap cross
    CsvImportStats st;
    const NormalCloud c = import_cloud_csv(csv, layout, &st);
    EXPECT_EQ(st.rows, 5u);
    EXPECT_EQ(st.rejected, 1u);
    for (const auto &f : c.facets) {
        ASSERT_EQ(f.points.size(), 1u);
        EXPECT_NEAR(f.points[0].position.x(), 0.5, 1e-12);
        EXPECT_NEAR(f.points[0].position.y(), 0.25, 1e-12);
        EXPECT_EQ(f.points[0].normal, Vec3::UnitZ());
    }
    std::stringstream bad("1,2,3\n1,2,3,4\n");
    EXPECT_THROW(import_cloud_csv(bad), Error);
}

TEST(CloudMirror, NearestSample) {
    CloudOptions opt;
    opt.spacing = 0.02;
    const NormalCloud c = synth_normal_cloud(AnalyticSurface::paraboloid(50.0), opt);
    const CloudMirror m(c);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int n = 0; n < 500; ++n) {
        const int f = static_cast<int>(rng() % 4);
        const double x = u(rng) * kFacetWidth, y = u(rng) * kFacetHeight;
        const auto &pts = c.facets[f].points;
        double best = 1e9;
        for (const auto &p : pts)
            best = std::min(best, std::hypot(p.position.x() - x, p.position.y() - y));
        const CloudPoint &q = m.nearest(f, x, y);
        EXPECT_NEAR(std::hypot(q.position.x() - x, q.position.y() - y), best, 1e-15);
    }
    NormalCloud empty;
    EXPECT_THROW((CloudMirror(empty)), Error);
}
