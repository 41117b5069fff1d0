#include <gtest/gtest.h>

#include "heliostat/config.hpp"

using namespace helio;

TEST(SceneConfig, Defaults) {
    const SceneConfig c = parse_scene_config(std::string{});
    EXPECT_EQ(c.heliostat_pos, Vec3(0, 100, 2));
    EXPECT_FALSE(c.use_secondary);
    const Scene s = c.scene();
    ASSERT_TRUE(s.alignment.has_value());
    EXPECT_EQ(s.aim_point, Vec3(0, 0, 50));
    EXPECT_NEAR(sun_elevation_deg(s.sun_dir), 62.6, 0.1);
}

TEST(SceneConfig, ParsesKeys) {
    const SceneConfig c = parse_scene_config(R"(
# comment
heliostat_pos = 10, 120.5, 2   # trailing comment
sun_dir = 0 0.5 -1
target = secondary
sunshape = gaussian
sunshape_mrad = 2.5
latitude_deg = 37.1
)");
    EXPECT_EQ(c.heliostat_pos, Vec3(10, 120.5, 2));
    EXPECT_NEAR((c.resolved_sun_dir() - Vec3(0, 0.5, -1).normalized()).norm(), 0.0, 1e-15);
    EXPECT_TRUE(c.use_secondary);
    EXPECT_EQ(c.target().center, Vec3(-18, 0, 65));
    EXPECT_EQ(c.sunshape.model, SunShapeModel::gaussian);
    EXPECT_EQ(c.sunshape.width_mrad, 2.5);
    EXPECT_EQ(c.plant.latitude_deg, 37.1);
}

TEST(SceneConfig, Errors) {
    for (const char *text : {"bogus = 1", "heliostat_pos = 1 2", "sun_day = x", "no equals", "target = side",
                             "sunshape = square", "sun_dir = 0 0 0"}) {
        try {
            parse_scene_config(std::string(text));
            FAIL() << text;
        } catch (const Error &e) {
            EXPECT_EQ(e.kind(), ErrorKind::config) << text;
        }
    }
    try {
        load_scene_config("/nonexistent/scene.cfg");
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.kind(), ErrorKind::io);
    }
}
