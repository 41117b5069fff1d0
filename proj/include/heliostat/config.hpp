#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "heliostat/scene.hpp"
#include "heliostat/sunshape.hpp"

namespace helio {

/// Scene file contents: plant geometry plus one heliostat/sun/aim configuration.
struct SceneConfig {
    PlantConfig plant{};
    Vec3 heliostat_pos = Vec3(0.0, 100.0, 2.0);
    std::optional<Vec3> sun_dir;
    double sun_day = 172.0;  // day of year, used when sun_dir is absent
    double sun_hour = 12.0;  // solar time
    std::optional<Vec3> aim_point; // default: target centre
    bool use_secondary = false;
    SunShape sunshape{};

    TargetPlane target() const { return use_secondary ? secondary_target(plant) : primary_target(plant); }

    Vec3 resolved_sun_dir() const {
        return sun_dir ? sun_dir->normalized() : sun_direction_at(plant.latitude_deg, sun_day, sun_hour);
    }

    /// Aligned scene ready for tracing.
    Scene scene() const {
        Scene s;
        s.sun_dir = resolved_sun_dir();
        s.heliostat_pos = heliostat_pos;
        s.target = target();
        s.aim_point = aim_point.value_or(s.target.center);
        return aligned(s);
    }
};

namespace detail {

inline std::string trim(const std::string &s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<double> parse_numbers(const std::string &key, const std::string &value) {
    std::vector<double> out;
    const char *p = value.data(), *end = value.data() + value.size();
    while (p < end) {
        while (p < end && (*p == ' ' || *p == '\t' || *p == ','))
            ++p;
        if (p == end)
            break;
        double v = 0.0;
        auto res = std::from_chars(p, end, v);
        if (res.ec != std::errc())
            throw Error(ErrorKind::config, "invalid number for '" + key + "': " + value);
        if (!std::isfinite(v))
            throw Error(ErrorKind::config, "non-finite value for '" + key + "'");
        out.push_back(v);
        p = res.ptr;
    }
    return out;
}

inline double parse_scalar(const std::string &key, const std::string &value) {
    const auto v = parse_numbers(key, value);
    if (v.size() != 1)
        throw Error(ErrorKind::config, "'" + key + "' expects one number");
    return v[0];
}

inline Vec3 parse_vec3(const std::string &key, const std::string &value) {
    const auto v = parse_numbers(key, value);
    if (v.size() != 3)
        throw Error(ErrorKind::config, "'" + key + "' expects three numbers");
    return {v[0], v[1], v[2]};
}

} // namespace detail

/// Parses `key = value` lines; `#` starts a comment. Unknown keys are rejected.
inline SceneConfig parse_scene_config(std::istream &in) {
    SceneConfig c;
    std::map<std::string, double *> scalars{
        {"latitude_deg", &c.plant.latitude_deg},
        {"target_height", &c.plant.target_height},
        {"secondary_offset_east", &c.plant.secondary_offset_east},
        {"secondary_offset_up", &c.plant.secondary_offset_up},
        {"field_min_distance", &c.plant.field_min_distance},
        {"field_max_distance", &c.plant.field_max_distance},
        {"field_max_azimuth_deg", &c.plant.field_max_azimuth_deg},
        {"pedestal_height", &c.plant.pedestal_height},
        {"min_sun_elevation_deg", &c.plant.min_sun_elevation_deg},
        {"aim_jitter", &c.plant.aim_jitter},
        {"sun_day", &c.sun_day},
        {"sun_hour", &c.sun_hour},
        {"sunshape_mrad", &c.sunshape.width_mrad},
    };
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos)
            line.resize(hash);
        line = detail::trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error(ErrorKind::config, "line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (auto it = scalars.find(key); it != scalars.end())
            *it->second = detail::parse_scalar(key, value);
        else if (key == "heliostat_pos")
            c.heliostat_pos = detail::parse_vec3(key, value);
        else if (key == "sun_dir")
            c.sun_dir = detail::parse_vec3(key, value);
        else if (key == "aim_point")
            c.aim_point = detail::parse_vec3(key, value);
        else if (key == "target") {
            if (value == "primary")
                c.use_secondary = false;
            else if (value == "secondary")
                c.use_secondary = true;
            else
                throw Error(ErrorKind::config, "target must be primary or secondary");
        } else if (key == "sunshape")
            c.sunshape.model = parse_sunshape_model(value);
        else
            throw Error(ErrorKind::config, "line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    if (c.sun_dir && !(c.sun_dir->norm() > 0.0))
        throw Error(ErrorKind::config, "sun_dir must be non-zero");
    if (!(c.sunshape.width_mrad >= 0.0))
        throw Error(ErrorKind::config, "sunshape_mrad must be non-negative");
    if (!(c.plant.field_min_distance >= 0.0 && c.plant.field_min_distance <= c.plant.field_max_distance))
        throw Error(ErrorKind::config, "invalid field distance range");
    return c;
}

inline SceneConfig parse_scene_config(const std::string &text) {
    std::istringstream in(text);
    return parse_scene_config(in);
}

inline SceneConfig load_scene_config(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorKind::io, "cannot open " + path.string());
    return parse_scene_config(in);
}

} // namespace helio
