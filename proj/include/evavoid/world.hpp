#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "evavoid/common.hpp"

namespace evavoid {

// Vertical cylinder. Infinite for collision queries; rendered with finite height.
struct Tree {
    double x = 0.0;
    double y = 0.0;
    double radius = 0.3;
    double albedo = 0.5;

    Vec2 center() const { return {x, y}; }
    friend bool operator==(const Tree&, const Tree&) = default;
};

struct Bounds {
    double x_min = 0.0;
    double x_max = 50.0;
    double y_min = -20.0;
    double y_max = 20.0;

    bool contains(Vec2 p) const { return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max; }
    friend bool operator==(const Bounds&, const Bounds&) = default;
};

struct World {
    std::vector<Tree> trees;
    Bounds bounds;
    std::uint64_t seed = 0;
    double start_clearance = 2.0;

    friend bool operator==(const World&, const World&) = default;
};

struct InflationConfig {
    double quad_radius = 0.25;
    double margin = 0.75;

    void validate() const;
};

struct WorldGenConfig {
    std::uint64_t seed = 0;
    int n_trees = 100;
    Bounds bounds{};
    double radius_min = 0.15;
    double radius_max = 0.45;
    double start_clearance = 2.0;
};

// Uniform tree placement with rejection of centers near the origin. Throws
// GenerationFailure when a tree cannot be placed after a bounded number of draws.
World generate_world(const WorldGenConfig& cfg);

// Trees with center distance to p <= r, in index order.
std::vector<Tree> obstacles_within(const World& world, Vec2 p, double r);

// Minimum distance between point p and the closed segment ab.
double point_segment_distance(Vec2 p, Vec2 a, Vec2 b);

// Clearance of segment ab against a set of trees: min over trees of
// distance(segment, center) - (radius + quad_radius + margin).
double segment_clearance(const std::vector<Tree>& trees, Vec2 a, Vec2 b, const InflationConfig& inflate);

bool segment_clear(const std::vector<Tree>& trees, Vec2 a, Vec2 b, const InflationConfig& inflate);
bool segment_clear(const World& world, Vec2 a, Vec2 b, const InflationConfig& inflate);

bool in_collision(const World& world, Vec2 p, double quad_radius);

// Text serialization (JSON, fixed key order, 9 significant digits).
std::string world_to_text(const World& world);
World world_from_text(const std::string& text);
void save_world(const World& world, const std::filesystem::path& path);
World load_world(const std::filesystem::path& path);

}  // namespace evavoid
