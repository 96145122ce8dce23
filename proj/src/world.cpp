#include "evavoid/world.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace evavoid {
namespace {

constexpr int kDrawsPerTree = 1000;

std::string fmt9(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

}  // namespace

void InflationConfig::validate() const {
    if (!(quad_radius > 0.0)) throw ValidationError("inflation: quad_radius must be positive");
    if (!(margin >= 0.0)) throw ValidationError("inflation: margin must be non-negative");
}

World generate_world(const WorldGenConfig& cfg) {
    if (cfg.n_trees < 0) throw ValidationError("generate_world: n_trees must be >= 0");
    if (!(cfg.radius_min > 0.0) || !(cfg.radius_max >= cfg.radius_min))
        throw ValidationError("generate_world: invalid radius range");
    const Bounds& b = cfg.bounds;
    if (!(b.x_max > b.x_min) || !(b.y_max > b.y_min)) throw ValidationError("generate_world: degenerate bounds");
    if (!(cfg.start_clearance >= 0.0)) throw ValidationError("generate_world: start_clearance must be >= 0");

    World world;
    world.bounds = b;
    world.seed = cfg.seed;
    world.start_clearance = cfg.start_clearance;
    world.trees.reserve(static_cast<std::size_t>(cfg.n_trees));

    Rng rng(cfg.seed);
    for (int i = 0; i < cfg.n_trees; ++i) {
        bool placed = false;
        for (int attempt = 0; attempt < kDrawsPerTree && !placed; ++attempt) {
            Tree t;
            t.x = rng.uniform(b.x_min, b.x_max);
            t.y = rng.uniform(b.y_min, b.y_max);
            t.radius = rng.uniform(cfg.radius_min, cfg.radius_max);
            t.albedo = rng.uniform(0.25, 0.9);
            if (std::hypot(t.x, t.y) < cfg.start_clearance) continue;
            world.trees.push_back(t);
            placed = true;
        }
        if (!placed)
            throw GenerationFailure("generate_world: could not place tree " + std::to_string(i) + " outside the " +
                                    fmt9(cfg.start_clearance) + " m start clearance");
    }
    return world;
}

std::vector<Tree> obstacles_within(const World& world, Vec2 p, double r) {
    if (r < 0.0) throw ValidationError("obstacles_within: negative radius");
    std::vector<Tree> out;
    const double r2 = r * r;
    for (const Tree& t : world.trees) {
        const double dx = t.x - p.x;
        const double dy = t.y - p.y;
        if (dx * dx + dy * dy <= r2) out.push_back(t);
    }
    return out;
}

double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
    const Vec2 ab = b - a;
    const double len2 = dot(ab, ab);
    double s = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
    s = std::clamp(s, 0.0, 1.0);
    return norm(p - (a + s * ab));
}

double segment_clearance(const std::vector<Tree>& trees, Vec2 a, Vec2 b, const InflationConfig& inflate) {
    double best = std::numeric_limits<double>::infinity();
    for (const Tree& t : trees) {
        const double c = point_segment_distance(t.center(), a, b) - (t.radius + inflate.quad_radius + inflate.margin);
        best = std::min(best, c);
    }
    return best;
}

bool segment_clear(const std::vector<Tree>& trees, Vec2 a, Vec2 b, const InflationConfig& inflate) {
    return segment_clearance(trees, a, b, inflate) > 0.0;
}

bool segment_clear(const World& world, Vec2 a, Vec2 b, const InflationConfig& inflate) {
    return segment_clear(world.trees, a, b, inflate);
}

bool in_collision(const World& world, Vec2 p, double quad_radius) {
    for (const Tree& t : world.trees) {
        if (norm(p - t.center()) < t.radius + quad_radius) return true;
    }
    return false;
}

std::string world_to_text(const World& world) {
    std::ostringstream out;
    out << "{\n";
    out << "  \"seed\": " << world.seed << ",\n";
    out << "  \"bounds\": {\"x_min\": " << fmt9(world.bounds.x_min) << ", \"x_max\": " << fmt9(world.bounds.x_max)
        << ", \"y_min\": " << fmt9(world.bounds.y_min) << ", \"y_max\": " << fmt9(world.bounds.y_max) << "},\n";
    out << "  \"start_clearance\": " << fmt9(world.start_clearance) << ",\n";
    out << "  \"trees\": [";
    for (std::size_t i = 0; i < world.trees.size(); ++i) {
        const Tree& t = world.trees[i];
        out << (i == 0 ? "\n" : ",\n");
        out << "    {\"x\": " << fmt9(t.x) << ", \"y\": " << fmt9(t.y) << ", \"radius\": " << fmt9(t.radius)
            << ", \"albedo\": " << fmt9(t.albedo) << "}";
    }
    out << (world.trees.empty() ? "]\n" : "\n  ]\n");
    out << "}\n";
    return out.str();
}

World world_from_text(const std::string& text) {
    World w;
    try {
        const auto j = nlohmann::json::parse(text);
        w.seed = j.at("seed").get<std::uint64_t>();
        const auto& b = j.at("bounds");
        w.bounds = {b.at("x_min").get<double>(), b.at("x_max").get<double>(), b.at("y_min").get<double>(),
                    b.at("y_max").get<double>()};
        w.start_clearance = j.at("start_clearance").get<double>();
        for (const auto& t : j.at("trees")) {
            w.trees.push_back({t.at("x").get<double>(), t.at("y").get<double>(), t.at("radius").get<double>(),
                               t.at("albedo").get<double>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("world file: ") + e.what());
    }
    for (const Tree& t : w.trees) {
        if (!(t.radius > 0.0) || t.albedo < 0.0 || t.albedo > 1.0)
            throw ValidationError("world file: tree violates radius/albedo invariants");
    }
    return w;
}

void save_world(const World& world, const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string() + " for writing");
    f << world_to_text(world);
    if (!f) throw IoError("write failed: " + path.string());
}

World load_world(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    return world_from_text(ss.str());
}

}  // namespace evavoid
