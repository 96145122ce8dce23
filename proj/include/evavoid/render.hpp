#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "evavoid/control.hpp"
#include "evavoid/world.hpp"

namespace evavoid {

struct CameraConfig {
    int width = 346;
    int height = 260;
    double horizontal_fov = 1.57;
    double fps = 30.0;
    double max_depth = 20.0;

    void validate() const;
    double focal() const;  // pixels, square pixels
    double cx() const { return 0.5 * width; }
    double cy() const { return 0.5 * height; }
    // Frame i timestamp in microseconds.
    std::uint64_t frame_time_us(std::uint64_t i) const;
};

struct Frame {
    int width = 0;
    int height = 0;
    std::uint64_t t_us = 0;
    std::vector<float> intensity;  // row-major, [0, 1]

    double t() const { return static_cast<double>(t_us) * 1e-6; }
    float at(int x, int y) const { return intensity[static_cast<std::size_t>(y) * width + x]; }
    friend bool operator==(const Frame&, const Frame&) = default;
};

struct DepthMap {
    int width = 0;
    int height = 0;
    std::uint64_t t_us = 0;
    std::vector<float> depth;  // row-major, meters in (0, max_depth]

    double t() const { return static_cast<double>(t_us) * 1e-6; }
    float at(int x, int y) const { return depth[static_cast<std::size_t>(y) * width + x]; }
    friend bool operator==(const DepthMap&, const DepthMap&) = default;
};

struct PixelCoord {
    double u = 0.0;  // column
    double v = 0.0;  // row
};

// Scene constants shared by the renderer and its tests.
inline constexpr double kTreeHeight = 12.0;
inline constexpr int kBarkStripes = 8;
inline constexpr double kBarkContrast = 0.35;

// Raycast the forest from the camera at pose.position, looking along +x.
// Deterministic; frame timestamps come from pose.t.
std::pair<Frame, DepthMap> render(const World& world, const QuadState& pose, const CameraConfig& cam);

std::optional<PixelCoord> project_point(Vec3 p, const QuadState& pose, const CameraConfig& cam);

}  // namespace evavoid
