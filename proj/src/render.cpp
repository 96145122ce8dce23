#include "evavoid/render.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <iostream>

namespace evavoid {
namespace {

constexpr double kGroundCell = 0.5;
constexpr double kAmbient = 0.3;
// Light direction (toward the light) lies in the x-z plane, so shading is
// symmetric under y -> -y.
constexpr double kLightX = -0.6;
constexpr double kLightZ = 0.8;

double hash01(std::int64_t a, std::int64_t b) {
    const std::uint64_t h = mix_seed(static_cast<std::uint64_t>(a) * 0x100000001b3ull, static_cast<std::uint64_t>(b));
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// Bilinear value noise over the ground, mirrored about y = 0.
double ground_texture(double gx, double gy) {
    const double fx = gx / kGroundCell;
    const double fy = std::abs(gy) / kGroundCell;
    const double x0 = std::floor(fx);
    const double y0 = std::floor(fy);
    const double tx = fx - x0;
    const double ty = fy - y0;
    const auto ix = static_cast<std::int64_t>(x0);
    const auto iy = static_cast<std::int64_t>(y0);
    const double v00 = hash01(ix, iy), v10 = hash01(ix + 1, iy);
    const double v01 = hash01(ix, iy + 1), v11 = hash01(ix + 1, iy + 1);
    const double top = v00 + tx * (v10 - v00);
    const double bot = v01 + tx * (v11 - v01);
    return top + ty * (bot - top);
}

// Orientation of a trunk only shifts its stripe pattern; derived from fields
// that are unchanged by y-mirroring.
double bark_phase(const Tree& t) {
    const std::uint64_t h = mix_seed(std::bit_cast<std::uint64_t>(t.x), std::bit_cast<std::uint64_t>(t.radius));
    return 2.0 * kPi * (static_cast<double>(h >> 11) * 0x1.0p-53);
}

struct ColumnHit {
    double t;  // ray parameter (unit forward step)
    double nx, ny;
    std::size_t tree;
};

void warn_outside_bounds() {
    static std::atomic<bool> warned{false};
    if (!warned.exchange(true)) std::cerr << "warning: rendering from a pose outside the world bounds\n";
}

}  // namespace

void CameraConfig::validate() const {
    if (width <= 0 || height <= 0) throw ValidationError("camera: width and height must be positive");
    if (!(horizontal_fov > 0.0 && horizontal_fov < kPi)) throw ValidationError("camera: fov must be in (0, pi)");
    if (!(fps > 0.0)) throw ValidationError("camera: fps must be positive");
    if (!(max_depth > 0.0)) throw ValidationError("camera: max_depth must be positive");
}

double CameraConfig::focal() const { return 0.5 * width / std::tan(0.5 * horizontal_fov); }

std::uint64_t CameraConfig::frame_time_us(std::uint64_t i) const {
    return static_cast<std::uint64_t>(std::llround(static_cast<double>(i) * 1e6 / fps));
}

std::pair<Frame, DepthMap> render(const World& world, const QuadState& pose, const CameraConfig& cam) {
    cam.validate();
    if (!world.bounds.contains(pose.position.xy())) warn_outside_bounds();

    const int W = cam.width;
    const int H = cam.height;
    const double f = cam.focal();
    const double cx = cam.cx();
    const double cy = cam.cy();
    const double cz = pose.position.z;
    const std::uint64_t t_us = static_cast<std::uint64_t>(std::llround(pose.t * 1e6));

    Frame frame{W, H, t_us, std::vector<float>(static_cast<std::size_t>(W) * H)};
    DepthMap depth{W, H, t_us, std::vector<float>(static_cast<std::size_t>(W) * H)};

    std::vector<double> phases(world.trees.size());
    for (std::size_t i = 0; i < world.trees.size(); ++i) phases[i] = bark_phase(world.trees[i]);

    std::vector<double> row_dz(static_cast<std::size_t>(H));
    for (int v = 0; v < H; ++v) row_dz[static_cast<std::size_t>(v)] = -((v + 0.5) - cy) / f;

    std::vector<ColumnHit> hits;
    for (int u = 0; u < W; ++u) {
        const double s = -((u + 0.5) - cx) / f;  // lateral slope, +y is image left
        const double a = 1.0 + s * s;

        hits.clear();
        for (std::size_t i = 0; i < world.trees.size(); ++i) {
            const Tree& tree = world.trees[i];
            const double ox = pose.position.x - tree.x;
            const double oy = pose.position.y - tree.y;
            const double b = ox + s * oy;
            const double c = ox * ox + oy * oy - tree.radius * tree.radius;
            if (c <= 0.0) continue;  // camera inside the trunk
            const double disc = b * b - a * c;
            if (disc < 0.0) continue;
            const double t = (-b - std::sqrt(disc)) / a;
            if (t <= 0.0) continue;
            hits.push_back({t, (ox + t) / tree.radius, (oy + t * s) / tree.radius, i});
        }
        std::sort(hits.begin(), hits.end(), [](const ColumnHit& l, const ColumnHit& r) {
            return l.t < r.t || (l.t == r.t && l.tree < r.tree);
        });

        for (int v = 0; v < H; ++v) {
            const double dz = row_dz[static_cast<std::size_t>(v)];
            const double dlen = std::sqrt(a + dz * dz);
            double dist = 0.0;
            double value = 0.0;
            bool resolved = false;
            for (const ColumnHit& h : hits) {
                const double z = cz + h.t * dz;
                if (z < 0.0) break;  // ground is nearer
                if (z > kTreeHeight) continue;
                const Tree& tree = world.trees[h.tree];
                const double phi = std::abs(std::atan2(h.ny, h.nx));
                const double stripe =
                    1.0 - 0.5 * kBarkContrast * (1.0 - std::cos(kBarkStripes * phi + phases[h.tree]));
                const double shade = kAmbient + (1.0 - kAmbient) * std::max(0.0, h.nx * kLightX);
                value = tree.albedo * stripe * shade;
                dist = h.t * dlen;
                resolved = true;
                break;
            }
            if (!resolved) {
                if (dz < 0.0) {
                    const double t = cz / -dz;
                    const double gx = pose.position.x + t;
                    const double gy = pose.position.y + t * s;
                    const double shade = kAmbient + (1.0 - kAmbient) * kLightZ;
                    value = (0.25 + 0.35 * ground_texture(gx, gy)) * shade;
                    dist = t * dlen;
                } else {
                    value = 0.7 + 0.25 * (dz / dlen);
                    dist = cam.max_depth;
                }
            }
            const std::size_t idx = static_cast<std::size_t>(v) * W + u;
            frame.intensity[idx] = static_cast<float>(std::clamp(value, 0.0, 1.0));
            depth.depth[idx] = static_cast<float>(std::clamp(dist, 1e-4, cam.max_depth));
        }
    }
    return {std::move(frame), std::move(depth)};
}

std::optional<PixelCoord> project_point(Vec3 p, const QuadState& pose, const CameraConfig& cam) {
    const Vec3 r = p - pose.position;
    if (!(r.x > 0.0)) return std::nullopt;
    const double f = cam.focal();
    const PixelCoord px{cam.cx() - f * r.y / r.x, cam.cy() - f * r.z / r.x};
    if (px.u < 0.0 || px.u >= cam.width || px.v < 0.0 || px.v >= cam.height) return std::nullopt;
    return px;
}

}  // namespace evavoid
