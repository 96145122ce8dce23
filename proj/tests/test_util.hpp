#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "evavoid/events.hpp"
#include "evavoid/learner.hpp"
#include "evavoid/world.hpp"

namespace evavoid::testing {

// Literal per-pixel threshold-crossing loop: step the reference one threshold
// at a time until the remaining difference is below it.
struct ReferenceAccumulator {
    std::vector<double> ref;
    double c_pos, c_neg;

    ReferenceAccumulator(std::vector<double> init, double cp, double cn) : ref(std::move(init)), c_pos(cp), c_neg(cn) {}

    std::vector<Event> step(const std::vector<double>& next, int width, std::uint64_t t0, std::uint64_t t1) {
        std::vector<Event> out;
        const std::uint64_t dt = t1 - t0;
        for (std::size_t i = 0; i < ref.size(); ++i) {
            std::int64_t n = 0;
            std::int8_t p = 0;
            // Count by repeated subtraction against the exact difference.
            const double d = next[i] - ref[i];
            if (d > 0) {
                p = 1;
                while (static_cast<double>(n + 1) * c_pos <= d) ++n;
            } else if (d < 0) {
                p = -1;
                while (static_cast<double>(n + 1) * c_neg <= -d) ++n;
            }
            ref[i] += static_cast<double>(n) * (p > 0 ? c_pos : -c_neg);
            for (std::int64_t k = 1; k <= n; ++k) {
                std::uint64_t t = t0 + (static_cast<std::uint64_t>(k) * dt + static_cast<std::uint64_t>(n) - 1) /
                                           static_cast<std::uint64_t>(n);
                if (t == t0) t = t0 + 1;
                out.push_back({t, static_cast<std::uint16_t>(i % width), static_cast<std::uint16_t>(i / width), p});
            }
        }
        return out;
    }
};

// Signed per-pixel tally of a batch, by map lookup.
// Distance from c to the infinite line through a and b.
inline double point_line_distance(Vec2 c, Vec2 a, Vec2 b) {
    const Vec2 d = b - a, r = c - a;
    return std::abs(d.x * r.y - d.y * r.x) / norm(d);
}

inline Bem brute_force_bem(const EventBatch& b) {
    std::map<std::pair<int, int>, int> tally;
    for (const Event& e : b.events) tally[{e.x, e.y}] += e.p;
    Bem out(b.width, b.height);
    for (int y = 0; y < b.height; ++y)
        for (int x = 0; x < b.width; ++x) {
            auto it = tally.find({x, y});
            out.mask[static_cast<std::size_t>(y) * b.width + x] = (it != tally.end() && it->second != 0) ? 1 : 0;
        }
    return out;
}

inline Bem random_bem(Rng& rng, int w, int h, double density = 0.3) {
    Bem b(w, h);
    for (auto& m : b.mask) m = rng.uniform() < density ? 1 : 0;
    return b;
}

// Blobs and edges, the kind of mask a BEM of a forest scene looks like.
inline Bem structured_bem(Rng& rng, int w, int h) {
    Bem b(w, h);
    const int blobs = 3 + static_cast<int>(rng.below(5));
    for (int k = 0; k < blobs; ++k) {
        const double cx = rng.uniform(0, w), cy = rng.uniform(0, h);
        const double rx = rng.uniform(2, w / 6.0), ry = rng.uniform(2, h / 3.0);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const double a = (x - cx) / rx, c = (y - cy) / ry;
                if (a * a + c * c <= 1.0) b.at(x, y) = 1;
            }
    }
    return b;
}

inline std::vector<Sample> random_sequence(Rng& rng, int size, int length) {
    std::vector<Sample> seq;
    for (int t = 0; t < length; ++t) {
        Sample s;
        s.bem = random_bem(rng, size, size, 0.25);
        s.depth_gt.resize(static_cast<std::size_t>(size) * size);
        for (auto& d : s.depth_gt) d = rng.uniform(1.0, 20.0);
        s.v_y = rng.uniform(-0.9, 0.9);
        seq.push_back(std::move(s));
    }
    return seq;
}

inline void perturb(ModelParams& p, Rng& rng, double scale) {
    for (auto& v : p.theta) v += rng.uniform(-scale, scale);
    for (auto& v : p.phi) v += rng.uniform(-scale, scale);
}

inline double& param_at(ModelParams& p, std::size_t i) {
    return i < p.theta.size() ? p.theta[i] : p.phi[i - p.theta.size()];
}

struct GradCheck {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
};

// Central differences on a subset of coordinates. Every tensor contributes
// at least a few coordinates; the rest are sampled uniformly.
inline GradCheck check_gradient(const DepthVelocityNet& net, const ModelParams& params, std::span<const Sample> seq,
                                TrainMode mode, LossWeights w, Rng& rng, std::size_t per_tensor, std::size_t extra,
                                double h = 1e-4) {
    ModelParams grad = params.zeros_like();
    net.backward(params, seq, mode, w, grad);

    std::vector<std::size_t> idx;
    for (const TensorSlot& s : params.layout) {
        const std::size_t base = s.part == ParamPart::theta ? s.offset : params.theta.size() + s.offset;
        for (std::size_t k = 0; k < std::min(per_tensor, s.size()); ++k) idx.push_back(base + rng.below(s.size()));
    }
    for (std::size_t k = 0; k < extra; ++k) idx.push_back(rng.below(params.count()));

    GradCheck gc;
    ModelParams p = params;
    for (std::size_t i : idx) {
        const double orig = param_at(p, i);
        param_at(p, i) = orig + h;
        const double fp = net.objective(p, seq, mode, w).total;
        param_at(p, i) = orig - h;
        const double fm = net.objective(p, seq, mode, w).total;
        param_at(p, i) = orig;
        const double numeric = (fp - fm) / (2 * h);
        const double analytic = param_at(grad, i);
        const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-5});
        gc.max_rel_error = std::max(gc.max_rel_error, std::abs(numeric - analytic) / denom);
        ++gc.checked;
    }
    return gc;
}

}  // namespace evavoid::testing
