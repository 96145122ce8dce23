#include "evavoid/control.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iostream>

namespace evavoid {

void ExpertConfig::validate() const {
    if (!(horizon > 0.0)) throw ValidationError("expert: horizon must be positive");
    if (!(query_spacing > 0.0)) throw ValidationError("expert: query_spacing must be positive");
    if (!(query_half_width >= 0.0)) throw ValidationError("expert: query_half_width must be >= 0");
    if (!(replan_hz > 0.0)) throw ValidationError("expert: replan_hz must be positive");
    if (!(sense_radius >= 0.0)) throw ValidationError("expert: sense_radius must be >= 0");
    inflate.validate();
}

int ExpertConfig::half_count() const {
    return static_cast<int>(std::floor(query_half_width / query_spacing + 1e-9));
}

ExpertDecision expert_waypoint(const World& world, const QuadState& state, const ExpertConfig& cfg) {
    const Vec2 origin = state.position.xy();
    const std::vector<Tree> nearby = obstacles_within(world, origin, cfg.sense_radius);
    const int K = cfg.half_count();

    ExpertDecision out;
    out.free_flags.resize(static_cast<std::size_t>(2 * K + 1));
    std::vector<double> clearance(out.free_flags.size());
    for (int k = -K; k <= K; ++k) {
        const Vec2 q{origin.x + cfg.horizon, origin.y + k * cfg.query_spacing};
        const auto idx = static_cast<std::size_t>(k + K);
        clearance[idx] = segment_clearance(nearby, origin, q, cfg.inflate);
        out.free_flags[idx] = clearance[idx] > 0.0;
    }

    // Nearest free point to the line center; +k wins ties.
    for (int m = 0; m <= K; ++m) {
        for (int k : {m, -m}) {
            if (out.free_flags[static_cast<std::size_t>(k + K)]) {
                out.chosen_k = k;
                out.waypoint = {origin.x + cfg.horizon, origin.y + k * cfg.query_spacing};
                return out;
            }
        }
    }

    // All blocked: maximize clearance, same center-out tie order.
    out.any_free = false;
    double best = -std::numeric_limits<double>::infinity();
    for (int m = 0; m <= K; ++m) {
        for (int k : {m, -m}) {
            const double c = clearance[static_cast<std::size_t>(k + K)];
            if (c > best) {
                best = c;
                out.chosen_k = k;
            }
        }
    }
    out.waypoint = {origin.x + cfg.horizon, origin.y + out.chosen_k * cfg.query_spacing};
    return out;
}

VelocityCommand command_from_waypoint(const QuadState& state, Vec2 waypoint, double speed) {
    const double dx = waypoint.x - state.position.x;
    const double dy = waypoint.y - state.position.y;
    if (!(dx > 0.0)) throw ContractViolation("command_from_waypoint: waypoint is not ahead of the vehicle");
    if (!(speed > 0.0)) throw ValidationError("command_from_waypoint: speed must be positive");
    const double n = std::hypot(dx, dy);
    return {dy / n, dx / n, speed};
}

VelocityCommand decompose_v_y(double v_y_unit, double speed) {
    if (!(speed > 0.0)) throw ValidationError("decompose_v_y: speed must be positive");
    if (!std::isfinite(v_y_unit)) throw ValidationError("decompose_v_y: non-finite v_y");
    if (std::abs(v_y_unit) > 1.0) {
        std::cerr << "warning: v_y_unit " << v_y_unit << " clamped to [-1, 1]\n";
        v_y_unit = std::clamp(v_y_unit, -1.0, 1.0);
    }
    return {v_y_unit, std::sqrt(1.0 - v_y_unit * v_y_unit), speed};
}

QuadState step_dynamics(const QuadState& state, const VelocityCommand& cmd, double dt, double tau) {
    if (!(dt > 0.0) || !(tau > 0.0)) throw ValidationError("step_dynamics: dt and tau must be positive");
    const Vec3 target = cmd.velocity();
    const double a = dt / tau;
    QuadState next = state;
    next.velocity.x += a * (target.x - state.velocity.x);
    next.velocity.y += a * (target.y - state.velocity.y);
    next.velocity.z = 0.0;
    next.position.x += dt * next.velocity.x;
    next.position.y += dt * next.velocity.y;
    next.t = state.t + dt;
    return next;
}

}  // namespace evavoid
