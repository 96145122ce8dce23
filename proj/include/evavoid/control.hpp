#pragma once

#include <vector>

#include "evavoid/common.hpp"
#include "evavoid/world.hpp"

namespace evavoid {

// Planar quadrotor state; the z coordinate is the fixed flight altitude.
struct QuadState {
    Vec3 position{0.0, 0.0, 1.5};
    Vec3 velocity{};
    double t = 0.0;
};

// Unit-norm planar direction (forward, lateral) scaled by a desired speed.
struct VelocityCommand {
    double v_y_unit = 0.0;
    double v_x_unit = 1.0;
    double speed = 1.0;

    Vec3 velocity() const { return {speed * v_x_unit, speed * v_y_unit, 0.0}; }
};

struct ExpertConfig {
    double horizon = 10.0;
    double query_half_width = 5.0;
    double query_spacing = 0.5;
    double replan_hz = 5.0;
    double sense_radius = 10.0;
    InflationConfig inflate{};

    void validate() const;
    // Query offsets are k * spacing for k in [-K, K].
    int half_count() const;
};

struct ExpertDecision {
    Vec2 waypoint;
    int chosen_k = 0;
    bool any_free = true;
    // One flag per query point, ordered k = -K .. K.
    std::vector<bool> free_flags;
};

ExpertDecision expert_waypoint(const World& world, const QuadState& state, const ExpertConfig& cfg);

// Normalized direction toward the waypoint; throws ContractViolation if the
// waypoint is not strictly ahead.
VelocityCommand command_from_waypoint(const QuadState& state, Vec2 waypoint, double speed);

// Forward component from the unit-norm constraint. |v_y_unit| > 1 is clamped
// with a warning on stderr.
VelocityCommand decompose_v_y(double v_y_unit, double speed);

// First-order velocity response followed by explicit position update.
QuadState step_dynamics(const QuadState& state, const VelocityCommand& cmd, double dt, double tau);

}  // namespace evavoid
