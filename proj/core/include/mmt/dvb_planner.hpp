#pragma once
// Receding-horizon planner for the deformable virtual bounding box (DVB).
//
// Box center dynamics x(n+1) = x(n) + dt (u(n) + f(n)) with the field input
// f(n) treated as a known disturbance. The QP is condensed over u only:
// X = x0 + S (U + F), min U'Wu U + (X - G)'Wx (X - G).

#include "mmt/fields.hpp"
#include "mmt/geometry.hpp"
#include "mmt/qp.hpp"

#include <cstddef>
#include <optional>
#include <vector>

namespace mmt::dvb {

using geom::Vec2;

struct DvbState {
    Vec2 center{Vec2::Zero()};
    double yaw{0.0};
    double width{3.0};
    double length{3.0};
    double r{0.5 * std::hypot(3.0, 3.0)};

    [[nodiscard]] geom::OrientedRect rect() const { return {center, yaw, 0.5 * length, 0.5 * width}; }
};

/// Which side of the target the goal sits on.
/// beyond_target evaluates the goal formula literally (far side along the approach ray);
/// toward_box mirrors it so the box stops short of the target.
enum class GoalSide { beyond_target, toward_box };

struct DvbPlannerConfig {
    std::size_t H{12};
    double dt{0.1};
    Vec2 omega_u{1.0, 1.0};   // diagonal control weight
    Vec2 omega_x{10.0, 10.0};  // diagonal position weight
    Vec2 u_min{-2.0, -2.0};
    Vec2 u_max{2.0, 2.0};
    Vec2 x_min{-30.0, -30.0};
    Vec2 x_max{30.0, 30.0};
    double d_des{5.0};
    GoalSide goal_side{GoalSide::beyond_target};
    double pos_gain{10.0};     // 1/s
    double yaw_gain{2.0};      // 1/s
    double yaw_rate_max{1.0};  // rad/s
    double max_speed{5.0};     // m/s, rate limit of the pose tracker
    qp::QpSettings qp{};
};

void validate(const DvbPlannerConfig& cfg);

struct DvbPlan {
    std::vector<DvbState> states;        // H + 1
    std::vector<Vec2> controls;          // H
    std::vector<Vec2> external_inputs;   // H
    Vec2 goal{Vec2::Zero()};
    qp::QpStatus status{qp::QpStatus::solved};
    bool fallback{false};  // zero controls were used after a QP failure
    int iterations{0};
    double solve_time{0.0};
};

/// State carried between ticks: previous plan (fields are evaluated on it,
/// shifted), previous external inputs for smoothing, and the QP warm start.
struct DvbMemory {
    std::optional<DvbPlan> prev_plan;
    fields::Plan2 prev_f;
    std::optional<qp::QpSolution> warm;
};

struct PlanResult {
    DvbPlan plan;
    DvbMemory memory;
};

/// Throws GeometryError if box_center coincides with the target.
[[nodiscard]] Vec2 desired_position(const Vec2& target, const Vec2& box_center, double d_des,
                                    GoalSide side = GoalSide::beyond_target);

[[nodiscard]] qp::QpProblem assemble_qp(const DvbState& state, const Vec2& goal, const fields::Plan2& f_ext,
                                        const DvbPlannerConfig& cfg);

/// Box positions and scales the fields are evaluated on: the previous plan
/// shifted by one tick with step 0 replaced by the current state, or the
/// current state held over the horizon when there is no previous plan.
struct FieldHorizon {
    fields::Plan2 positions;
    std::vector<double> r;
};
[[nodiscard]] FieldHorizon field_horizon(const DvbState& state, const DvbMemory& memory, std::size_t H);

/// Field input per horizon step: dynamic obstacles predicted at constant velocity,
/// static obstacles plus the target as a static obstacle, approach-angle force.
[[nodiscard]] fields::Plan2 external_inputs(const DvbState& state, const Vec2& target,
                                            const std::vector<fields::ObstacleState>& obstacles,
                                            const DvbMemory& memory, const DvbPlannerConfig& cfg,
                                            const fields::FieldConfig& fcfg);

[[nodiscard]] PlanResult plan(const DvbState& state, const Vec2& target,
                              const std::vector<fields::ObstacleState>& obstacles, const DvbMemory& memory,
                              const DvbPlannerConfig& cfg, const fields::FieldConfig& fcfg);

/// Proportional, rate-limited move of the box toward plan step 1 and of the yaw
/// toward the target bearing; width and scale taken from plan step 1.
[[nodiscard]] DvbState track_pose(const DvbState& state, const DvbPlan& plan, const Vec2& target,
                                  const DvbPlannerConfig& cfg, double dt);

/// Yaw setpoint: bearing of the box about the target. Holds `fallback` if coincident.
[[nodiscard]] double yaw_setpoint(const Vec2& target, const Vec2& box_center, double fallback);

}  // namespace mmt::dvb
