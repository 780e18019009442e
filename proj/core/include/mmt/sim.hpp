#pragma once
// Tick-level simulator. Each tick: plan the box, track it, plan the roll,
// partition the boxes into robot regions, plan every base, move the bases,
// solve IK, advance the obstacles and the target, validate, log.

#include "mmt/dvb_planner.hpp"
#include "mmt/fields.hpp"
#include "mmt/formation_planner.hpp"
#include "mmt/kinematics.hpp"
#include "mmt/payload_planner.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace mmt::sim {

using geom::Vec2;
using geom::Vec3;

/// Constant-speed waypoint follower with optional Gaussian heading noise.
struct MotionScript {
    std::vector<Vec2> waypoints;
    double speed{0.0};           // m/s
    bool loop{false};
    double heading_noise{0.0};   // rad, standard deviation per tick
};

struct DynamicObstacleSpec {
    std::size_t id{0};
    Vec2 start{Vec2::Zero()};
    double radius{0.3};
    MotionScript script;
};

struct ValidationConfig {
    double containment_tol{1e-4};  // m
    double clearance_slack{0.05};  // fraction of r
    double joint_rate_max{1.1};    // rad/s
    double region_tol{1e-4};       // m
};

/// Field defaults for the default payload: the width floor clears the payload
/// projection at the largest roll.
[[nodiscard]] inline fields::FieldConfig default_fields() {
    fields::FieldConfig f;
    f.width_min = 1.04;
    return f;
}

struct Scenario {
    std::string name{"unnamed"};
    Vec2 arena_min{-30.0, -30.0};
    Vec2 arena_max{30.0, 30.0};
    double dt{0.1};
    double duration{0.0};
    std::uint64_t seed{1};

    std::size_t K{6};
    payload::PayloadModel payload{payload::PayloadModel::cuboid(3.0, 3.0, 0.1, 1.45, 6)};
    double grasp_inset{0.05};  // m, used when the payload model is rebuilt from a file
    kin::ManipulatorParams arm{};

    dvb::DvbPlannerConfig dvb{};
    payload::PayloadPlanConfig roll{};
    formation::FormationConfig formation{};
    fields::FieldConfig fields{default_fields()};
    ValidationConfig validation{};

    Vec2 box_start{Vec2::Zero()};
    double box_width{0.0};  // 0 selects the widest box allowed by r_max

    std::vector<fields::ObstacleState> static_obstacles;
    std::vector<DynamicObstacleSpec> dynamic_obstacles;
    Vec2 target_start{10.0, 0.0};
    MotionScript target_script;
};

/// Cross-field checks; returns every finding (empty when valid).
[[nodiscard]] std::vector<std::string> check_scenario(const Scenario& s);

struct ScriptCursor {
    std::size_t next{0};
    bool finished{false};
};

struct WorldState {
    std::size_t tick{0};
    double t{0.0};
    dvb::DvbState box;
    payload::PayloadState payload;
    std::vector<Vec2> bases;
    std::vector<kin::JointAngles> joints;
    std::vector<Vec3> elbows;
    std::vector<Vec2> applied_u;  // last applied base controls
    std::vector<Vec2> applied_f;  // last applied elbow fields
    std::vector<fields::ObstacleState> obstacles;  // static first, then dynamic
    std::vector<ScriptCursor> obstacle_cursors;    // one per dynamic obstacle
    Vec2 target{Vec2::Zero()};
    ScriptCursor target_cursor;

    dvb::DvbMemory dvb_memory;
    payload::RollPlan roll_plan;
    bool has_roll_plan{false};
    std::vector<formation::RobotPlan> robot_plans;
    std::vector<formation::RegionAssignment> regions;
    std::mt19937_64 rng;
};

enum class ViolationKind { containment, separation, clearance, scale, joint_rate, region, unreachable, planner };

[[nodiscard]] const char* to_string(ViolationKind k) noexcept;

struct Violation {
    ViolationKind kind;
    double measured{0.0};  // the offending value (penetration, rate, distance...)
    std::string detail;
};

struct StageTimes {
    double dvb{0.0};
    double roll{0.0};
    double robots{0.0};
    [[nodiscard]] double total() const noexcept { return dvb + roll + robots; }
};

struct TickRecord {
    std::size_t tick{0};
    double t{0.0};
    dvb::DvbState box;
    double phi{0.0};
    double omega{0.0};
    std::vector<Vec2> bases;
    std::vector<Vec2> u;
    std::vector<Vec2> f;
    std::vector<kin::JointAngles> joints;
    std::vector<Vec2> obstacles;
    Vec2 target{Vec2::Zero()};
    double clearance_min{0.0};  // min over obstacles of surface distance minus r
    double clearance_ratio{0.0};  // min over obstacles of surface distance over r
    double min_base_separation{0.0};
    double containment_min{0.0};  // smallest containment slack of the applied payload
    double max_joint_rate{0.0};
    bool fields_active{false};    // any obstacle field (not the target) nonzero this tick
    std::string dvb_status{"init"};
    std::string roll_status{"init"};
    std::string robot_status{"init"};
    std::vector<Violation> violations;
    StageTimes times;
    std::vector<dvb::DvbState> horizon;  // DVB plan states, for plotting
};

struct Summary {
    std::size_t ticks{0};
    double min_clearance{0.0};
    double min_clearance_ratio{0.0};
    double min_base_separation{0.0};
    double min_containment{0.0};
    double max_joint_rate{0.0};
    double r_lo{0.0};
    double r_hi{0.0};
    std::size_t dvb_fallbacks{0};
    std::size_t roll_infeasible{0};
    std::size_t robot_soft{0};
    std::size_t robot_failed{0};
    std::size_t violations{0};
    std::vector<std::pair<std::string, std::size_t>> violations_by_kind;
    StageTimes mean_times;
    StageTimes p95_times;
    double mean_total_time{0.0};
};

struct SimLog {
    std::string scenario;
    std::uint64_t seed{0};
    double dt{0.1};
    std::size_t K{0};
    std::size_t obstacle_count{0};
    std::vector<TickRecord> records;
    Summary summary;
};

/// World at t = 0: box at its start pose facing the target, payload at the
/// smallest roll that fits, bases at their region centers, IK solved.
[[nodiscard]] WorldState initial_world(const Scenario& s);

/// Advances the world by one tick and fills `record` for the new state.
[[nodiscard]] WorldState step(const WorldState& world, const Scenario& s, TickRecord& record);

/// Checks a world against the safety properties. `previous` supplies joint
/// rates; pass nullptr to skip that check.
[[nodiscard]] std::vector<Violation> validate(const WorldState& world, const Scenario& s,
                                              const WorldState* previous);

[[nodiscard]] TickRecord record_of(const WorldState& world, const Scenario& s);

[[nodiscard]] Summary summarize(const std::vector<TickRecord>& records);

/// Runs duration / dt ticks after the initial record. Throws ScenarioError on invalid scenarios.
[[nodiscard]] SimLog run(const Scenario& s);

/// Advances a script cursor by one tick; returns the new position.
[[nodiscard]] Vec2 advance_script(const Vec2& p, const MotionScript& script, ScriptCursor& cursor, double dt,
                                  std::mt19937_64& rng);

}  // namespace mmt::sim
