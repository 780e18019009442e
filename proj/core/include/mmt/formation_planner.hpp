#pragma once
// Decentralized base planning: the planned boxes are split into one cell per
// robot, each cell is shrunk for the base radius and the arm's reach, and
// every robot solves its own tracking QP inside its cells.

#include "mmt/dvb_planner.hpp"
#include "mmt/geometry.hpp"
#include "mmt/kinematics.hpp"
#include "mmt/payload_planner.hpp"
#include "mmt/qp.hpp"

#include <cstddef>
#include <optional>
#include <vector>

namespace mmt::formation {

using geom::Vec2;
using geom::Vec3;

struct FormationConfig {
    std::size_t H_r{5};
    double dt{0.1};
    Vec2 omega_a{1.0, 1.0};
    Vec2 omega_x{10.0, 10.0};
    Vec2 u_min{-4.0, -4.0};
    Vec2 u_max{4.0, 4.0};
    Vec2 x_min{-30.0, -30.0};
    Vec2 x_max{30.0, 30.0};
    double robot_radius{0.2};
    double elbow_influence{0.0};   // m; 0 selects max(l2, l3)
    double reach_inner_frac{0.1};  // of l2 + l3, shoulder-to-grasp distance
    double reach_outer_frac{0.9};
    double soft_weight{1e3};       // quadratic penalty on region slack
    bool parallel{true};
    qp::QpSettings qp{};
};

void validate(const FormationConfig& cfg);

struct RegionAssignment {
    std::size_t k{0};
    std::vector<geom::OrientedRect> cells;    // H_r + 1, after all shrinking
    std::vector<geom::HalfplaneSet> regions;  // same cells as half-planes
    std::vector<Vec2> centers;                // x_ref
};

/// Cell k of the 2 x ceil(K/2) grid of `box`, in world coordinates, before shrinking.
[[nodiscard]] geom::OrientedRect grid_cell(const geom::OrientedRect& box, std::size_t K, std::size_t k);

/// Horizontal reach band [inner, outer] for a grasp `dz` above the shoulder.
struct ReachBand {
    double inner;
    double outer;
};
[[nodiscard]] ReachBand horizontal_reach(const kin::ManipulatorParams& arm, const FormationConfig& cfg, double dz);

/// Regions for steps 0..H_r from the box plan and the roll plan (rolls beyond
/// the last entry are held). Throws InfeasibleError on an empty cell.
[[nodiscard]] std::vector<RegionAssignment> partition_regions(const std::vector<dvb::DvbState>& boxes,
                                                              const std::vector<double>& rolls, std::size_t K,
                                                              const FormationConfig& cfg,
                                                              const kin::ManipulatorParams& arm,
                                                              const payload::PayloadModel& model);

[[nodiscard]] double elbow_influence(const FormationConfig& cfg, const kin::ManipulatorParams& arm);

/// Repulsion on robot k from the other robots' elbows, clamped to 0.5 ||u_max||.
[[nodiscard]] Vec2 elbow_repulsion(const std::vector<Vec3>& elbows, std::size_t k, const FormationConfig& cfg,
                                   double influence);

enum class RobotStatus { solved, soft, failed };

[[nodiscard]] const char* to_string(RobotStatus s) noexcept;

struct RobotPlan {
    std::vector<Vec2> states;    // H_r + 1
    std::vector<Vec2> controls;  // H_r
    Vec2 f{Vec2::Zero()};
    RobotStatus status{RobotStatus::solved};
    qp::QpStatus qp_status{qp::QpStatus::solved};
    int iterations{0};
    double solve_time{0.0};
    double max_slack{0.0};  // largest region slack used when soft
    std::optional<qp::QpSolution> solution;  // for warm starting
};

[[nodiscard]] qp::QpProblem assemble_robot_qp(const Vec2& x0, const RegionAssignment& a, const Vec2& f,
                                              const FormationConfig& cfg, bool soft);

/// Solves the hard QP; on failure retries with soft regions.
[[nodiscard]] RobotPlan plan_robot(const Vec2& x0, const RegionAssignment& a, const Vec2& f,
                                   const FormationConfig& cfg, const RobotPlan* previous = nullptr);

/// Elbow fields from `elbows`, then one plan per robot, concurrently when cfg.parallel.
[[nodiscard]] std::vector<RobotPlan> plan_formation(const std::vector<Vec2>& bases, const std::vector<Vec3>& elbows,
                                                    const std::vector<RegionAssignment>& regions,
                                                    const FormationConfig& cfg, double influence,
                                                    const std::vector<RobotPlan>* previous = nullptr);

}  // namespace mmt::formation
