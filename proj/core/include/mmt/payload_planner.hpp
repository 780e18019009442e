#pragma once
// Payload roll planning: choose roll and roll rate over a short horizon so the
// planar projection of the rolled cuboid stays inside each planned box.
//
// The payload center rides at (box center, h_P) with the box yaw, so only the
// roll is free. The containment constraints are trigonometric in the roll and
// are handled by an l1-penalty SQP with a trust region on the roll change.

#include "mmt/geometry.hpp"

#include <array>
#include <cstddef>
#include <numbers>
#include <vector>

namespace mmt::payload {

using geom::Vec2;
using geom::Vec3;

struct PayloadModel {
    double length{3.0};
    double width{3.0};
    double thickness{0.1};
    double h_P{1.45};                     // m, payload center above the box plane
    std::array<Vec3, 8> vertices{};       // body frame
    std::vector<Vec3> grasp_points_local;  // one per robot

    /// Cuboid with the default grasp layout for K robots, `inset` from the edges.
    /// Robot k sits in column k/2, row k%2 (row 0 on the -y edge). With odd K the
    /// last robot takes the end of the +x column.
    [[nodiscard]] static PayloadModel cuboid(double length, double width, double thickness, double h_P,
                                             std::size_t K, double inset = 0.05);
};

struct PayloadState {
    Vec3 center{Vec3::Zero()};
    double yaw{0.0};
    double roll{0.0};
    double omega{0.0};
};

struct PayloadPlanConfig {
    std::size_t H_p{5};
    double dt{0.1};
    double w1{1.0};
    double w2{0.5};
    double phi_min{0.0};
    double phi_max{2.0 * std::numbers::pi / 5.0};
    double omega_min{-1.0};
    double omega_max{1.0};
    int sqp_max_iter{30};
    double sqp_tol{1e-9};
    double trust_region{0.2};  // rad, per-iteration bound on the roll change
    double penalty{1e3};       // l1 weight on containment violation
};

/// Throws mmt::Error on unordered limits or non-positive weights.
void validate(const PayloadPlanConfig& cfg);

/// World pose of the payload for a given box footprint and roll.
[[nodiscard]] geom::RigidTransform3 payload_pose(const geom::OrientedRect& box, double h_P, double roll);

[[nodiscard]] std::array<Vec2, 8> projected_vertices(const PayloadModel& model, const PayloadState& state);

/// Slack b - n.v for every (vertex, row) pair, vertex-major.
[[nodiscard]] std::vector<double> containment_residuals(const std::array<Vec2, 8>& vertices,
                                                        const geom::HalfplaneSet& region);

/// Smallest containment slack for the payload rolled by `roll` inside `box`.
[[nodiscard]] double min_containment_slack(const PayloadModel& model, const geom::OrientedRect& box, double roll);

enum class RollStatus { converged, max_iter, infeasible };

[[nodiscard]] const char* to_string(RollStatus s) noexcept;

struct RollPlan {
    std::vector<double> phi;    // H_p + 1 values, phi[0] is the current roll
    std::vector<double> omega;  // H_p values
    RollStatus status{RollStatus::converged};
    int iterations{0};
    double min_residual{0.0};          // smallest containment slack over the horizon
    std::vector<double> merit_trace;   // merit after each accepted iterate, starting point first
    std::vector<double> objective_trace;
};

/// Plans roll over boxes[1..H_p]; boxes[0] is the current footprint and is not
/// constrained. `warm`, if given, is the previous tick's plan and is shifted by
/// one step to seed the iteration.
[[nodiscard]] RollPlan plan_roll(const PayloadModel& model, const PayloadState& current,
                                 const std::vector<geom::OrientedRect>& boxes, const PayloadPlanConfig& cfg,
                                 const RollPlan* warm = nullptr);

}  // namespace mmt::payload
