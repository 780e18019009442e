#pragma once
// Manipulator kinematics for the arm on each mobile base.
//
// Chain: joints 1 and 2 share the shoulder point, link l2 ends at the elbow
// (m3), link l3 ends at the wrist point where joints 4..6 intersect. The grasp
// point is the wrist point. Elbow-up branch: theta3 in [0, pi].

#include "mmt/geometry.hpp"
#include "mmt/payload_planner.hpp"

#include <array>
#include <cstddef>
#include <vector>

namespace mmt::kin {

using geom::Vec2;
using geom::Vec3;

struct ManipulatorParams {
    double l2{1.316};
    double l3{1.484};
    double base_mount_height{0.3};  // m, shoulder above the base plane
    double base_yaw{0.0};           // rad, heading of the (non-rotating) base
};

void validate(const ManipulatorParams& p);

struct JointAngles {
    std::array<double, 6> theta{};
};

struct MobilitySpec {
    int lambda{6};
    int links_per_arm{5};
    int joints_per_arm{6};
    int dof_per_joint{1};
    int K{1};
};

/// Mobility of K arms holding one payload on a common ground.
[[nodiscard]] int grubler_dof(const MobilitySpec& spec);

/// Per-arm condition for full payload mobility: lambda (l_k - j_k) + dof_k >= 0.
[[nodiscard]] bool payload_mobility_sufficient(const MobilitySpec& spec);

[[nodiscard]] inline Vec3 shoulder(const Vec2& base, const ManipulatorParams& p) {
    return {base.x(), base.y(), p.base_mount_height};
}

struct IkSolution {
    JointAngles angles;
    bool singular{false};  // at the outer reach boundary
};

/// Throws UnreachableError if the grasp is outside the two-link workspace.
[[nodiscard]] IkSolution inverse_kinematics(const Vec3& grasp, const Vec2& base, const payload::PayloadState& payload,
                                            const ManipulatorParams& p);

/// m1..m6; m1 = m2 at the shoulder, m3 elbow, m4 = m5 = m6 wrist.
[[nodiscard]] std::array<Vec3, 6> forward_kinematics(const JointAngles& q, const Vec2& base,
                                                     const ManipulatorParams& p);

/// World grasp points of the payload at `state`.
[[nodiscard]] std::vector<Vec3> assign_grasps(const payload::PayloadModel& model, const payload::PayloadState& state,
                                              std::size_t K);

/// Largest absolute joint rate between two configurations, with wrapped differences.
[[nodiscard]] double max_joint_rate(const JointAngles& a, const JointAngles& b, double dt);

}  // namespace mmt::kin
