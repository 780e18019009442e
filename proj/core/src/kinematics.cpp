#include "mmt/kinematics.hpp"

#include "mmt/error.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <string>

namespace mmt::kin {

namespace {

constexpr double kReachTol = 1e-12;

// Signed angle about unit axis `a` taking the projection of `from` to that of `to`.
double angle_about_axis(const Vec3& a, const Vec3& from, const Vec3& to) {
    const Vec3 f = from - from.dot(a) * a;
    const Vec3 t = to - to.dot(a) * a;
    if (f.norm() < 1e-12 || t.norm() < 1e-12) return 0.0;
    return std::atan2(a.dot(f.cross(t)), f.dot(t));
}

}  // namespace

void validate(const ManipulatorParams& p) {
    if (!(p.l2 > 0 && p.l3 > 0)) throw Error("manipulator: link lengths must be positive");
    if (!std::isfinite(p.base_mount_height) || !std::isfinite(p.base_yaw)) throw Error("manipulator: non-finite mount");
}

int grubler_dof(const MobilitySpec& s) {
    const int links = s.links_per_arm * s.K + 2;
    const int joints = s.joints_per_arm * s.K;
    return s.lambda * (links - 1 - joints) + s.K * s.joints_per_arm * s.dof_per_joint;
}

bool payload_mobility_sufficient(const MobilitySpec& s) {
    return s.lambda * (s.links_per_arm - s.joints_per_arm) + s.joints_per_arm * s.dof_per_joint >= 0;
}

IkSolution inverse_kinematics(const Vec3& grasp, const Vec2& base, const payload::PayloadState& payload,
                              const ManipulatorParams& p) {
    const Vec3 s = shoulder(base, p);
    const Vec3 d = grasp - s;
    const double r = std::hypot(d.x(), d.y());
    const double z = d.z();
    const double c3 = (r * r + z * z - p.l2 * p.l2 - p.l3 * p.l3) / (2.0 * p.l2 * p.l3);
    if (std::abs(c3) > 1.0 + kReachTol) {
        throw UnreachableError("grasp at distance " + std::to_string(d.norm()) + " m outside reach [" +
                               std::to_string(std::abs(p.l2 - p.l3)) + ", " + std::to_string(p.l2 + p.l3) + "]");
    }
    IkSolution out;
    auto& th = out.angles.theta;
    const double heading = r > 0.0 ? std::atan2(d.y(), d.x()) : p.base_yaw;
    th[0] = geom::normalize_angle(heading - p.base_yaw);
    th[2] = std::acos(std::clamp(c3, -1.0, 1.0));
    th[1] = std::atan2(z, r) - std::atan2(p.l3 * std::sin(th[2]), p.l2 + p.l3 * std::cos(th[2]));
    out.singular = c3 >= 1.0 - kReachTol;

    // Wrist: spherical angles of the grasp-to-center vector, then the spin that
    // brings world z onto the payload normal about that vector.
    const Vec3 v = payload.center - grasp;
    const double vn = v.norm();
    if (vn > 1e-12) {
        th[3] = std::atan2(v.y(), v.x());
        th[4] = std::atan2(std::hypot(v.x(), v.y()), v.z());
        const Vec3 axis = v / vn;
        const Vec3 normal = geom::RigidTransform3::from_yaw_roll(payload.yaw, payload.roll, Vec3::Zero()).apply(Vec3::UnitZ());
        const Vec3 ref = std::abs(axis.z()) > 0.999 ? Vec3::UnitX() : Vec3::UnitZ();
        th[5] = angle_about_axis(axis, ref, normal);
    }
    return out;
}

std::array<Vec3, 6> forward_kinematics(const JointAngles& q, const Vec2& base, const ManipulatorParams& p) {
    const auto& th = q.theta;
    const Vec3 s = shoulder(base, p);
    const double yaw = th[0] + p.base_yaw;
    const Vec3 dir{std::cos(yaw), std::sin(yaw), 0.0};
    const Vec3 up = Vec3::UnitZ();
    const Vec3 elbow = s + p.l2 * (std::cos(th[1]) * dir + std::sin(th[1]) * up);
    const Vec3 wrist = elbow + p.l3 * (std::cos(th[1] + th[2]) * dir + std::sin(th[1] + th[2]) * up);
    return {s, s, elbow, wrist, wrist, wrist};
}

std::vector<Vec3> assign_grasps(const payload::PayloadModel& model, const payload::PayloadState& state, std::size_t K) {
    if (model.grasp_points_local.size() != K) {
        throw Error("payload has " + std::to_string(model.grasp_points_local.size()) + " grasps for " +
                    std::to_string(K) + " robots");
    }
    const auto T = geom::RigidTransform3::from_yaw_roll(state.yaw, state.roll, state.center);
    std::vector<Vec3> out;
    out.reserve(K);
    for (const auto& g : model.grasp_points_local) out.push_back(geom::transform_point(T, g));
    return out;
}

double max_joint_rate(const JointAngles& a, const JointAngles& b, double dt) {
    double best = 0.0;
    for (std::size_t i = 0; i < 6; ++i) best = std::max(best, std::abs(geom::angle_diff(b.theta[i], a.theta[i])) / dt);
    return best;
}

}  // namespace mmt::kin
