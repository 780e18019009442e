#include "mmt/error.hpp"
#include "mmt/kinematics.hpp"

#include <doctest.h>

#include <random>

using namespace mmt::kin;
using mmt::geom::kPi;
using mmt::payload::PayloadModel;
using mmt::payload::PayloadState;

TEST_CASE("grubler mobility") {
    for (int K = 1; K <= 10; ++K) CHECK(grubler_dof({6, 5, 6, 1, K}) == 6);
    CHECK(payload_mobility_sufficient({6, 5, 6, 1, 4}));
    const MobilitySpec five{6, 4, 5, 1, 4};
    CHECK(6 * (5 - 1 - 5) + 5 == -1);
    CHECK_FALSE(payload_mobility_sufficient(five));
}

TEST_CASE("forward kinematics examples") {
    const ManipulatorParams p;
    JointAngles q;
    auto m = forward_kinematics(q, {0, 0}, p);
    CHECK(m[0].isApprox(m[1]));
    CHECK((m[2] - Vec3{p.l2, 0, p.base_mount_height}).norm() < 1e-12);
    CHECK((m[3] - Vec3{p.l2 + p.l3, 0, p.base_mount_height}).norm() < 1e-12);
    CHECK(m[3] == m[5]);

    q.theta[0] = kPi / 2;
    m = forward_kinematics(q, {0, 0}, p);
    CHECK((m[3] - Vec3{0, p.l2 + p.l3, p.base_mount_height}).norm() < 1e-12);

    q = JointAngles{};
    q.theta[1] = kPi / 2;
    m = forward_kinematics(q, {1, 2}, p);
    CHECK((m[3] - Vec3{1, 2, p.base_mount_height + p.l2 + p.l3}).norm() < 1e-12);
}

TEST_CASE("inverse kinematics examples") {
    const ManipulatorParams p;
    const PayloadState pay{{5, 5, 1.5}, 0, 0, 0};

    auto ik = inverse_kinematics({p.l2 + p.l3, 0, p.base_mount_height}, {0, 0}, pay, p);
    CHECK(ik.angles.theta[2] == doctest::Approx(0.0));
    CHECK(ik.angles.theta[1] == doctest::Approx(0.0));
    CHECK(ik.singular);

    ik = inverse_kinematics({0, 0, p.base_mount_height + std::hypot(p.l2, p.l3)}, {0, 0}, pay, p);
    CHECK(ik.angles.theta[2] == doctest::Approx(kPi / 2));
    CHECK_FALSE(ik.singular);

    CHECK_THROWS_AS((void)inverse_kinematics({4, 0, 0.3}, {0, 0}, pay, p), mmt::UnreachableError);
    CHECK_THROWS_AS((void)inverse_kinematics({0.1, 0, 0.3}, {0, 0}, pay, p), mmt::UnreachableError);
}

TEST_CASE("wrist angles follow the payload") {
    const ManipulatorParams p;
    const PayloadState pay{{0, 0, 1.45}, 0, 0, 0};
    // Grasp on the -y edge: center lies along +y, horizontal.
    const auto ik = inverse_kinematics({0, -1.45, 1.45}, {0, -3}, pay, p);
    CHECK(ik.angles.theta[3] == doctest::Approx(kPi / 2));
    CHECK(ik.angles.theta[4] == doctest::Approx(kPi / 2));
    CHECK(std::abs(ik.angles.theta[5]) < 1e-12);

    const PayloadState rolled{{0, 0, 1.45}, 0, 0.3, 0};
    const auto g = assign_grasps(PayloadModel::cuboid(3, 3, 0.1, 1.45, 2), rolled, 2)[0];
    const auto ik2 = inverse_kinematics(g, {0, -3}, rolled, p);
    CHECK(std::abs(ik2.angles.theta[5]) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(ik2.angles.theta[4] == doctest::Approx(kPi / 2 - 0.3));
}

TEST_CASE("FK of IK returns the grasp") {
    const ManipulatorParams p;
    const PayloadState pay{{0, 0, 1.45}, 0, 0, 0};
    std::mt19937_64 rng(2024);
    const double L = p.l2 + p.l3;
    std::uniform_real_distribution<double> rad(std::abs(p.l2 - p.l3) + 0.05, L - 0.01), dz(-0.5, 0.5),
        ang(-kPi, kPi), pos(-20, 20);
    int done = 0;
    while (done < 1000) {
        const double dzv = dz(rng);
        const double dist = rad(rng);
        if (dist <= std::abs(dzv) + 1e-3) continue;
        const double r = std::sqrt(dist * dist - dzv * dzv);
        const Vec2 base{pos(rng), pos(rng)};
        const double a = ang(rng);
        const Vec3 g{base.x() + r * std::cos(a), base.y() + r * std::sin(a), p.base_mount_height + dzv};
        const auto ik = inverse_kinematics(g, base, pay, p);
        REQUIRE(ik.angles.theta[2] >= 0.0);
        REQUIRE(ik.angles.theta[2] <= kPi);
        const auto m = forward_kinematics(ik.angles, base, p);
        REQUIRE((m[3] - g).norm() < 1e-9);
        REQUIRE(std::abs((m[2] - m[0]).norm() - p.l2) < 1e-9);
        ++done;
    }
}

TEST_CASE("IK is continuous along smooth grasp paths") {
    ManipulatorParams p;
    p.base_mount_height = 0.35;
    const auto model = PayloadModel::cuboid(3, 3, 0.1, 1.45, 6);
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int traj = 0; traj < 20; ++traj) {
        const double a0 = kPi * u(rng), w = 0.3 * u(rng), roll_amp = 0.5 + 0.3 * u(rng);
        JointAngles prev;
        for (int i = 0; i <= 100; ++i) {
            const double t = 0.1 * i;
            PayloadState s{{0.4 * t, 0.1 * t, 1.45}, a0 + w * t, roll_amp * (0.5 - 0.5 * std::cos(0.3 * t)), 0};
            const auto g = assign_grasps(model, s, 6);
            // Base kept 2.0 m out from the grasp along the payload's lateral axis.
            const Vec2 off = 2.0 * mmt::geom::unit(s.yaw - kPi / 2);
            const Vec2 base = Vec2{g[0].x(), g[0].y()} + off;
            const auto ik = inverse_kinematics(g[0], base, s, p);
            if (i > 0) REQUIRE(max_joint_rate(prev, ik.angles, 0.1) < 1.0);
            prev = ik.angles;
        }
    }
}

TEST_CASE("grasp assignment") {
    const auto model = PayloadModel::cuboid(3, 3, 0.1, 1.45, 6);
    PayloadState s{{2, 1, 1.45}, 0, 0, 0};
    auto g = assign_grasps(model, s, 6);
    REQUIRE(g.size() == 6);
    for (std::size_t k = 0; k < 6; ++k)
        CHECK((g[k] - (model.grasp_points_local[k] + Vec3{2, 1, 1.45})).norm() < 1e-12);

    s.roll = 0.4;
    g = assign_grasps(model, s, 6);
    CHECK(g[1].z() - 1.45 == doctest::Approx(1.45 * std::sin(0.4)));
    CHECK(g[0].z() - 1.45 == doctest::Approx(-1.45 * std::sin(0.4)));
    CHECK_THROWS_AS((void)assign_grasps(model, s, 4), mmt::Error);
}

TEST_CASE("joint rate uses wrapped differences") {
    JointAngles a, b;
    a.theta[3] = kPi - 0.01;
    b.theta[3] = -kPi + 0.01;
    CHECK(max_joint_rate(a, b, 0.1) == doctest::Approx(0.2));
}
