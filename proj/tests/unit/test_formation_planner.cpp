#include "mmt/error.hpp"
#include "mmt/formation_planner.hpp"

#include <doctest.h>

#include <random>

using namespace mmt::formation;
using mmt::geom::kPi;
using mmt::geom::OrientedRect;

namespace {

// Arm long enough that reach never trims a cell.
mmt::kin::ManipulatorParams long_arm() {
    mmt::kin::ManipulatorParams a;
    a.l2 = a.l3 = 20.0;
    return a;
}

FormationConfig loose_cfg() {
    FormationConfig c;
    c.reach_inner_frac = 0.0;
    c.reach_outer_frac = 1.0;
    return c;
}

std::vector<mmt::dvb::DvbState> constant_boxes(const mmt::dvb::DvbState& s, std::size_t n) {
    return std::vector<mmt::dvb::DvbState>(n, s);
}

mmt::dvb::DvbState box(Vec2 c, double yaw, double length, double width) {
    mmt::dvb::DvbState s;
    s.center = c;
    s.yaw = yaw;
    s.length = length;
    s.width = width;
    s.r = 0.5 * std::hypot(length, width);
    return s;
}

// Single region held over the horizon, centered at `c`, translated by `v` per step.
RegionAssignment moving_region(Vec2 c, Vec2 v, std::size_t H, double half = 1.0) {
    RegionAssignment a;
    for (std::size_t n = 0; n <= H; ++n) {
        const OrientedRect r(c + static_cast<double>(n) * v, 0.0, half, half);
        a.cells.push_back(r);
        a.regions.push_back(mmt::geom::rect_to_halfplanes(r));
        a.centers.push_back(r.center);
    }
    return a;
}

}  // namespace

TEST_CASE("grid cells") {
    const OrientedRect b({0, 0}, 0, 2, 2);
    std::vector<Vec2> centers;
    for (std::size_t k = 0; k < 4; ++k) centers.push_back(grid_cell(b, 4, k).center);
    CHECK(centers[0].isApprox(Vec2{-1, -1}));
    CHECK(centers[1].isApprox(Vec2{-1, 1}));
    CHECK(centers[2].isApprox(Vec2{1, -1}));
    CHECK(centers[3].isApprox(Vec2{1, 1}));

    const OrientedRect yawed({3, -2}, kPi / 6, 2, 2);
    for (std::size_t k = 0; k < 4; ++k) {
        const Vec2 expect = Vec2{3, -2} + mmt::geom::rot2(kPi / 6) * centers[k];
        CHECK((grid_cell(yawed, 4, k).center - expect).norm() < 1e-12);
    }

    const auto odd = grid_cell(OrientedRect({0, 0}, 0, 3, 1), 3, 2);
    CHECK(odd.half_width == doctest::Approx(1.0));
    CHECK(odd.center.isApprox(Vec2{1.5, 0}));
    CHECK_THROWS_AS((void)grid_cell(b, 4, 4), mmt::Error);
}

TEST_CASE("undilated regions") {
    auto cfg = loose_cfg();
    cfg.H_r = 2;
    const auto model = mmt::payload::PayloadModel::cuboid(4, 4, 0.1, 1.45, 4);
    const auto regions = partition_regions(constant_boxes(box({0, 0}, 0, 4, 4), 3), {0.0}, 4, cfg, long_arm(), model);
    REQUIRE(regions.size() == 4);
    for (const auto& r : regions) {
        REQUIRE(r.cells.size() == 3);
        CHECK(r.cells[1].half_length == doctest::Approx(0.8));
        CHECK(r.cells[1].half_width == doctest::Approx(0.8));
    }
    CHECK(regions[3].centers[0].isApprox(Vec2{1, 1}));

    cfg.robot_radius = 1.1;
    CHECK_THROWS_AS((void)partition_regions(constant_boxes(box({0, 0}, 0, 4, 4), 3), {0.0}, 4, cfg, long_arm(), model),
                    mmt::InfeasibleError);
}

TEST_CASE("reach trims cells around the grasp") {
    FormationConfig cfg;
    cfg.H_r = 1;
    mmt::kin::ManipulatorParams arm;
    arm.base_mount_height = 0.35;
    const auto model = mmt::payload::PayloadModel::cuboid(3, 3, 0.1, 1.45, 6);
    const auto regions = partition_regions(constant_boxes(box({0, 0}, 0, 3, 3), 2), {0.0}, 6, cfg, arm, model);
    const auto band = horizontal_reach(arm, cfg, 1.45 - 0.35);
    CHECK(band.outer == doctest::Approx(std::sqrt(std::pow(0.9 * 2.8, 2) - 1.1 * 1.1)));
    CHECK(band.inner == 0.0);
    for (std::size_t k = 0; k < 6; ++k) {
        const Vec2 g = model.grasp_points_local[k].head<2>();
        for (const auto& c : regions[k].cells[1].corners()) CHECK((c - g).norm() <= band.outer + 1e-12);
    }

    // A grasp almost level with the shoulder brings the inner bound into play.
    cfg.reach_inner_frac = 0.35;
    const auto flat = mmt::payload::PayloadModel::cuboid(3, 3, 0.1, 0.5, 6);
    const auto inner = horizontal_reach(arm, cfg, 0.5 - 0.35);
    REQUIRE(inner.inner > 0.0);
    const auto trimmed = partition_regions(constant_boxes(box({0, 0}, 0, 3, 3), 2), {0.0}, 6, cfg, arm, flat);
    for (std::size_t k = 0; k < 6; ++k) {
        const Vec2 g = flat.grasp_points_local[k].head<2>();
        for (const auto& c : trimmed[k].cells[1].corners()) CHECK((c - g).norm() >= inner.inner - 1e-12);
    }
}

TEST_CASE("cells are disjoint with a two-radius gap") {
    auto cfg = loose_cfg();
    cfg.H_r = 1;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> pos(-5, 5), ang(-kPi, kPi), len(2.5, 5);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t K = 1 + static_cast<std::size_t>(trial % 8);
        const auto b = box({pos(rng), pos(rng)}, ang(rng), len(rng), len(rng));
        const auto model = mmt::payload::PayloadModel::cuboid(b.length, b.width, 0.1, 1.45, K);
        const auto regions = partition_regions(constant_boxes(b, 2), {0.0}, K, cfg, long_arm(), model);
        const auto rect = b.rect();
        for (std::size_t i = 0; i < K; ++i) {
            for (const auto& c : regions[i].cells[0].corners()) CHECK(rect.contains(c, 1e-9));
            for (std::size_t j = i + 1; j < K; ++j) {
                // Separation along a body axis of at least two radii.
                const auto ci = regions[i].cells[0], cj = regions[j].cells[0];
                const Vec2 d = rect.to_body(cj.center) - rect.to_body(ci.center);
                const double gx = std::abs(d.x()) - ci.half_length - cj.half_length;
                const double gy = std::abs(d.y()) - ci.half_width - cj.half_width;
                CHECK(std::max(gx, gy) >= 2 * cfg.robot_radius - 1e-9);
            }
        }
    }
}

TEST_CASE("elbow repulsion") {
    FormationConfig cfg;
    CHECK(elbow_influence(cfg, mmt::kin::ManipulatorParams{}) == doctest::Approx(1.484));
    const std::vector<Vec3> far{{0, 0, 1}, {5, 0, 1}, {0, 5, 1}};
    CHECK(elbow_repulsion(far, 0, cfg, 1.484).norm() == 0.0);

    const std::vector<Vec3> north{{0, 0, 1}, {0, 0.8, 1.2}};
    const Vec2 f = elbow_repulsion(north, 0, cfg, 1.484);
    CHECK(f.y() < 0.0);
    CHECK(std::abs(f.x()) < 1e-15);

    const std::vector<Vec3> crowd{{0, 0, 1}, {0.01, 0, 1}, {0, 0.01, 1}, {-0.01, 0, 1}};
    CHECK(elbow_repulsion(crowd, 0, cfg, 1.484).norm() <= 0.5 * cfg.u_max.norm() + 1e-12);

    const std::vector<Vec3> stacked{{0, 0, 1}, {0, 0, 1.5}};
    CHECK(elbow_repulsion(stacked, 0, cfg, 1.484).norm() > 0.0);
}

TEST_CASE("robot at its region center stays put") {
    FormationConfig cfg;
    const auto a = moving_region({2, 3}, {0, 0}, cfg.H_r);
    const auto plan = plan_robot({2, 3}, a, Vec2::Zero(), cfg);
    CHECK(plan.status == RobotStatus::solved);
    for (const auto& u : plan.controls) CHECK(u.norm() < 1e-7);
}

TEST_CASE("robot tracks translating regions") {
    FormationConfig cfg;
    Vec2 x{0, 0};
    Vec2 c{0, 0};
    const Vec2 step{0.04, 0};
    RobotPlan prev;
    for (int t = 0; t < 150; ++t) {
        const auto a = moving_region(c, step, cfg.H_r);
        prev = plan_robot(x, a, Vec2::Zero(), cfg, t == 0 ? nullptr : &prev);
        REQUIRE(prev.status == RobotStatus::solved);
        x += cfg.dt * prev.controls[0];
        c += step;
    }
    CHECK(prev.controls[0].x() == doctest::Approx(0.4).epsilon(1e-3));
    CHECK(std::abs(prev.controls[0].y()) < 1e-6);
}

TEST_CASE("external push halves the control range") {
    FormationConfig cfg;
    const auto a = moving_region({0, 0}, {0, 0}, cfg.H_r, 3.0);
    const auto plan = plan_robot({0, 0}, a, {3, 0}, cfg);
    REQUIRE(plan.status == RobotStatus::solved);
    for (const auto& u : plan.controls) {
        CHECK(std::abs(u.x()) <= 2.0);
        CHECK(std::abs(u.y()) <= 2.0);
    }
    CHECK(plan.controls[0].x() < -1.0);
    for (std::size_t n = 0; n < cfg.H_r; ++n)
        CHECK((plan.states[n + 1] - plan.states[n] - cfg.dt * (plan.controls[n] + plan.f)).norm() < 1e-12);
}

TEST_CASE("unreachable region switches to soft constraints") {
    FormationConfig cfg;
    const auto a = moving_region({5, 0}, {0, 0}, cfg.H_r, 0.2);
    const auto plan = plan_robot({0, 0}, a, Vec2::Zero(), cfg);
    CHECK(plan.status == RobotStatus::soft);
    CHECK(plan.max_slack > 0.0);
    CHECK(plan.controls[0].x() == doctest::Approx(4.0).epsilon(1e-6));
}

TEST_CASE("formation plans: single robot and determinism") {
    auto cfg = loose_cfg();
    const auto model1 = mmt::payload::PayloadModel::cuboid(3, 3, 0.1, 1.45, 1);
    const auto b = box({1, 1}, 0.3, 3, 3);
    const auto one = partition_regions(constant_boxes(b, cfg.H_r + 1), {0.0}, 1, cfg, long_arm(), model1);
    CHECK((one[0].centers[0] - b.center).norm() < 1e-12);
    CHECK(one[0].cells[0].half_length == doctest::Approx(1.3));
    const auto p1 = plan_formation({{0.5, 0.5}}, {{0, 0, 1}}, one, cfg, 1.484);
    REQUIRE(p1.size() == 1);
    CHECK(p1[0].controls[0].dot(b.center - Vec2{0.5, 0.5}) > 0.0);

    const auto model = mmt::payload::PayloadModel::cuboid(3, 3, 0.1, 1.45, 6);
    const auto regions = partition_regions(constant_boxes(b, cfg.H_r + 1), {0.0}, 6, cfg, long_arm(), model);
    std::vector<Vec2> bases;
    std::vector<Vec3> elbows;
    for (const auto& r : regions) {
        bases.push_back(r.centers[0] + Vec2{0.05, -0.03});
        elbows.emplace_back(r.centers[0].x(), r.centers[0].y(), 1.2);
    }
    auto serial = cfg;
    serial.parallel = false;
    const auto a = plan_formation(bases, elbows, regions, cfg, 1.484);
    const auto s = plan_formation(bases, elbows, regions, serial, 1.484);
    for (std::size_t k = 0; k < 6; ++k) {
        CHECK(a[k].status == RobotStatus::solved);
        for (std::size_t n = 0; n < cfg.H_r; ++n) CHECK(a[k].controls[n] == s[k].controls[n]);
        for (std::size_t n = 1; n <= cfg.H_r; ++n) CHECK(regions[k].regions[n].contains(a[k].states[n], 1e-5));
    }
    CHECK_THROWS_AS((void)plan_formation(bases, {}, regions, cfg, 1.484), mmt::Error);
}
