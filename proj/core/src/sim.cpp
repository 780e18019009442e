#include "mmt/sim.hpp"

#include "mmt/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <sstream>

namespace mmt::sim {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Smallest roll in [phi_min, phi_max] that fits the box; phi_max if none does.
double fitting_roll(const payload::PayloadModel& m, const geom::OrientedRect& box, const payload::PayloadPlanConfig& c) {
    constexpr int kScan = 400;
    double prev = c.phi_min;
    if (payload::min_containment_slack(m, box, prev) >= 0.0) return prev;
    for (int i = 1; i <= kScan; ++i) {
        const double p = c.phi_min + (c.phi_max - c.phi_min) * i / kScan;
        if (payload::min_containment_slack(m, box, p) >= 0.0) {
            double bad = prev, good = p;
            for (int b = 0; b < 80; ++b) {
                const double mid = 0.5 * (bad + good);
                (payload::min_containment_slack(m, box, mid) >= 0.0 ? good : bad) = mid;
            }
            return good;
        }
        prev = p;
    }
    return c.phi_max;
}

Vec2 script_velocity(const Vec2& p, const MotionScript& s, const ScriptCursor& c) {
    if (c.finished || s.waypoints.empty() || s.speed <= 0.0) return Vec2::Zero();
    const Vec2 d = s.waypoints[c.next] - p;
    return d.norm() > 0.0 ? Vec2(s.speed * d / d.norm()) : Vec2::Zero();
}

std::string join_statuses(const std::vector<formation::RobotPlan>& plans) {
    std::string out;
    for (std::size_t k = 0; k < plans.size(); ++k) {
        if (k > 0) out += ';';
        out += formation::to_string(plans[k].status);
    }
    return out;
}

std::vector<dvb::DvbState> box_horizon(const dvb::DvbState& now, const dvb::DvbState& applied,
                                       const dvb::DvbPlan& plan, std::size_t steps) {
    std::vector<dvb::DvbState> out{now, applied};
    for (std::size_t n = 2; n <= steps; ++n) out.push_back(plan.states[std::min(n, plan.states.size() - 1)]);
    return out;
}

void ik_all(WorldState& w, const Scenario& s, std::vector<Violation>* violations) {
    const auto grasps = kin::assign_grasps(s.payload, w.payload, s.K);
    w.joints.resize(s.K);
    w.elbows.resize(s.K);
    for (std::size_t k = 0; k < s.K; ++k) {
        try {
            w.joints[k] = kin::inverse_kinematics(grasps[k], w.bases[k], w.payload, s.arm).angles;
        } catch (const UnreachableError& e) {
            if (violations == nullptr) throw;
            violations->push_back({ViolationKind::unreachable, (grasps[k] - kin::shoulder(w.bases[k], s.arm)).norm(),
                                   "robot " + std::to_string(k) + ": " + e.what()});
        }
        w.elbows[k] = kin::forward_kinematics(w.joints[k], w.bases[k], s.arm)[2];
    }
}

}  // namespace

const char* to_string(ViolationKind k) noexcept {
    switch (k) {
        case ViolationKind::containment: return "containment";
        case ViolationKind::separation: return "separation";
        case ViolationKind::clearance: return "clearance";
        case ViolationKind::scale: return "scale";
        case ViolationKind::joint_rate: return "joint_rate";
        case ViolationKind::region: return "region";
        case ViolationKind::unreachable: return "unreachable";
        case ViolationKind::planner: return "planner";
    }
    return "unknown";
}

std::vector<std::string> check_scenario(const Scenario& s) {
    std::vector<std::string> out;
    auto guard = [&out](auto&& fn) {
        try {
            fn();
        } catch (const Error& e) {
            out.emplace_back(e.what());
        }
    };
    if (!(s.dt > 0)) out.emplace_back("run.dt must be positive");
    if (!(s.duration >= 0)) out.emplace_back("run.duration must be non-negative");
    if (s.K == 0) out.emplace_back("robots.count must be at least 1");
    if (s.payload.grasp_points_local.size() != s.K)
        out.emplace_back("payload grasp count " + std::to_string(s.payload.grasp_points_local.size()) +
                         " differs from robot count " + std::to_string(s.K));
    if (std::abs(s.dvb.dt - s.dt) > 1e-12 || std::abs(s.roll.dt - s.dt) > 1e-12 ||
        std::abs(s.formation.dt - s.dt) > 1e-12)
        out.emplace_back("planner dt values must equal run.dt");
    if (s.roll.H_p > s.dvb.H) out.emplace_back("H_p <= H violated: H_p = " + std::to_string(s.roll.H_p) +
                                                ", H = " + std::to_string(s.dvb.H));
    if (s.formation.H_r > s.dvb.H) out.emplace_back("H_r <= H violated: H_r = " + std::to_string(s.formation.H_r) +
                                                     ", H = " + std::to_string(s.dvb.H));
    guard([&] { dvb::validate(s.dvb); });
    guard([&] { payload::validate(s.roll); });
    guard([&] { formation::validate(s.formation); });
    guard([&] { fields::validate(s.fields); });
    guard([&] { kin::validate(s.arm); });
    if (!(s.arena_min.x() < s.arena_max.x() && s.arena_min.y() < s.arena_max.y()))
        out.emplace_back("arena bounds must be ordered");
    guard([&] {
        const auto lim = fields::width_limits(s.fields, s.payload.length);
        if (s.box_width != 0.0 && (s.box_width < lim.lo || s.box_width > lim.hi))
            out.emplace_back("initial box width outside the scale limits");
        // The narrowest box must still admit a roll within the roll limits.
        const geom::OrientedRect narrow({0, 0}, 0.0, 0.5 * s.payload.length, 0.5 * lim.lo);
        if (payload::min_containment_slack(s.payload, narrow, s.roll.phi_max) < -1e-9)
            out.emplace_back("width lower limit " + std::to_string(lim.lo) +
                             " m is narrower than the payload projection at phi_max");
    });
    for (const auto& o : s.static_obstacles)
        if (!(o.radius >= 0)) out.emplace_back("static obstacle " + std::to_string(o.id) + " has negative radius");
    for (const auto& o : s.dynamic_obstacles) {
        if (!(o.radius >= 0)) out.emplace_back("dynamic obstacle " + std::to_string(o.id) + " has negative radius");
        if (o.script.speed > 0 && o.script.waypoints.empty())
            out.emplace_back("dynamic obstacle " + std::to_string(o.id) + " moves without waypoints");
        if (!(o.script.speed >= 0 && o.script.heading_noise >= 0))
            out.emplace_back("dynamic obstacle " + std::to_string(o.id) + " has negative speed or noise");
    }
    if (s.target_script.speed > 0 && s.target_script.waypoints.empty())
        out.emplace_back("target moves without waypoints");
    if ((s.box_start - s.target_start).norm() == 0.0) out.emplace_back("box starts on the target");
    return out;
}

Vec2 advance_script(const Vec2& p, const MotionScript& s, ScriptCursor& c, double dt, std::mt19937_64& rng) {
    if (c.finished || s.waypoints.empty() || s.speed <= 0.0) return p;
    double budget = s.speed * dt;
    Vec2 pos = p;
    for (std::size_t guard = 0; guard <= s.waypoints.size() && budget > 0.0; ++guard) {
        const Vec2 d = s.waypoints[c.next] - pos;
        const double dist = d.norm();
        if (dist > budget) {
            double heading = std::atan2(d.y(), d.x());
            if (s.heading_noise > 0.0) heading += std::normal_distribution<double>(0.0, s.heading_noise)(rng);
            pos += budget * geom::unit(heading);
            return pos;
        }
        pos = s.waypoints[c.next];
        budget -= dist;
        if (c.next + 1 < s.waypoints.size()) {
            ++c.next;
        } else if (s.loop) {
            c.next = 0;
        } else {
            c.finished = true;
            return pos;
        }
    }
    return pos;
}

WorldState initial_world(const Scenario& s) {
    WorldState w;
    w.rng.seed(s.seed);
    w.target = s.target_start;

    const auto lim = fields::width_limits(s.fields, s.payload.length);
    w.box.center = s.box_start;
    w.box.length = s.payload.length;
    w.box.width = s.box_width > 0.0 ? s.box_width : lim.hi;
    w.box.r = fields::scale_of(w.box.length, w.box.width);
    w.box.yaw = dvb::yaw_setpoint(s.target_start, s.box_start, 0.0);

    const double roll = fitting_roll(s.payload, w.box.rect(), s.roll);
    w.payload = {{w.box.center.x(), w.box.center.y(), s.payload.h_P}, w.box.yaw, roll, 0.0};

    w.obstacles = s.static_obstacles;
    for (auto& o : w.obstacles) {
        o.kind = fields::ObstacleKind::static_obstacle;
        o.velocity = Vec2::Zero();
    }
    for (const auto& d : s.dynamic_obstacles) {
        w.obstacle_cursors.push_back({});
        w.obstacles.push_back({d.id, fields::ObstacleKind::dynamic_obstacle, d.start,
                               script_velocity(d.start, d.script, w.obstacle_cursors.back()), d.radius});
    }

    const std::vector<dvb::DvbState> still(s.formation.H_r + 1, w.box);
    try {
        w.regions = formation::partition_regions(still, {roll}, s.K, s.formation, s.arm, s.payload);
    } catch (const InfeasibleError& e) {
        throw ScenarioError({std::string("initial formation: ") + e.what()});
    }
    for (const auto& r : w.regions) w.bases.push_back(r.centers[0]);
    w.applied_u.assign(s.K, Vec2::Zero());
    w.applied_f.assign(s.K, Vec2::Zero());
    try {
        ik_all(w, s, nullptr);
    } catch (const UnreachableError& e) {
        throw ScenarioError({std::string("initial grasp: ") + e.what()});
    }
    return w;
}

WorldState step(const WorldState& world, const Scenario& s, TickRecord& record) {
    WorldState w = world;
    std::vector<Violation> notes;
    StageTimes times;
    const double dt = s.dt;

    // Box plan and pose.
    auto t0 = Clock::now();
    const auto res = dvb::plan(world.box, world.target, world.obstacles, world.dvb_memory, s.dvb, s.fields);
    w.box = dvb::track_pose(world.box, res.plan, world.target, s.dvb, dt);
    w.dvb_memory = res.memory;
    times.dvb = seconds_since(t0);
    std::string dvb_status = qp::to_string(res.plan.status);
    if (res.plan.fallback) {
        dvb_status += "(fallback)";
        notes.push_back({ViolationKind::planner, 0.0, "box QP " + std::string(qp::to_string(res.plan.status))});
    }

    // Payload roll over the applied box and the rest of the plan.
    t0 = Clock::now();
    const auto roll_boxes = box_horizon(world.box, w.box, res.plan, s.roll.H_p);
    std::vector<geom::OrientedRect> rects;
    for (const auto& b : roll_boxes) rects.push_back(b.rect());
    const auto roll = payload::plan_roll(s.payload, world.payload, rects, s.roll,
                                         world.has_roll_plan ? &world.roll_plan : nullptr);
    times.roll = seconds_since(t0);
    std::string roll_status = payload::to_string(roll.status);
    std::vector<double> rolls;
    double phi = world.payload.roll, omega = 0.0;
    if (roll.status == payload::RollStatus::infeasible) {
        roll_status += "(hold)";
        rolls.assign(1, phi);
        w.has_roll_plan = false;
    } else {
        phi = roll.phi[1];
        omega = roll.omega[0];
        rolls.assign(roll.phi.begin(), roll.phi.end());
        w.roll_plan = roll;
        w.has_roll_plan = true;
    }
    w.payload = {{w.box.center.x(), w.box.center.y(), s.payload.h_P}, w.box.yaw, phi, omega};
    if (!rolls.empty()) rolls[0] = world.payload.roll;
    if (rolls.size() > 1) rolls[1] = phi;

    // Regions and base plans.
    t0 = Clock::now();
    const auto form_boxes = box_horizon(world.box, w.box, res.plan, s.formation.H_r);
    bool formation_ok = true;
    try {
        w.regions = formation::partition_regions(form_boxes, rolls, s.K, s.formation, s.arm, s.payload);
    } catch (const InfeasibleError& e) {
        notes.push_back({ViolationKind::planner, 0.0, e.what()});
        // Second try without the inner reach cut; IK still guards the true limit.
        auto relaxed = s.formation;
        relaxed.reach_inner_frac = 0.0;
        try {
            w.regions = formation::partition_regions(form_boxes, rolls, s.K, relaxed, s.arm, s.payload);
        } catch (const InfeasibleError&) {
            formation_ok = false;
            w.regions.clear();
        }
    }
    if (formation_ok) {
        const double infl = formation::elbow_influence(s.formation, s.arm);
        w.robot_plans = formation::plan_formation(world.bases, world.elbows, w.regions, s.formation, infl,
                                                  world.robot_plans.empty() ? nullptr : &world.robot_plans);
        for (std::size_t k = 0; k < s.K; ++k) {
            const auto& p = w.robot_plans[k];
            w.applied_u[k] = p.controls[0];
            w.applied_f[k] = p.f;
            w.bases[k] = world.bases[k] + dt * (p.controls[0] + p.f);
        }
    } else {
        w.robot_plans.clear();
        w.applied_u.assign(s.K, Vec2::Zero());
        w.applied_f.assign(s.K, Vec2::Zero());
    }
    times.robots = seconds_since(t0);

    ik_all(w, s, &notes);

    // Obstacles and target move after the plans that observed them.
    std::size_t d = 0;
    for (auto& o : w.obstacles) {
        if (o.kind != fields::ObstacleKind::dynamic_obstacle) continue;
        const auto& spec = s.dynamic_obstacles[d];
        auto& cur = w.obstacle_cursors[d];
        const Vec2 next = advance_script(o.position, spec.script, cur, dt, w.rng);
        o.velocity = (next - o.position) / dt;
        o.position = next;
        ++d;
    }
    w.target = advance_script(world.target, s.target_script, w.target_cursor, dt, w.rng);

    w.tick = world.tick + 1;
    w.t = static_cast<double>(w.tick) * dt;

    record = record_of(w, s);
    record.violations = validate(w, s, &world);
    record.violations.insert(record.violations.end(), notes.begin(), notes.end());
    for (std::size_t k = 0; k < s.K; ++k)
        record.max_joint_rate = std::max(record.max_joint_rate, kin::max_joint_rate(world.joints[k], w.joints[k], dt));
    record.dvb_status = dvb_status;
    record.roll_status = roll_status;
    record.robot_status = formation_ok ? join_statuses(w.robot_plans) : "none";
    record.times = times;
    record.horizon = res.plan.states;
    return w;
}

std::vector<Violation> validate(const WorldState& w, const Scenario& s, const WorldState* previous) {
    std::vector<Violation> out;
    const auto rect = w.box.rect();
    const auto verts = payload::projected_vertices(s.payload, w.payload);
    const auto res = payload::containment_residuals(verts, geom::rect_to_halfplanes(rect));
    const double cmin = res.empty() ? 0.0 : *std::min_element(res.begin(), res.end());
    if (cmin < -s.validation.containment_tol)
        out.push_back({ViolationKind::containment, -cmin, "payload projection outside the box"});

    const double sep_min = 2.0 * s.formation.robot_radius;
    for (std::size_t i = 0; i < w.bases.size(); ++i)
        for (std::size_t j = i + 1; j < w.bases.size(); ++j) {
            const double d = (w.bases[i] - w.bases[j]).norm();
            if (d < sep_min - 1e-9)
                out.push_back({ViolationKind::separation, d,
                               "bases " + std::to_string(i) + " and " + std::to_string(j) + " too close"});
        }

    const double need = (1.0 - s.validation.clearance_slack) * w.box.r;
    for (const auto& o : w.obstacles) {
        const double surface = (w.box.center - o.position).norm() - o.radius;
        if (surface < need)
            out.push_back({ViolationKind::clearance, need - surface, "obstacle " + std::to_string(o.id)});
    }

    if (w.box.r < s.fields.r_min - 1e-9 || w.box.r > s.fields.r_max + 1e-9)
        out.push_back({ViolationKind::scale, w.box.r, "scale outside limits"});

    if (previous != nullptr && previous->joints.size() == w.joints.size()) {
        for (std::size_t k = 0; k < w.joints.size(); ++k) {
            const double rate = kin::max_joint_rate(previous->joints[k], w.joints[k], s.dt);
            if (rate > s.validation.joint_rate_max)
                out.push_back({ViolationKind::joint_rate, rate, "robot " + std::to_string(k)});
        }
    }

    if (w.regions.size() == w.bases.size()) {
        for (std::size_t k = 0; k < w.bases.size(); ++k) {
            const auto& regs = w.regions[k].regions;
            if (regs.size() < 2) continue;
            const double slack = regs[1].min_slack(w.bases[k]);
            if (slack < -s.validation.region_tol)
                out.push_back({ViolationKind::region, -slack, "robot " + std::to_string(k) + " outside its region"});
        }
    }
    return out;
}

TickRecord record_of(const WorldState& w, const Scenario& s) {
    TickRecord r;
    r.tick = w.tick;
    r.t = w.t;
    r.box = w.box;
    r.phi = w.payload.roll;
    r.omega = w.payload.omega;
    r.bases = w.bases;
    r.u = w.applied_u;
    r.f = w.applied_f;
    r.joints = w.joints;
    r.target = w.target;
    r.clearance_min = std::numeric_limits<double>::infinity();
    r.clearance_ratio = std::numeric_limits<double>::infinity();
    std::vector<fields::ObstacleState> statics;
    for (const auto& o : w.obstacles) {
        r.obstacles.push_back(o.position);
        const double center = (w.box.center - o.position).norm();
        const double surface = center - o.radius;
        r.clearance_min = std::min(r.clearance_min, surface - w.box.r);
        r.clearance_ratio = std::min(r.clearance_ratio, surface / w.box.r);
        if (center < w.box.r + o.radius + s.fields.delta) r.fields_active = true;
        if (o.kind == fields::ObstacleKind::static_obstacle) statics.push_back(o);
    }
    if (!r.fields_active && (w.box.center - w.target).norm() > 0.0)
        r.fields_active = fields::approach_angle_force(w.box.center, w.target, statics, s.fields).norm() > 0.0;
    r.min_base_separation = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < w.bases.size(); ++i)
        for (std::size_t j = i + 1; j < w.bases.size(); ++j)
            r.min_base_separation = std::min(r.min_base_separation, (w.bases[i] - w.bases[j]).norm());
    const auto verts = payload::projected_vertices(s.payload, w.payload);
    const auto res = payload::containment_residuals(verts, geom::rect_to_halfplanes(w.box.rect()));
    r.containment_min = *std::min_element(res.begin(), res.end());
    return r;
}

Summary summarize(const std::vector<TickRecord>& records) {
    Summary s;
    constexpr double kInf = std::numeric_limits<double>::infinity();
    s.ticks = records.empty() ? 0 : records.size() - 1;
    s.min_clearance = s.min_clearance_ratio = s.min_base_separation = s.min_containment = s.r_lo = kInf;
    s.r_hi = -kInf;
    std::map<std::string, std::size_t> kinds;
    std::vector<double> dvb_t, roll_t, rob_t, tot_t;
    for (const auto& r : records) {
        s.min_clearance = std::min(s.min_clearance, r.clearance_min);
        s.min_clearance_ratio = std::min(s.min_clearance_ratio, r.clearance_ratio);
        s.min_base_separation = std::min(s.min_base_separation, r.min_base_separation);
        s.min_containment = std::min(s.min_containment, r.containment_min);
        s.max_joint_rate = std::max(s.max_joint_rate, r.max_joint_rate);
        s.r_lo = std::min(s.r_lo, r.box.r);
        s.r_hi = std::max(s.r_hi, r.box.r);
        if (r.dvb_status.find("fallback") != std::string::npos) ++s.dvb_fallbacks;
        if (r.roll_status.rfind("infeasible", 0) == 0) ++s.roll_infeasible;
        std::istringstream robots(r.robot_status);
        for (std::string tok; std::getline(robots, tok, ';');) {
            if (tok == "soft") ++s.robot_soft;
            if (tok == "failed") ++s.robot_failed;
        }
        s.violations += r.violations.size();
        for (const auto& v : r.violations) ++kinds[to_string(v.kind)];
        if (r.tick > 0) {
            dvb_t.push_back(r.times.dvb);
            roll_t.push_back(r.times.roll);
            rob_t.push_back(r.times.robots);
            tot_t.push_back(r.times.total());
        }
    }
    s.violations_by_kind.assign(kinds.begin(), kinds.end());
    auto mean = [](const std::vector<double>& v) {
        double a = 0.0;
        for (double x : v) a += x;
        return v.empty() ? 0.0 : a / static_cast<double>(v.size());
    };
    auto p95 = [](std::vector<double> v) {
        if (v.empty()) return 0.0;
        std::sort(v.begin(), v.end());
        const auto idx = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(v.size()))) - 1;
        return v[std::min(idx, v.size() - 1)];
    };
    s.mean_times = {mean(dvb_t), mean(roll_t), mean(rob_t)};
    s.p95_times = {p95(dvb_t), p95(roll_t), p95(rob_t)};
    s.mean_total_time = mean(tot_t);
    return s;
}

SimLog run(const Scenario& s) {
    const auto problems = check_scenario(s);
    if (!problems.empty()) throw ScenarioError(problems);
    SimLog log;
    log.scenario = s.name;
    log.seed = s.seed;
    log.dt = s.dt;
    log.K = s.K;
    log.obstacle_count = s.static_obstacles.size() + s.dynamic_obstacles.size();
    auto world = initial_world(s);
    log.records.push_back(record_of(world, s));
    log.records.back().violations = validate(world, s, nullptr);
    const auto ticks = static_cast<std::size_t>(std::llround(s.duration / s.dt));
    log.records.reserve(ticks + 1);
    for (std::size_t i = 0; i < ticks; ++i) {
        TickRecord rec;
        world = step(world, s, rec);
        log.records.push_back(std::move(rec));
    }
    log.summary = summarize(log.records);
    return log;
}

}  // namespace mmt::sim
