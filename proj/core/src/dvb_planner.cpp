#include "mmt/dvb_planner.hpp"

#include "mmt/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mmt::dvb {

namespace {

using qp::Matrix;
using qp::Vector;

constexpr std::size_t kTargetId = std::numeric_limits<std::size_t>::max();

Vec2 clamp_norm(const Vec2& v, double limit) {
    const double n = v.norm();
    return n > limit && n > 0.0 ? Vec2(v * (limit / n)) : v;
}

double yaw_step(double yaw, double setpoint, const DvbPlannerConfig& cfg, double dt) {
    const double step = cfg.yaw_gain * geom::angle_diff(setpoint, yaw) * dt;
    const double lim = cfg.yaw_rate_max * dt;
    return geom::normalize_angle(yaw + std::clamp(step, -lim, lim));
}

// Lower block-triangular integrator: X - x0 = S (U + F).
Matrix integrator(std::size_t H, double dt) {
    const auto n = static_cast<Eigen::Index>(2 * H);
    Matrix S = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(H); ++i)
        for (Eigen::Index j = 0; j <= i; ++j) S.block<2, 2>(2 * i, 2 * j) = dt * Eigen::Matrix2d::Identity();
    return S;
}

Vector stack(const fields::Plan2& v) {
    Vector out(static_cast<Eigen::Index>(2 * v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) out.segment<2>(static_cast<Eigen::Index>(2 * i)) = v[i];
    return out;
}

Vector repeat(const Vec2& v, std::size_t H) { return stack(fields::Plan2(H, v)); }

// Previous solution moved one step earlier; the last step is repeated.
qp::QpSolution shifted(const qp::QpSolution& s, std::size_t H) {
    qp::QpSolution out = s;
    const auto h = static_cast<Eigen::Index>(2 * H);
    auto shift_block = [h](Vector& v, Eigen::Index offset) {
        if (v.size() < offset + h || h < 4) return;
        Vector b = v.segment(offset, h);
        v.segment(offset, h - 2) = b.tail(h - 2);
    };
    shift_block(out.x, 0);
    shift_block(out.y, 0);
    shift_block(out.y, h);
    return out;
}

}  // namespace

void validate(const DvbPlannerConfig& c) {
    auto fail = [](const char* what) { throw Error(std::string("dvb planner config: ") + what); };
    if (c.H < 1) fail("H must be at least 1");
    if (!(c.dt > 0)) fail("dt must be positive");
    if (!(c.omega_u.minCoeff() > 0)) fail("omega_u must be positive definite");
    if (!(c.omega_x.minCoeff() >= 0)) fail("omega_x must be positive semidefinite");
    if (!(c.u_min.x() <= 0 && c.u_min.y() <= 0 && c.u_max.x() >= 0 && c.u_max.y() >= 0))
        fail("control bounds must contain zero");
    if (!(c.x_min.x() < c.x_max.x() && c.x_min.y() < c.x_max.y())) fail("position bounds must be ordered");
    if (!(c.d_des >= 0)) fail("d_des must be non-negative");
    if (!(c.pos_gain > 0 && c.yaw_gain > 0 && c.yaw_rate_max > 0 && c.max_speed > 0)) fail("gains must be positive");
}

Vec2 desired_position(const Vec2& target, const Vec2& box_center, double d_des, GoalSide side) {
    const double psi = geom::angle_about(target, box_center);
    const Vec2 ray = geom::unit(psi);
    return side == GoalSide::beyond_target ? Vec2(target - d_des * ray) : Vec2(target + d_des * ray);
}

double yaw_setpoint(const Vec2& target, const Vec2& box_center, double fallback) {
    if ((box_center - target).norm() == 0.0) return fallback;
    return geom::angle_about(target, box_center);
}

qp::QpProblem assemble_qp(const DvbState& state, const Vec2& goal, const fields::Plan2& f_ext,
                          const DvbPlannerConfig& cfg) {
    const std::size_t H = cfg.H;
    if (f_ext.size() != H) throw Error("assemble_qp: external input length differs from H");
    const auto n = static_cast<Eigen::Index>(2 * H);
    const Matrix S = integrator(H, cfg.dt);
    const Vector Wu = repeat(cfg.omega_u, H);
    const Vector Wx = repeat(cfg.omega_x, H);
    const Vector drift = repeat(state.center, H) + S * stack(f_ext);

    qp::QpProblem p;
    p.P = 2.0 * (Matrix(Wu.asDiagonal()) + S.transpose() * Wx.asDiagonal() * S);
    p.P = 0.5 * (p.P + p.P.transpose());
    p.q = 2.0 * S.transpose() * Wx.asDiagonal() * (drift - repeat(goal, H));
    p.A.resize(2 * n, n);
    p.A << Matrix::Identity(n, n), S;
    p.l.resize(2 * n);
    p.u.resize(2 * n);
    p.l << repeat(cfg.u_min, H), repeat(cfg.x_min, H) - drift;
    p.u << repeat(cfg.u_max, H), repeat(cfg.x_max, H) - drift;
    return p;
}

FieldHorizon field_horizon(const DvbState& state, const DvbMemory& memory, std::size_t H) {
    FieldHorizon h{fields::Plan2(H, state.center), std::vector<double>(H, state.r)};
    if (!memory.prev_plan || memory.prev_plan->states.empty()) return h;
    const auto& prev = memory.prev_plan->states;
    for (std::size_t n = 1; n < H; ++n) {
        const auto& s = prev[std::min(n + 1, prev.size() - 1)];
        h.positions[n] = s.center;
        h.r[n] = s.r;
    }
    return h;
}

fields::Plan2 external_inputs(const DvbState& state, const Vec2& target,
                              const std::vector<fields::ObstacleState>& obstacles, const DvbMemory& memory,
                              const DvbPlannerConfig& cfg, const fields::FieldConfig& fcfg) {
    const std::size_t H = cfg.H;
    const auto hz = field_horizon(state, memory, H);

    std::vector<fields::ObstacleState> dyn, sta;
    std::vector<fields::Plan2> dyn_plans;
    for (const auto& o : obstacles) {
        if (o.kind == fields::ObstacleKind::dynamic_obstacle) {
            dyn.push_back(o);
            dyn_plans.push_back(fields::predict_constant_velocity(o, H, cfg.dt));
        } else {
            sta.push_back(o);
        }
    }
    auto with_target = sta;
    with_target.push_back({kTargetId, fields::ObstacleKind::static_obstacle, target, Vec2::Zero(), fcfg.target_radius});

    const auto f_dyn = fields::dynamic_repulsion(hz.positions, dyn, dyn_plans, fcfg, hz.r);
    const auto f_sta = fields::static_repulsion(hz.positions, with_target, fcfg, hz.r);
    fields::Plan2 f_ang(H, Vec2::Zero());
    for (std::size_t n = 0; n < H; ++n) {
        if ((hz.positions[n] - target).norm() > 0.0)
            f_ang[n] = fields::approach_angle_force(hz.positions[n], target, sta, fcfg);
    }
    return fields::total_external_input(f_dyn, f_sta, f_ang, memory.prev_f, fcfg);
}

PlanResult plan(const DvbState& state, const Vec2& target, const std::vector<fields::ObstacleState>& obstacles,
                const DvbMemory& memory, const DvbPlannerConfig& cfg, const fields::FieldConfig& fcfg) {
    const std::size_t H = cfg.H;
    PlanResult out;
    DvbPlan& pl = out.plan;
    pl.goal = (state.center - target).norm() > 0.0 ? desired_position(target, state.center, cfg.d_des, cfg.goal_side)
                                                   : state.center;
    pl.external_inputs = external_inputs(state, target, obstacles, memory, cfg, fcfg);

    const auto problem = assemble_qp(state, pl.goal, pl.external_inputs, cfg);
    std::optional<qp::QpSolution> warm;
    if (memory.warm) warm = shifted(*memory.warm, H);
    const auto sol = qp::solve(problem, cfg.qp, warm ? &*warm : nullptr);
    pl.status = sol.status;
    pl.iterations = sol.iterations;
    pl.solve_time = sol.solve_time;
    pl.controls.assign(H, Vec2::Zero());
    if (sol.solved()) {
        for (std::size_t n = 0; n < H; ++n) {
            const Vec2 u = sol.x.segment<2>(static_cast<Eigen::Index>(2 * n));
            pl.controls[n] = u.cwiseMax(cfg.u_min).cwiseMin(cfg.u_max);
        }
    } else {
        pl.fallback = true;
    }

    pl.states.resize(H + 1);
    pl.states[0] = state;
    for (std::size_t n = 0; n < H; ++n) {
        DvbState next = pl.states[n];
        next.center = pl.states[n].center + cfg.dt * (pl.controls[n] + pl.external_inputs[n]);
        const auto d = fields::deform_width(pl.states[n].width, pl.external_inputs[n], fcfg, state.length);
        next.width = d.w;
        next.r = d.r;
        next.yaw = yaw_step(pl.states[n].yaw, yaw_setpoint(target, next.center, pl.states[n].yaw), cfg, cfg.dt);
        pl.states[n + 1] = next;
    }

    out.memory.prev_plan = pl;
    out.memory.prev_f = pl.external_inputs;
    if (sol.solved()) out.memory.warm = sol;
    return out;
}

DvbState track_pose(const DvbState& state, const DvbPlan& plan, const Vec2& target, const DvbPlannerConfig& cfg,
                    double dt) {
    if (plan.states.size() < 2) throw Error("track_pose: plan has no step 1");
    const DvbState& ref = plan.states[1];
    DvbState out = state;
    out.center = state.center + clamp_norm(cfg.pos_gain * dt * (ref.center - state.center), cfg.max_speed * dt);
    out.yaw = yaw_step(state.yaw, yaw_setpoint(target, out.center, state.yaw), cfg, dt);
    out.width = ref.width;
    out.r = ref.r;
    return out;
}

}  // namespace mmt::dvb
