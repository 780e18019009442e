#include "mmt/formation_planner.hpp"

#include "mmt/error.hpp"
#include "mmt/fields.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <string>

namespace mmt::formation {

namespace {

using qp::Matrix;
using qp::Vector;

struct Interval {
    double lo, hi;
};

struct BodyRect {
    Interval x, y;
};

geom::OrientedRect to_world(const geom::OrientedRect& box, const BodyRect& b) {
    const Vec2 mid{0.5 * (b.x.lo + b.x.hi), 0.5 * (b.y.lo + b.y.hi)};
    return {box.to_world(mid), box.yaw, 0.5 * (b.x.hi - b.x.lo), 0.5 * (b.y.hi - b.y.lo)};
}

BodyRect grid_body(const geom::OrientedRect& box, std::size_t K, std::size_t k) {
    const std::size_t cols = (K + 1) / 2;
    const double cw = 2.0 * box.half_length / static_cast<double>(cols);
    const double x0 = -box.half_length + cw * static_cast<double>(k / 2);
    BodyRect r{{x0, x0 + cw}, {-box.half_width, box.half_width}};
    if (!(K % 2 == 1 && k == K - 1)) {
        if (k % 2 == 0) r.y.hi = 0.0;
        else r.y.lo = 0.0;
    }
    return r;
}

Vector repeat(const Vec2& v, std::size_t H) {
    Vector out(static_cast<Eigen::Index>(2 * H));
    for (std::size_t i = 0; i < H; ++i) out.segment<2>(static_cast<Eigen::Index>(2 * i)) = v;
    return out;
}

Matrix integrator(std::size_t H, double dt) {
    const auto n = static_cast<Eigen::Index>(2 * H);
    Matrix S = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(H); ++i)
        for (Eigen::Index j = 0; j <= i; ++j) S.block<2, 2>(2 * i, 2 * j) = dt * Eigen::Matrix2d::Identity();
    return S;
}

Vec2 control_limit(const Vec2& bound, const Vec2& f) { return f.norm() > 0.0 ? Vec2(0.5 * bound) : bound; }

}  // namespace

void validate(const FormationConfig& c) {
    auto fail = [](const char* what) { throw Error(std::string("formation config: ") + what); };
    if (c.H_r < 1) fail("H_r must be at least 1");
    if (!(c.dt > 0)) fail("dt must be positive");
    if (!(c.omega_a.minCoeff() > 0 && c.omega_x.minCoeff() >= 0)) fail("weights must be positive");
    if (!(c.u_min.maxCoeff() <= 0 && c.u_max.minCoeff() >= 0)) fail("control bounds must contain zero");
    if (!(c.x_min.x() < c.x_max.x() && c.x_min.y() < c.x_max.y())) fail("position bounds must be ordered");
    if (!(c.robot_radius > 0)) fail("robot_radius must be positive");
    if (!(c.elbow_influence >= 0)) fail("elbow_influence must be non-negative");
    if (!(c.reach_inner_frac >= 0 && c.reach_outer_frac > c.reach_inner_frac && c.reach_outer_frac <= 1.0))
        fail("reach fractions must satisfy 0 <= inner < outer <= 1");
    if (!(c.soft_weight > 0)) fail("soft_weight must be positive");
}

geom::OrientedRect grid_cell(const geom::OrientedRect& box, std::size_t K, std::size_t k) {
    if (K == 0 || k >= K) throw Error("grid_cell: robot index out of range");
    return to_world(box, grid_body(box, K, k));
}

ReachBand horizontal_reach(const kin::ManipulatorParams& arm, const FormationConfig& cfg, double dz) {
    const double L = arm.l2 + arm.l3;
    auto horiz = [dz](double d) { return std::sqrt(std::max(0.0, d * d - dz * dz)); };
    return {horiz(cfg.reach_inner_frac * L), horiz(cfg.reach_outer_frac * L)};
}

std::vector<RegionAssignment> partition_regions(const std::vector<dvb::DvbState>& boxes, const std::vector<double>& rolls,
                                                std::size_t K, const FormationConfig& cfg,
                                                const kin::ManipulatorParams& arm, const payload::PayloadModel& model) {
    if (K == 0) throw Error("partition_regions: K must be positive");
    if (boxes.size() < cfg.H_r + 1) throw Error("partition_regions: box plan shorter than H_r + 1");
    std::vector<RegionAssignment> out(K);
    for (std::size_t k = 0; k < K; ++k) out[k].k = k;
    for (std::size_t n = 0; n <= cfg.H_r; ++n) {
        const auto box = boxes[n].rect();
        const double roll = rolls.empty() ? 0.0 : rolls[std::min(n, rolls.size() - 1)];
        const payload::PayloadState ps{{box.center.x(), box.center.y(), model.h_P}, box.yaw, roll, 0.0};
        const auto grasps = kin::assign_grasps(model, ps, K);
        for (std::size_t k = 0; k < K; ++k) {
            BodyRect c = grid_body(box, K, k);
            const double m = cfg.robot_radius;
            c.x = {c.x.lo + m, c.x.hi - m};
            c.y = {c.y.lo + m, c.y.hi - m};

            const Vec2 g = box.to_body({grasps[k].x(), grasps[k].y()});
            const auto band = horizontal_reach(arm, cfg, grasps[k].z() - arm.base_mount_height);
            const double half = band.outer / std::sqrt(2.0);
            c.x = {std::max(c.x.lo, g.x() - half), std::min(c.x.hi, g.x() + half)};
            c.y = {std::max(c.y.lo, g.y() - half), std::min(c.y.hi, g.y() + half)};
            if (band.inner > 0.0) {
                if (K % 2 == 1 && k == K - 1) c.x.hi = std::min(c.x.hi, g.x() - band.inner);
                else if (k % 2 == 0) c.y.lo = std::max(c.y.lo, g.y() + band.inner);
                else c.y.hi = std::min(c.y.hi, g.y() - band.inner);
            }
            if (!(c.x.hi > c.x.lo && c.y.hi > c.y.lo)) {
                throw InfeasibleError("region of robot " + std::to_string(k) + " is empty at step " +
                                      std::to_string(n));
            }
            const auto rect = to_world(box, c);
            out[k].cells.push_back(rect);
            out[k].regions.push_back(geom::rect_to_halfplanes(rect));
            out[k].centers.push_back(rect.center);
        }
    }
    return out;
}

double elbow_influence(const FormationConfig& cfg, const kin::ManipulatorParams& arm) {
    return cfg.elbow_influence > 0.0 ? cfg.elbow_influence : std::max(arm.l2, arm.l3);
}

Vec2 elbow_repulsion(const std::vector<Vec3>& elbows, std::size_t k, const FormationConfig& cfg, double influence) {
    const double clamp = 0.5 * cfg.u_max.norm();
    Vec2 sum = Vec2::Zero();
    for (std::size_t j = 0; j < elbows.size(); ++j) {
        if (j == k) continue;
        const double d = (elbows[k] - elbows[j]).norm();
        const double mag = fields::cot_field_magnitude(d, 0.0, influence, clamp);
        if (mag == 0.0) continue;
        const Vec2 planar{elbows[k].x() - elbows[j].x(), elbows[k].y() - elbows[j].y()};
        const double pn = planar.norm();
        sum += mag * (pn > 0.0 ? Vec2(planar / pn) : geom::fallback_direction(j));
    }
    const double n = sum.norm();
    return n > clamp ? Vec2(sum * (clamp / n)) : sum;
}

const char* to_string(RobotStatus s) noexcept {
    switch (s) {
        case RobotStatus::solved: return "solved";
        case RobotStatus::soft: return "soft";
        case RobotStatus::failed: return "failed";
    }
    return "unknown";
}

qp::QpProblem assemble_robot_qp(const Vec2& x0, const RegionAssignment& a, const Vec2& f, const FormationConfig& cfg,
                                bool soft) {
    const std::size_t H = cfg.H_r;
    if (a.regions.size() < H + 1) throw Error("assemble_robot_qp: fewer regions than H_r + 1");
    const auto nu = static_cast<Eigen::Index>(2 * H);
    std::size_t rows_per = 0;
    for (std::size_t n = 1; n <= H; ++n) rows_per += a.regions[n].rows.size();
    const auto nr = static_cast<Eigen::Index>(rows_per);
    const Eigen::Index nv = nu + (soft ? nr : 0);

    const Matrix S = integrator(H, cfg.dt);
    const Vector Wx = repeat(cfg.omega_x, H);
    const Vector drift = repeat(x0, H) + S * repeat(f, H);
    Vector ref(nu);
    for (std::size_t n = 1; n <= H; ++n) ref.segment<2>(static_cast<Eigen::Index>(2 * (n - 1))) = a.centers[n];

    qp::QpProblem p;
    p.P = Matrix::Zero(nv, nv);
    p.P.topLeftCorner(nu, nu) = 2.0 * (Matrix(repeat(cfg.omega_a, H).asDiagonal()) + S.transpose() * Wx.asDiagonal() * S);
    p.P = 0.5 * (p.P + p.P.transpose());
    p.q = Vector::Zero(nv);
    p.q.head(nu) = 2.0 * S.transpose() * Wx.asDiagonal() * (drift - ref);
    if (soft) p.P.bottomRightCorner(nr, nr).diagonal().setConstant(2.0 * cfg.soft_weight);

    const Eigen::Index m = 2 * nu + nr + (soft ? nr : 0);
    p.A = Matrix::Zero(m, nv);
    p.l.resize(m);
    p.u.resize(m);
    p.A.topLeftCorner(nu, nu).setIdentity();
    p.l.head(nu) = repeat(control_limit(cfg.u_min, f), H);
    p.u.head(nu) = repeat(control_limit(cfg.u_max, f), H);
    p.A.block(nu, 0, nu, nu) = S;
    p.l.segment(nu, nu) = repeat(cfg.x_min, H) - drift;
    p.u.segment(nu, nu) = repeat(cfg.x_max, H) - drift;
    Eigen::Index i = 2 * nu;
    for (std::size_t n = 1; n <= H; ++n) {
        const auto blk = static_cast<Eigen::Index>(2 * (n - 1));
        for (const auto& row : a.regions[n].rows) {
            p.A.row(i).head(nu) = row.normal.transpose() * S.middleRows(blk, 2);
            if (soft) p.A(i, nu + (i - 2 * nu)) = -1.0;
            p.l(i) = -qp::kInf;
            p.u(i) = row.offset - row.normal.dot(drift.segment<2>(blk));
            ++i;
        }
    }
    if (soft) {
        p.A.bottomRightCorner(nr, nr).setIdentity();
        p.l.tail(nr).setZero();
        p.u.tail(nr).setConstant(qp::kInf);
    }
    return p;
}

RobotPlan plan_robot(const Vec2& x0, const RegionAssignment& a, const Vec2& f, const FormationConfig& cfg,
                     const RobotPlan* previous) {
    const std::size_t H = cfg.H_r;
    RobotPlan out;
    out.f = f;
    out.controls.assign(H, Vec2::Zero());

    std::optional<qp::QpSolution> warm;
    if (previous != nullptr && previous->solution) {
        warm = previous->solution;
        auto& x = warm->x;
        const auto nu = static_cast<Eigen::Index>(2 * H);
        if (x.size() >= nu && nu >= 4) {
            const Vector head = x.head(nu);
            x.head(nu - 2) = head.tail(nu - 2);
        }
    }

    qp::QpSolution sol;
    for (bool soft : {false, true}) {
        const auto problem = assemble_robot_qp(x0, a, f, cfg, soft);
        sol = qp::solve(problem, cfg.qp, warm ? &*warm : nullptr);
        out.iterations += sol.iterations;
        out.solve_time += sol.solve_time;
        if (sol.solved()) {
            out.status = soft ? RobotStatus::soft : RobotStatus::solved;
            if (soft) {
                const auto nu = static_cast<Eigen::Index>(2 * H);
                out.max_slack = sol.x.tail(sol.x.size() - nu).maxCoeff();
            }
            break;
        }
    }
    out.qp_status = sol.status;
    const Vec2 lo = control_limit(cfg.u_min, f), hi = control_limit(cfg.u_max, f);
    if (sol.solved()) {
        for (std::size_t n = 0; n < H; ++n) {
            const Vec2 u = sol.x.segment<2>(static_cast<Eigen::Index>(2 * n));
            out.controls[n] = u.cwiseMax(lo).cwiseMin(hi);
        }
        out.solution = sol;
    } else {
        out.status = RobotStatus::failed;
    }
    out.states.assign(1, x0);
    for (std::size_t n = 0; n < H; ++n) out.states.push_back(out.states.back() + cfg.dt * (out.controls[n] + f));
    return out;
}

std::vector<RobotPlan> plan_formation(const std::vector<Vec2>& bases, const std::vector<Vec3>& elbows,
                                      const std::vector<RegionAssignment>& regions, const FormationConfig& cfg,
                                      double influence, const std::vector<RobotPlan>* previous) {
    const std::size_t K = bases.size();
    if (regions.size() != K || elbows.size() != K) throw Error("plan_formation: per-robot inputs differ in size");
    auto one = [&](std::size_t k) {
        const Vec2 f = elbow_repulsion(elbows, k, cfg, influence);
        const RobotPlan* prev = previous != nullptr && previous->size() == K ? &(*previous)[k] : nullptr;
        try {
            return plan_robot(bases[k], regions[k], f, cfg, prev);
        } catch (const Error&) {
            RobotPlan failed;
            failed.f = f;
            failed.status = RobotStatus::failed;
            failed.controls.assign(cfg.H_r, Vec2::Zero());
            failed.states.assign(cfg.H_r + 1, bases[k]);
            return failed;
        }
    };
    std::vector<RobotPlan> out(K);
    if (cfg.parallel && K > 1) {
        std::vector<std::future<RobotPlan>> jobs;
        jobs.reserve(K);
        for (std::size_t k = 0; k < K; ++k) jobs.push_back(std::async(std::launch::async, one, k));
        for (std::size_t k = 0; k < K; ++k) out[k] = jobs[k].get();
    } else {
        for (std::size_t k = 0; k < K; ++k) out[k] = one(k);
    }
    return out;
}

}  // namespace mmt::formation
