#include "mmt/payload_planner.hpp"

#include "mmt/error.hpp"
#include "mmt/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mmt::payload {

namespace {

using qp::kInf;

constexpr double kElasticWeight = 1e4;

struct Step {
    geom::OrientedRect box;
    geom::HalfplaneSet region;
};

// Planar position of vertex v rolled by phi inside the box pose, and its roll derivative.
Vec2 vertex_at(const Step& s, const Vec3& v, double phi) {
    const double c = std::cos(phi), sn = std::sin(phi);
    return s.box.to_world({v.x(), v.y() * c - v.z() * sn});
}

Vec2 vertex_rate(const Step& s, const Vec3& v, double phi) {
    const double c = std::cos(phi), sn = std::sin(phi);
    return geom::rot2(s.box.yaw) * Vec2{0.0, -v.y() * sn - v.z() * c};
}

double step_min_slack(const PayloadModel& m, const Step& s, double phi) {
    double best = kInf;
    for (const auto& v : m.vertices) best = std::min(best, s.region.min_slack(vertex_at(s, v, phi)));
    return best;
}

// Nearest roll in [lo, hi] that satisfies containment, scanning away from `phi`.
double restore_step(const PayloadModel& m, const Step& s, double phi, double lo, double hi) {
    auto ok = [&](double p) { return step_min_slack(m, s, p) >= 0.0; };
    if (ok(phi)) return phi;
    constexpr int kScan = 200;
    for (double dir : {1.0, -1.0}) {
        const double end = dir > 0 ? hi : lo;
        double prev = phi;
        for (int i = 1; i <= kScan; ++i) {
            const double p = phi + (end - phi) * i / kScan;
            if (ok(p)) {
                double bad = prev, good = p;
                for (int b = 0; b < 80; ++b) {
                    const double mid = 0.5 * (bad + good);
                    (ok(mid) ? good : bad) = mid;
                }
                return good;
            }
            prev = p;
        }
    }
    return phi;
}

class RollSqp {
  public:
    RollSqp(const PayloadModel& m, double phi0, std::vector<Step> steps, const PayloadPlanConfig& cfg)
        : m_(m), phi0_(phi0), steps_(std::move(steps)), cfg_(cfg), H_(cfg.H_p) {
        S_ = qp::Matrix::Zero(H_, H_);
        for (std::size_t n = 0; n < H_; ++n)
            for (std::size_t k = 0; k <= n; ++k) S_(n, k) = cfg.dt;
        hess_ = 2.0 * (cfg.w1 * S_.transpose() * S_ + cfg.w2 * qp::Matrix::Identity(H_, H_));
    }

    qp::Vector rolls(const qp::Vector& w) const { return qp::Vector::Constant(H_, phi0_) + S_ * w; }

    double objective(const qp::Vector& w) const {
        return cfg_.w1 * rolls(w).squaredNorm() + cfg_.w2 * w.squaredNorm();
    }

    qp::Vector gradient(const qp::Vector& w) const {
        return 2.0 * cfg_.w1 * S_.transpose() * rolls(w) + 2.0 * cfg_.w2 * w;
    }

    double slack(const qp::Vector& phi, std::size_t n) const { return step_min_slack(m_, steps_[n], phi(n)); }

    double violation(const qp::Vector& w) const {
        const auto phi = rolls(w);
        double v = 0.0;
        for (std::size_t n = 0; n < H_; ++n) v += std::max(0.0, -slack(phi, n));
        return v;
    }

    double merit(const qp::Vector& w) const { return objective(w) + cfg_.penalty * violation(w); }

    // Linearized containment rows that can become active inside the trust box:
    // g * dphi(n) >= -s. Duplicates (vertices sharing a body y) are dropped.
    struct LinRow {
        Eigen::Index n;
        double g, s;
    };

    std::vector<LinRow> linear_rows(const qp::Vector& phi, const qp::Vector& lo, const qp::Vector& hi) const {
        std::vector<LinRow> out;
        for (Eigen::Index n = 0; n < phi.size(); ++n) {
            const auto& st = steps_[static_cast<std::size_t>(n)];
            for (const auto& v : m_.vertices) {
                const Vec2 p = vertex_at(st, v, phi(n));
                const Vec2 dp = vertex_rate(st, v, phi(n));
                for (const auto& hp : st.region.rows) {
                    const double s = hp.offset - hp.normal.dot(p);
                    const double g = -hp.normal.dot(dp);
                    if (s + std::min(g * lo(n), g * hi(n)) > 0.0) continue;
                    const bool dup = std::any_of(out.begin(), out.end(), [&](const LinRow& r) {
                        return r.n == n && std::abs(r.g - g) <= 1e-12 && std::abs(r.s - s) <= 1e-12;
                    });
                    if (!dup) out.push_back({n, g, s});
                }
            }
        }
        return out;
    }

    // QP in dw (hard) or (dw, t) with quadratic elastic slacks t >= 0 per step.
    // Returns false if the QP solver fails.
    bool subproblem(const qp::Vector& w, bool elastic, qp::Vector& dw, qp::Vector& t) const {
        const auto H = static_cast<Eigen::Index>(H_);
        const Eigen::Index nv = elastic ? 2 * H : H;
        const auto phi = rolls(w);
        qp::Vector lo(H), hi(H);
        for (Eigen::Index n = 0; n < H; ++n) {
            lo(n) = std::min(0.0, std::max(cfg_.phi_min - phi(n), -cfg_.trust_region));
            hi(n) = std::max(0.0, std::min(cfg_.phi_max - phi(n), cfg_.trust_region));
        }
        const auto rows = linear_rows(phi, lo, hi);
        const Eigen::Index m = (elastic ? 3 : 2) * H + static_cast<Eigen::Index>(rows.size());
        qp::QpProblem P;
        P.P = qp::Matrix::Zero(nv, nv);
        P.P.topLeftCorner(H, H) = hess_;
        P.q = qp::Vector::Zero(nv);
        P.q.head(H) = gradient(w);
        P.A = qp::Matrix::Zero(m, nv);
        P.l.resize(m);
        P.u.resize(m);
        for (Eigen::Index n = 0; n < H; ++n) {
            P.A(n, n) = 1.0;
            P.l(n) = cfg_.omega_min - w(n);
            P.u(n) = cfg_.omega_max - w(n);
            P.A.row(H + n).head(H) = S_.row(n);
            P.l(H + n) = lo(n);
            P.u(H + n) = hi(n);
        }
        Eigen::Index i = 2 * H;
        if (elastic) {
            P.P.bottomRightCorner(H, H).diagonal().setConstant(2.0 * kElasticWeight);
            for (Eigen::Index n = 0; n < H; ++n, ++i) {
                P.A(i, H + n) = 1.0;
                P.l(i) = 0.0;
                P.u(i) = kInf;
            }
        }
        for (const auto& r : rows) {
            P.A.row(i).head(H) = r.g * S_.row(r.n);
            if (elastic) P.A(i, H + r.n) = 1.0;
            P.l(i) = -r.s;
            P.u(i) = kInf;
            ++i;
        }
        qp::QpSettings qs;
        qs.eps_abs = 1e-8;
        qs.eps_rel = 1e-8;
        const auto sol = qp::solve(P, qs);
        if (!sol.solved()) return false;
        dw = sol.x.head(H);
        t = elastic ? qp::Vector(sol.x.tail(H).cwiseMax(0.0)) : qp::Vector::Zero(H);
        // Keep the rates feasible exactly.
        for (Eigen::Index n = 0; n < H; ++n) dw(n) = std::clamp(w(n) + dw(n), cfg_.omega_min, cfg_.omega_max) - w(n);
        return true;
    }

    RollPlan run(qp::Vector w) {
        RollPlan out;
        double M = merit(w);
        out.merit_trace.push_back(M);
        out.objective_trace.push_back(objective(w));
        bool converged = false;
        int it = 0;
        for (; it < cfg_.sqp_max_iter; ++it) {
            qp::Vector dw, t;
            if (!subproblem(w, false, dw, t) && !subproblem(w, true, dw, t)) break;
            const double pred = -(gradient(w).dot(dw) + 0.5 * dw.dot(hess_ * dw)) +
                                cfg_.penalty * (violation(w) - t.sum());
            if (pred <= cfg_.sqp_tol * (1.0 + std::abs(M)) || dw.lpNorm<Eigen::Infinity>() <= 1e-12) {
                converged = true;
                break;
            }
            double alpha = 1.0;
            bool accepted = false;
            for (int ls = 0; ls < 30; ++ls, alpha *= 0.5) {
                const qp::Vector trial = w + alpha * dw;
                const double Mt = merit(trial);
                if (Mt <= M - 1e-4 * alpha * pred) {
                    w = trial;
                    M = Mt;
                    accepted = true;
                    break;
                }
            }
            if (!accepted) {
                converged = true;  // no further decrease available from this model
                break;
            }
            out.merit_trace.push_back(M);
            out.objective_trace.push_back(objective(w));
        }
        out.iterations = it;
        const auto phi = rolls(w);
        out.phi.assign(1, phi0_);
        for (Eigen::Index n = 0; n < phi.size(); ++n) out.phi.push_back(phi(n));
        out.omega.assign(w.data(), w.data() + w.size());
        out.min_residual = kInf;
        for (std::size_t n = 0; n < H_; ++n) out.min_residual = std::min(out.min_residual, slack(phi, n));
        if (out.min_residual < -1e-6) out.status = RollStatus::infeasible;
        else out.status = converged ? RollStatus::converged : RollStatus::max_iter;
        return out;
    }

    qp::Vector initial(const RollPlan* warm) const {
        const auto H = static_cast<Eigen::Index>(H_);
        qp::Vector w = qp::Vector::Zero(H);
        if (warm != nullptr && !warm->omega.empty()) {
            for (Eigen::Index n = 0; n < H; ++n) {
                const auto src = std::min<std::size_t>(static_cast<std::size_t>(n) + 1, warm->omega.size() - 1);
                w(n) = warm->omega[src];
            }
        }
        // Move each roll onto the nearest feasible value, then re-integrate the rates.
        double prev = phi0_;
        for (Eigen::Index n = 0; n < H; ++n) {
            double target = std::clamp(prev + cfg_.dt * w(n), cfg_.phi_min, cfg_.phi_max);
            target = restore_step(m_, steps_[static_cast<std::size_t>(n)], target, cfg_.phi_min, cfg_.phi_max);
            w(n) = std::clamp((target - prev) / cfg_.dt, cfg_.omega_min, cfg_.omega_max);
            const double next = std::clamp(prev + cfg_.dt * w(n), cfg_.phi_min, cfg_.phi_max);
            w(n) = (next - prev) / cfg_.dt;
            prev = next;
        }
        return w;
    }

  private:
    const PayloadModel& m_;
    double phi0_;
    std::vector<Step> steps_;
    const PayloadPlanConfig& cfg_;
    std::size_t H_;
    qp::Matrix S_;
    qp::Matrix hess_;
};

}  // namespace

PayloadModel PayloadModel::cuboid(double length, double width, double thickness, double h_P, std::size_t K,
                                  double inset) {
    if (!(length > 0 && width > 0 && thickness >= 0)) throw GeometryError("payload dimensions must be positive");
    if (K == 0) throw Error("payload needs at least one grasp");
    if (!(inset >= 0 && 2 * inset < std::min(length, width))) throw GeometryError("grasp inset too large");
    PayloadModel m;
    m.length = length;
    m.width = width;
    m.thickness = thickness;
    m.h_P = h_P;
    std::size_t i = 0;
    for (double sx : {1.0, -1.0})
        for (double sy : {1.0, -1.0})
            for (double sz : {1.0, -1.0}) m.vertices[i++] = {sx * length / 2, sy * width / 2, sz * thickness / 2};

    const std::size_t cols = (K + 1) / 2;
    const double ax = length / 2 - inset;
    const double ay = width / 2 - inset;
    for (std::size_t k = 0; k < K; ++k) {
        const std::size_t c = k / 2;
        const double x = cols == 1 ? 0.0 : -ax + 2.0 * ax * static_cast<double>(c) / static_cast<double>(cols - 1);
        if (K % 2 == 1 && k == K - 1) m.grasp_points_local.emplace_back(x, 0.0, 0.0);
        else m.grasp_points_local.emplace_back(x, k % 2 == 0 ? -ay : ay, 0.0);
    }
    return m;
}

void validate(const PayloadPlanConfig& c) {
    auto fail = [](const char* what) { throw Error(std::string("payload planner config: ") + what); };
    if (c.H_p < 1) fail("H_p must be at least 1");
    if (!(c.dt > 0)) fail("dt must be positive");
    if (!(c.w1 > 0 && c.w2 > 0)) fail("weights must be positive");
    if (!(c.phi_min <= 0 && c.phi_max > c.phi_min)) fail("roll limits must bracket zero and be ordered");
    if (!(c.omega_min < 0 && c.omega_max > 0)) fail("roll rate limits must bracket zero");
    if (c.sqp_max_iter < 1) fail("sqp_max_iter must be positive");
    if (!(c.trust_region > 0 && c.penalty > 0)) fail("trust region and penalty must be positive");
}

geom::RigidTransform3 payload_pose(const geom::OrientedRect& box, double h_P, double roll) {
    return geom::RigidTransform3::from_yaw_roll(box.yaw, roll, {box.center.x(), box.center.y(), h_P});
}

std::array<Vec2, 8> projected_vertices(const PayloadModel& model, const PayloadState& state) {
    const auto T = geom::RigidTransform3::from_yaw_roll(state.yaw, state.roll, state.center);
    std::array<Vec2, 8> out;
    for (std::size_t i = 0; i < 8; ++i) out[i] = geom::project_to_plane(geom::transform_point(T, model.vertices[i]));
    return out;
}

std::vector<double> containment_residuals(const std::array<Vec2, 8>& vertices, const geom::HalfplaneSet& region) {
    std::vector<double> out;
    out.reserve(8 * region.rows.size());
    for (const auto& v : vertices)
        for (const auto& r : region.rows) out.push_back(r.offset - r.normal.dot(v));
    return out;
}

double min_containment_slack(const PayloadModel& model, const geom::OrientedRect& box, double roll) {
    return step_min_slack(model, Step{box, geom::rect_to_halfplanes(box)}, roll);
}

const char* to_string(RollStatus s) noexcept {
    switch (s) {
        case RollStatus::converged: return "converged";
        case RollStatus::max_iter: return "max_iter";
        case RollStatus::infeasible: return "infeasible";
    }
    return "unknown";
}

RollPlan plan_roll(const PayloadModel& model, const PayloadState& current, const std::vector<geom::OrientedRect>& boxes,
                   const PayloadPlanConfig& cfg, const RollPlan* warm) {
    validate(cfg);
    if (boxes.size() < cfg.H_p + 1) throw Error("plan_roll: fewer boxes than H_p + 1");
    std::vector<Step> steps;
    steps.reserve(cfg.H_p);
    for (std::size_t n = 1; n <= cfg.H_p; ++n) steps.push_back({boxes[n], geom::rect_to_halfplanes(boxes[n])});
    const double phi0 = std::clamp(current.roll, cfg.phi_min, cfg.phi_max);
    RollSqp sqp(model, phi0, std::move(steps), cfg);
    return sqp.run(sqp.initial(warm));
}

}  // namespace mmt::payload
