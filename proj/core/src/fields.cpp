#include "mmt/fields.hpp"

#include "mmt/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mmt::fields {

namespace {

constexpr double kHalfPi = std::numbers::pi / 2.0;

Vec2 clamp_norm(const Vec2& v, double limit) {
    const double n = v.norm();
    if (n >= limit && n > 0.0) return v * (limit / n);
    return v;
}

Vec2 away_from(const Vec2& from, const Vec2& to, std::size_t id, double& dist) {
    const Vec2 d = to - from;
    dist = d.norm();
    if (dist > 0.0) return d / dist;
    return geom::fallback_direction(id);
}

}  // namespace

void validate(const FieldConfig& c) {
    auto fail = [](const std::string& what) { throw Error("field config: " + what); };
    if (!(c.F_max > 0)) fail("F_max must be positive");
    if (!(c.delta > 0)) fail("delta must be positive");
    if (!(c.kappa > 0 && c.kappa < 1)) fail("kappa must lie in (0, 1)");
    if (!(c.k_e > 0)) fail("k_e must be positive");
    if (!(c.k_s > c.k_e)) fail("k_s must exceed k_e");
    if (!(c.r_min > 0)) fail("r_min must be positive");
    if (!(c.r_max > c.r_min)) fail("r_max must exceed r_min");
    if (!(c.width_min >= 0)) fail("width_min must be non-negative");
    if (!(c.F_max_e > 0)) fail("F_max_e must be positive");
    if (!(c.expansion_floor >= 0 && c.expansion_floor <= c.F_max_e)) fail("expansion_floor must lie in [0, F_max_e]");
    if (!(c.angle_d_max > c.angle_d_min && c.angle_d_min >= 0)) fail("angular field needs 0 <= d_min < d_max");
    if (!(c.target_radius >= 0)) fail("target_radius must be non-negative");
}

double cot_field_magnitude(double d, double d_min, double d_max, double F_max) {
    if (!(d_max > d_min)) throw Error("cot field needs d_max > d_min");
    if (d < d_min) return F_max;
    if (d >= d_max) return 0.0;
    const double span = d_max - d_min;
    const double z = kHalfPi * (d - d_min) / span;
    if (z <= 0.0) return F_max;
    const double value = kHalfPi * (1.0 / std::tan(z) + z - kHalfPi) / span;
    return std::clamp(value, 0.0, F_max);
}

Plan2 predict_constant_velocity(const ObstacleState& obs, std::size_t steps, double dt) {
    Plan2 plan(steps);
    for (std::size_t n = 0; n < steps; ++n) plan[n] = obs.position + static_cast<double>(n) * dt * obs.velocity;
    return plan;
}

Plan2 dynamic_repulsion(const Plan2& box_plan, const std::vector<ObstacleState>& obstacles,
                        const std::vector<Plan2>& obstacle_plans, const FieldConfig& cfg,
                        const std::vector<double>& r_plan) {
    const std::size_t H = box_plan.size();
    if (r_plan.size() != H || obstacle_plans.size() != obstacles.size()) {
        throw Error("dynamic_repulsion: horizon lengths differ");
    }
    Plan2 out(H, Vec2::Zero());
    for (std::size_t i = 0; i < obstacles.size(); ++i) {
        if (obstacle_plans[i].size() != H) throw Error("dynamic_repulsion: obstacle plan length differs");
        for (std::size_t n = 0; n < H; ++n) {
            double dist = 0.0;
            const Vec2 dir = away_from(obstacle_plans[i][n], box_plan[n], obstacles[i].id, dist);
            const double d_min = r_plan[n] + obstacles[i].radius;
            out[n] += cot_field_magnitude(dist, d_min, d_min + cfg.delta, cfg.F_max) * dir;
        }
    }
    return out;
}

Plan2 static_repulsion(const Plan2& box_plan, const std::vector<ObstacleState>& obstacles, const FieldConfig& cfg,
                       const std::vector<double>& r_plan) {
    std::vector<Plan2> fixed;
    fixed.reserve(obstacles.size());
    for (const auto& o : obstacles) fixed.emplace_back(box_plan.size(), o.position);
    return dynamic_repulsion(box_plan, obstacles, fixed, cfg, r_plan);
}

Vec2 approach_angle_force(const Vec2& box_pos, const Vec2& target_pos, const std::vector<ObstacleState>& obstacles,
                          const FieldConfig& cfg) {
    const double psi_box = geom::angle_about(target_pos, box_pos);
    const double box_range = (box_pos - target_pos).norm();
    const Vec2 tangent{-std::sin(psi_box), std::cos(psi_box)};
    Vec2 total = Vec2::Zero();
    for (const auto& o : obstacles) {
        const Vec2 rel = o.position - target_pos;
        if (rel.x() == 0.0 && rel.y() == 0.0) continue;
        if (rel.norm() >= box_range) continue;  // only obstacles on the approach side
        const double gap = geom::angle_diff(psi_box, std::atan2(rel.y(), rel.x()));
        const double mag = cot_field_magnitude(std::abs(gap), cfg.angle_d_min, cfg.angle_d_max, cfg.F_max);
        total += (gap >= 0.0 ? mag : -mag) * tangent;
    }
    return total;
}

Plan2 total_external_input(const Plan2& f_dyn, const Plan2& f_sta, const Plan2& f_ang, const Plan2& prev,
                           const FieldConfig& cfg) {
    const std::size_t H = f_dyn.size();
    if (f_sta.size() != H || f_ang.size() != H) throw Error("total_external_input: horizon lengths differ");
    Plan2 out(H);
    for (std::size_t n = 0; n < H; ++n) {
        Vec2 f = clamp_norm(f_dyn[n] + f_sta[n] + f_ang[n], cfg.F_max);
        if (n < prev.size()) f += cfg.kappa * prev[n];
        out[n] = clamp_norm(f, cfg.F_max);
    }
    return out;
}

WidthLimits width_limits(const FieldConfig& cfg, double l_B) {
    if (!(2.0 * cfg.r_max > l_B)) throw Error("r_max leaves no positive width for this box length");
    const double from_r = std::sqrt(std::max(0.0, 4.0 * cfg.r_min * cfg.r_min - l_B * l_B));
    const WidthLimits lim{std::max(cfg.width_min, from_r), std::sqrt(4.0 * cfg.r_max * cfg.r_max - l_B * l_B)};
    if (lim.lo > lim.hi) throw Error("width lower limit exceeds the r_max width");
    return lim;
}

double expansion_field(double r, const FieldConfig& cfg) {
    if (r >= cfg.r_max) return 0.0;
    return std::max(cot_field_magnitude(r, cfg.r_min, cfg.r_max, cfg.F_max_e), cfg.expansion_floor);
}

Deformation deform_width(double w, const Vec2& f_total, const FieldConfig& cfg, double l_B) {
    const auto lim = width_limits(cfg, l_B);
    const double r = scale_of(l_B, w);
    double w_next = w - cfg.k_s * f_total.norm() + cfg.k_e * expansion_field(r, cfg);
    w_next = std::clamp(w_next, lim.lo, lim.hi);
    return {w_next, scale_of(l_B, w_next)};
}

}  // namespace mmt::fields
