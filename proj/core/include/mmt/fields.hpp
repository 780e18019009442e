#pragma once
// Artificial potential fields that enter the box MPC as external inputs.
//
// Every field shares the hyperbolic-cotangent magnitude profile: F_max
// inside d_min, a cot-shaped decay to exactly zero at d_max, zero beyond.

#include "mmt/geometry.hpp"

#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

namespace mmt::fields {

using geom::Vec2;

struct FieldConfig {
    double F_max{2.5};          // m/s, clamp for obstacle and angle fields
    double delta{1.8};          // m, d_max = d_min + delta for obstacle fields
    double kappa{0.5};          // share of the previous tick's input carried over
    double k_s{0.05};           // width loss per unit of field magnitude
    double k_e{0.01};           // width gain per unit of expansion field
    double r_min{1.3};          // m, scale limits
    double r_max{2.12};
    double width_min{0.0};      // m, absolute lower width limit (payload-derived)
    double F_max_e{1.0};        // clamp of the expansion field
    double expansion_floor{0.0};  // lower bound on the expansion field while r < r_max
    double angle_d_min{0.0};    // rad, approach-angle field
    double angle_d_max{std::numbers::pi / 3.0};
    double target_radius{0.0};  // m, the tracked target acts as a static obstacle of this radius
};

/// Throws mmt::Error listing the first violated relation.
void validate(const FieldConfig& cfg);

enum class ObstacleKind { static_obstacle, dynamic_obstacle };

struct ObstacleState {
    std::size_t id{0};
    ObstacleKind kind{ObstacleKind::static_obstacle};
    Vec2 position{Vec2::Zero()};
    Vec2 velocity{Vec2::Zero()};
    double radius{0.0};
};

using Plan2 = std::vector<Vec2>;

/// Magnitude profile. Continuous at d_max; clamped to F_max at and below d_min.
[[nodiscard]] double cot_field_magnitude(double d, double d_min, double d_max, double F_max);

/// Constant-velocity prediction of an obstacle over `steps` samples starting at n = 0.
[[nodiscard]] Plan2 predict_constant_velocity(const ObstacleState& obs, std::size_t steps, double dt);

/// Sum over obstacles of F(||x_B(n) - x_i(n)||) along the unit vector away from x_i(n).
/// `obstacle_plans[i]` is the horizon plan of `obstacles[i]`; the obstacle radius
/// is added to d_min = r_plan[n].
[[nodiscard]] Plan2 dynamic_repulsion(const Plan2& box_plan, const std::vector<ObstacleState>& obstacles,
                                      const std::vector<Plan2>& obstacle_plans, const FieldConfig& cfg,
                                      const std::vector<double>& r_plan);

/// Same field for fixed obstacle positions.
[[nodiscard]] Plan2 static_repulsion(const Plan2& box_plan, const std::vector<ObstacleState>& obstacles,
                                     const FieldConfig& cfg, const std::vector<double>& r_plan);

/// Lateral push keyed to the angular gap, about the target, between the box and
/// each static obstacle lying between the box and the target.
[[nodiscard]] Vec2 approach_angle_force(const Vec2& box_pos, const Vec2& target_pos,
                                        const std::vector<ObstacleState>& obstacles, const FieldConfig& cfg);

/// Sums the three fields, clamps to F_max, adds kappa * prev, clamps again.
[[nodiscard]] Plan2 total_external_input(const Plan2& f_dyn, const Plan2& f_sta, const Plan2& f_ang,
                                         const Plan2& prev, const FieldConfig& cfg);

/// Scale limits expressed as widths for a box of length `l_B`.
struct WidthLimits {
    double lo;
    double hi;
};
[[nodiscard]] WidthLimits width_limits(const FieldConfig& cfg, double l_B);

[[nodiscard]] inline double scale_of(double l_B, double w) { return 0.5 * std::hypot(l_B, w); }

/// Expansion field magnitude at scale r.
[[nodiscard]] double expansion_field(double r, const FieldConfig& cfg);

struct Deformation {
    double w;
    double r;
};

/// One width update: w' = w - k_s ||f|| + k_e f_e(r), clamped so r' stays in [r_min, r_max].
[[nodiscard]] Deformation deform_width(double w, const Vec2& f_total, const FieldConfig& cfg, double l_B);

}  // namespace mmt::fields
