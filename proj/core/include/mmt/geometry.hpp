#pragma once
// Planar and spatial primitives shared by the planners.
//
// Conventions: angles are radians normalized to (-pi, pi]; a rectangle's
// length axis is its body x-axis (along yaw), width is the body y-axis.

#include <Eigen/Core>

#include <array>
#include <numbers>
#include <vector>

namespace mmt::geom {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = std::numbers::pi;

/// Wraps an angle into (-pi, pi].
[[nodiscard]] double normalize_angle(double a) noexcept;

/// Signed smallest difference a - b, in (-pi, pi].
[[nodiscard]] inline double angle_diff(double a, double b) noexcept { return normalize_angle(a - b); }

[[nodiscard]] Mat2 rot2(double yaw) noexcept;

/// Unit vector at angle `a`.
[[nodiscard]] inline Vec2 unit(double a) noexcept { return {std::cos(a), std::sin(a)}; }

struct OrientedRect {
    Vec2 center{Vec2::Zero()};
    double yaw{0.0};
    double half_length{0.5};
    double half_width{0.5};

    OrientedRect() = default;
    /// Throws GeometryError unless both half extents are positive and finite.
    OrientedRect(Vec2 c, double yaw, double half_length, double half_width);

    /// Point expressed in the rectangle's body frame.
    [[nodiscard]] Vec2 to_body(const Vec2& p) const;
    [[nodiscard]] Vec2 to_world(const Vec2& body) const;
    /// Body-frame componentwise membership test with tolerance `tol`.
    [[nodiscard]] bool contains(const Vec2& p, double tol = 0.0) const;
    /// Corners counter-clockwise starting at (+l, +w).
    [[nodiscard]] std::array<Vec2, 4> corners() const;
};

struct Halfplane {
    Vec2 normal;    // unit length
    double offset;  // normal . x <= offset
};

/// Intersection of half-planes, Reg x <= b, with unit-norm rows.
struct HalfplaneSet {
    std::vector<Halfplane> rows;

    /// Per-row slack b - n.x; all >= 0 iff the point is inside.
    [[nodiscard]] std::vector<double> slack(const Vec2& p) const;
    [[nodiscard]] double min_slack(const Vec2& p) const;
    [[nodiscard]] bool contains(const Vec2& p, double tol = 0.0) const { return min_slack(p) >= -tol; }
};

struct RigidTransform3 {
    Mat3 rotation{Mat3::Identity()};
    Vec3 translation{Vec3::Zero()};

    RigidTransform3() = default;
    /// Throws GeometryError if `r` is not a proper rotation within 1e-9.
    RigidTransform3(const Mat3& r, const Vec3& t);

    /// Rotation roll about body x, then yaw about world z: R = Rz(yaw) * Rx(roll).
    [[nodiscard]] static RigidTransform3 from_yaw_roll(double yaw, double roll, const Vec3& t);

    [[nodiscard]] Vec3 apply(const Vec3& v) const { return rotation * v + translation; }
};

/// Four rows, one per rectangle side, outward unit normals.
[[nodiscard]] HalfplaneSet rect_to_halfplanes(const OrientedRect& rect);

[[nodiscard]] inline Vec3 transform_point(const RigidTransform3& t, const Vec3& v) { return t.apply(v); }

/// Drops the vertical component.
[[nodiscard]] inline Vec2 project_to_plane(const Vec3& v) { return v.head<2>(); }

/// Four-quadrant angle of `point` about `center`, in (-pi, pi].
/// Throws GeometryError when the two coincide.
[[nodiscard]] double angle_about(const Vec2& center, const Vec2& point);

/// Shrinks both half extents by `margin`; throws GeometryError if either becomes <= 0.
[[nodiscard]] OrientedRect undilate_rect(const OrientedRect& rect, double margin);

/// Deterministic unit direction used when two positions coincide.
[[nodiscard]] Vec2 fallback_direction(std::size_t id) noexcept;

}  // namespace mmt::geom
