#include "mmt/geometry.hpp"

#include "mmt/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace mmt {

namespace {
std::string join_problems(const std::vector<std::string>& problems) {
    std::ostringstream os;
    os << "scenario invalid";
    for (const auto& p : problems) os << "\n  - " << p;
    return os.str();
}
}  // namespace

ScenarioError::ScenarioError(std::vector<std::string> problems)
    : Error(join_problems(problems)), problems_(std::move(problems)) {}

}  // namespace mmt

namespace mmt::geom {

double normalize_angle(double a) noexcept {
    if (!std::isfinite(a)) return a;
    a = std::remainder(a, 2.0 * kPi);  // [-pi, pi]
    if (a <= -kPi) a += 2.0 * kPi;
    return a;
}

Mat2 rot2(double yaw) noexcept {
    const double c = std::cos(yaw), s = std::sin(yaw);
    Mat2 r;
    r << c, -s, s, c;
    return r;
}

OrientedRect::OrientedRect(Vec2 c, double yaw_, double hl, double hw)
    : center(std::move(c)), yaw(normalize_angle(yaw_)), half_length(hl), half_width(hw) {
    if (!(hl > 0.0) || !(hw > 0.0) || !std::isfinite(hl) || !std::isfinite(hw)) {
        throw GeometryError("oriented rectangle needs positive finite half extents");
    }
    if (!center.allFinite() || !std::isfinite(yaw)) throw GeometryError("oriented rectangle pose must be finite");
}

Vec2 OrientedRect::to_body(const Vec2& p) const { return rot2(yaw).transpose() * (p - center); }

Vec2 OrientedRect::to_world(const Vec2& body) const { return center + rot2(yaw) * body; }

bool OrientedRect::contains(const Vec2& p, double tol) const {
    const Vec2 b = to_body(p);
    return std::abs(b.x()) <= half_length + tol && std::abs(b.y()) <= half_width + tol;
}

std::array<Vec2, 4> OrientedRect::corners() const {
    return {to_world({half_length, half_width}), to_world({-half_length, half_width}),
            to_world({-half_length, -half_width}), to_world({half_length, -half_width})};
}

std::vector<double> HalfplaneSet::slack(const Vec2& p) const {
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r.offset - r.normal.dot(p));
    return out;
}

double HalfplaneSet::min_slack(const Vec2& p) const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& r : rows) m = std::min(m, r.offset - r.normal.dot(p));
    return m;
}

RigidTransform3::RigidTransform3(const Mat3& r, const Vec3& t) : rotation(r), translation(t) {
    const double orth = (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
    if (!(orth <= 1e-9) || std::abs(r.determinant() - 1.0) > 1e-9) {
        throw GeometryError("rotation must be orthonormal with determinant +1");
    }
}

RigidTransform3 RigidTransform3::from_yaw_roll(double yaw, double roll, const Vec3& t) {
    RigidTransform3 out;
    const double cy = std::cos(yaw), sy = std::sin(yaw);
    const double cr = std::cos(roll), sr = std::sin(roll);
    Mat3 rz, rx;
    rz << cy, -sy, 0, sy, cy, 0, 0, 0, 1;
    rx << 1, 0, 0, 0, cr, -sr, 0, sr, cr;
    out.rotation = rz * rx;
    out.translation = t;
    return out;
}

HalfplaneSet rect_to_halfplanes(const OrientedRect& rect) {
    const Vec2 ex = unit(rect.yaw);
    const Vec2 ey{-ex.y(), ex.x()};
    const double cx = ex.dot(rect.center), cy = ey.dot(rect.center);
    HalfplaneSet hs;
    hs.rows = {{ex, cx + rect.half_length},
               {-ex, -cx + rect.half_length},
               {ey, cy + rect.half_width},
               {-ey, -cy + rect.half_width}};
    return hs;
}

double angle_about(const Vec2& center, const Vec2& point) {
    const Vec2 d = point - center;
    if (d.x() == 0.0 && d.y() == 0.0) throw GeometryError("angle about a coincident point is undefined");
    return normalize_angle(std::atan2(d.y(), d.x()));
}

OrientedRect undilate_rect(const OrientedRect& rect, double margin) {
    if (margin < 0.0) throw GeometryError("undilation margin must be non-negative");
    const double hl = rect.half_length - margin;
    const double hw = rect.half_width - margin;
    if (hl <= 0.0 || hw <= 0.0) throw GeometryError("undilated region is empty");
    return OrientedRect(rect.center, rect.yaw, hl, hw);
}

Vec2 fallback_direction(std::size_t id) noexcept {
    // Fibonacci hashing spreads consecutive ids over the circle.
    const double golden = 0.6180339887498949;
    const double frac = std::fmod(static_cast<double>(id) * golden + 0.25, 1.0);
    return unit(2.0 * kPi * frac);
}

}  // namespace mmt::geom
