#pragma once
// Independent reference for the roll planner on a box centred on the payload.
// Minimal roll per step by bisection on the closed-form projected half-width,
// then the exact horizon optimum of the roll cost above those minima via the
// active-set oracle.

#include "support/qp_oracle.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace mmt::test {

/// Projected half-width of a W x T cross-section rolled by phi (phi past the peak).
inline double rolled_half_width(double W, double T, double phi) { return 0.5 * (W * std::cos(phi) + T * std::sin(phi)); }

/// Smallest roll in [atan(T/W), phi_max] whose projection fits a box of width w.
inline double bisect_min_roll(double W, double T, double w, double phi_max) {
    double lo = std::atan2(T, W), hi = phi_max;
    if (rolled_half_width(W, T, lo) <= 0.5 * w) {
        // Fits at the peak, so it fits everywhere below it too.
        return rolled_half_width(W, T, 0.0) <= 0.5 * w ? 0.0 : lo;
    }
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (rolled_half_width(W, T, mid) <= 0.5 * w ? hi : lo) = mid;
    }
    return hi;
}

struct RollOracle {
    std::vector<double> phi;  // steps 1..H
    bool converged{false};
};

/// min sum w1 phi(n)^2 + w2 omega(n)^2, phi(n) = phi0 + dt sum omega, req <= phi <= phi_max,
/// omega bounds. `start` must be feasible.
inline RollOracle roll_qp_oracle(double phi0, const std::vector<double>& req, double dt, double w1, double w2,
                                 double phi_max, double om_min, double om_max, const Eigen::VectorXd& start) {
    const auto H = static_cast<Eigen::Index>(req.size());
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(H, H);
    for (Eigen::Index n = 0; n < H; ++n)
        for (Eigen::Index k = 0; k <= n; ++k) S(n, k) = dt;
    const Eigen::MatrixXd P = 2.0 * (w1 * S.transpose() * S + w2 * Eigen::MatrixXd::Identity(H, H));
    const Eigen::VectorXd q = 2.0 * w1 * S.transpose() * Eigen::VectorXd::Constant(H, phi0);
    Eigen::MatrixXd G(4 * H, H);
    Eigen::VectorXd h(4 * H);
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(H, H);
    G << -S, S, I, -I;
    for (Eigen::Index n = 0; n < H; ++n) {
        h(n) = phi0 - req[static_cast<std::size_t>(n)];
        h(H + n) = phi_max - phi0;
        h(2 * H + n) = om_max;
        h(3 * H + n) = -om_min;
    }
    const auto r = active_set_qp(P, q, Eigen::MatrixXd(0, H), Eigen::VectorXd(0), G, h, start);
    RollOracle out;
    out.converged = r.converged;
    const Eigen::VectorXd phi = Eigen::VectorXd::Constant(H, phi0) + S * r.x;
    out.phi.assign(phi.data(), phi.data() + H);
    return out;
}

/// Random roll-requirement profile with increments small enough for the rate limit.
struct WidthProfile {
    double phi0;
    std::vector<double> widths;  // box widths for steps 1..H
    std::vector<double> req;     // minimal roll per step
};

inline WidthProfile random_profile(std::mt19937_64& rng, std::size_t H, double W, double T, double dt,
                                   double om_max, double phi_max) {
    std::uniform_real_distribution<double> start(0.1, 1.0), inc(-1.0, 1.0);
    WidthProfile p;
    double cur = start(rng);
    p.phi0 = cur;
    for (std::size_t n = 0; n < H; ++n) {
        cur = std::clamp(cur + 0.8 * dt * om_max * inc(rng), 0.08, phi_max - 0.05);
        p.widths.push_back(2.0 * rolled_half_width(W, T, cur));
        p.req.push_back(bisect_min_roll(W, T, p.widths.back(), phi_max));
    }
    return p;
}

}  // namespace mmt::test
