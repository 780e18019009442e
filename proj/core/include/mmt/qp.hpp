#pragma once
// Dense operator-splitting (ADMM) solver for convex QPs
//
//     minimize    0.5 x'Px + q'x
//     subject to  l <= Ax <= u
//
// The iteration follows the OSQP scheme: Ruiz equilibration, a single
// Cholesky factorization of P + sigma I + A' R A per rho value, adaptive
// rho, relaxation, infeasibility certificates on the iterate differences,
// and an optional active-set polishing step. Problems here are small
// (tens of variables), so everything is dense.

#include <Eigen/Core>

#include <iosfwd>
#include <limits>

namespace mmt::qp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct QpProblem {
    Matrix P;  // n x n, symmetric PSD
    Vector q;  // n
    Matrix A;  // m x n
    Vector l;  // m, -inf allowed
    Vector u;  // m, +inf allowed

    [[nodiscard]] Eigen::Index num_vars() const noexcept { return q.size(); }
    [[nodiscard]] Eigen::Index num_constraints() const noexcept { return l.size(); }
};

struct QpSettings {
    double rho{0.1};
    double sigma{1e-6};
    double alpha{1.6};
    double eps_abs{1e-6};
    double eps_rel{1e-6};
    double eps_prim_inf{1e-5};
    double eps_dual_inf{1e-5};
    int max_iter{4000};
    bool warm_start{true};
    bool scaling{true};
    int scaling_iter{10};
    bool adaptive_rho{true};
    int adaptive_rho_interval{25};
    bool polish{true};
};

enum class QpStatus { solved, max_iter, primal_infeasible, dual_infeasible };

[[nodiscard]] const char* to_string(QpStatus s) noexcept;

struct QpSolution {
    Vector x;
    Vector y;
    QpStatus status{QpStatus::max_iter};
    int iterations{0};
    double solve_time{0.0};  // seconds, wall clock
    bool polished{false};
    double primal_residual{0.0};
    double dual_residual{0.0};

    [[nodiscard]] bool solved() const noexcept { return status == QpStatus::solved; }
};

/// Throws QpError on inconsistent dimensions, asymmetric P, l > u, non-finite data.
void validate(const QpProblem& problem);

/// Solves `problem`. `warm` (same dimensions) seeds the primal and dual iterates
/// when settings.warm_start is set. Throws QpError on malformed or non-convex input.
[[nodiscard]] QpSolution solve(const QpProblem& problem, const QpSettings& settings = {},
                               const QpSolution* warm = nullptr);

/// ||Ax - clamp(Ax, l, u)||_inf.
[[nodiscard]] double primal_violation(const QpProblem& problem, const Vector& x);

/// Plain-text dump of (P, q, A, l, u) for offline inspection.
void write_problem(std::ostream& os, const QpProblem& problem);

}  // namespace mmt::qp
