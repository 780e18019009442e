#include "mmt/qp.hpp"

#include "mmt/error.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>

namespace mmt::qp {

namespace {

constexpr double kMinScaling = 1e-4;
constexpr double kMaxScaling = 1e4;
constexpr double kRhoMin = 1e-6;
constexpr double kRhoMax = 1e6;
constexpr double kRhoEqFactor = 1e3;
constexpr double kInfBound = 1e20;  // treated as infinite
constexpr double kDivisionTol = 1e-30;

double inf_norm(const Vector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

double limit_scaling(double v) {
    if (v < kMinScaling) return 1.0;
    return std::min(v, kMaxScaling);
}

Vector clamp(const Vector& v, const Vector& lo, const Vector& hi) { return v.cwiseMax(lo).cwiseMin(hi); }

bool is_upper_inf(double u) { return u >= kInfBound; }
bool is_lower_inf(double l) { return l <= -kInfBound; }

// Scaled copy of the problem together with the scaling that produced it.
struct Scaled {
    Matrix P;
    Vector q;
    Matrix A;
    Vector l, u;
    Vector D, E, Dinv, Einv;
    double c{1.0}, cinv{1.0};
};

Scaled equilibrate(const QpProblem& pb, const QpSettings& s) {
    const auto n = pb.num_vars();
    const auto m = pb.num_constraints();
    Scaled sc{pb.P, pb.q, pb.A, pb.l, pb.u, Vector::Ones(n), Vector::Ones(m), {}, {}, 1.0, 1.0};
    if (s.scaling) {
        for (int it = 0; it < s.scaling_iter; ++it) {
            Vector d(n), e(m);
            for (Eigen::Index j = 0; j < n; ++j) {
                double nrm = sc.P.col(j).cwiseAbs().maxCoeff();
                if (m > 0) nrm = std::max(nrm, sc.A.col(j).cwiseAbs().maxCoeff());
                d(j) = 1.0 / std::sqrt(limit_scaling(nrm));
            }
            for (Eigen::Index i = 0; i < m; ++i) {
                const double nrm = n > 0 ? sc.A.row(i).cwiseAbs().maxCoeff() : 0.0;
                e(i) = 1.0 / std::sqrt(limit_scaling(nrm));
            }
            sc.P = d.asDiagonal() * sc.P * d.asDiagonal();
            sc.A = e.asDiagonal() * sc.A * d.asDiagonal();
            sc.q = d.cwiseProduct(sc.q);
            sc.D = sc.D.cwiseProduct(d);
            sc.E = sc.E.cwiseProduct(e);

            double mean_p = 0.0;
            for (Eigen::Index j = 0; j < n; ++j) mean_p += sc.P.col(j).cwiseAbs().maxCoeff();
            mean_p = n > 0 ? mean_p / static_cast<double>(n) : 0.0;
            const double cost = 1.0 / limit_scaling(std::max(mean_p, inf_norm(sc.q)));
            sc.P *= cost;
            sc.q *= cost;
            sc.c *= cost;
        }
    }
    for (Eigen::Index i = 0; i < m; ++i) {
        sc.l(i) = is_lower_inf(pb.l(i)) ? -kInf : pb.l(i) * sc.E(i);
        sc.u(i) = is_upper_inf(pb.u(i)) ? kInf : pb.u(i) * sc.E(i);
    }
    sc.Dinv = sc.D.cwiseInverse();
    sc.Einv = sc.E.cwiseInverse();
    sc.cinv = 1.0 / sc.c;
    return sc;
}

class Admm {
  public:
    Admm(const QpProblem& pb, const QpSettings& s) : pb_(pb), s_(s), sc_(equilibrate(pb, s)) {
        const auto m = pb.num_constraints();
        constraint_kind_.resize(m);
        for (Eigen::Index i = 0; i < m; ++i) {
            const bool lo_inf = is_lower_inf(pb.l(i)), up_inf = is_upper_inf(pb.u(i));
            if (lo_inf && up_inf) constraint_kind_[i] = Kind::free;
            else if (!lo_inf && !up_inf && std::abs(pb.u(i) - pb.l(i)) < 1e-9) constraint_kind_[i] = Kind::equality;
            else constraint_kind_[i] = Kind::inequality;
        }
        rho_ = std::clamp(s.rho, kRhoMin, kRhoMax);
        refactor();
    }

    QpSolution run(const QpSolution* warm) {
        const auto n = pb_.num_vars();
        const auto m = pb_.num_constraints();
        Vector x = Vector::Zero(n), z = Vector::Zero(m), y = Vector::Zero(m);
        if (warm != nullptr && s_.warm_start && warm->x.size() == n && warm->y.size() == m) {
            x = sc_.Dinv.cwiseProduct(warm->x);
            y = sc_.c * sc_.Einv.cwiseProduct(warm->y);
            z = clamp(sc_.A * x, sc_.l, sc_.u);
        }

        QpSolution sol;
        sol.status = QpStatus::max_iter;
        Residuals res{};
        for (int iter = 1; iter <= s_.max_iter; ++iter) {
            const Vector rhs = s_.sigma * x - sc_.q + sc_.A.transpose() * (rho_vec_.cwiseProduct(z) - y);
            const Vector xt = llt_.solve(rhs);
            const Vector zt = sc_.A * xt;
            const Vector x_new = s_.alpha * xt + (1.0 - s_.alpha) * x;
            const Vector z_relax = s_.alpha * zt + (1.0 - s_.alpha) * z;
            const Vector z_new = clamp(z_relax + rho_inv_vec_.cwiseProduct(y), sc_.l, sc_.u);
            const Vector y_new = y + rho_vec_.cwiseProduct(z_relax - z_new);

            const Vector dx = x_new - x;
            const Vector dy = y_new - y;
            x = x_new;
            z = z_new;
            y = y_new;
            sol.iterations = iter;

            res = residuals(x, z, y);
            if (res.prim <= res.eps_prim && res.dual <= res.eps_dual) {
                sol.status = QpStatus::solved;
                break;
            }
            if (primal_infeasible(dy)) {
                sol.status = QpStatus::primal_infeasible;
                break;
            }
            if (dual_infeasible(dx)) {
                sol.status = QpStatus::dual_infeasible;
                break;
            }
            if (s_.adaptive_rho && s_.adaptive_rho_interval > 0 && iter % s_.adaptive_rho_interval == 0) {
                adapt_rho(res);
            }
        }

        sol.x = sc_.D.cwiseProduct(x);
        sol.y = sc_.cinv * sc_.E.cwiseProduct(y);
        sol.primal_residual = res.prim;
        sol.dual_residual = res.dual;
        if (sol.status == QpStatus::primal_infeasible || sol.status == QpStatus::dual_infeasible) {
            return sol;
        }
        if (s_.polish && sol.status == QpStatus::solved) polish(sol, sc_.Einv.cwiseProduct(z));
        return sol;
    }

  private:
    enum class Kind { free, equality, inequality };

    struct Residuals {
        double prim, dual, eps_prim, eps_dual, max_prim, max_dual;
    };

    void refactor() {
        const auto n = pb_.num_vars();
        const auto m = pb_.num_constraints();
        rho_vec_.resize(m);
        for (Eigen::Index i = 0; i < m; ++i) {
            switch (constraint_kind_[i]) {
                case Kind::free: rho_vec_(i) = kRhoMin; break;
                case Kind::equality: rho_vec_(i) = std::min(kRhoEqFactor * rho_, kRhoMax); break;
                case Kind::inequality: rho_vec_(i) = rho_; break;
            }
        }
        rho_inv_vec_ = rho_vec_.cwiseInverse();
        Matrix K = sc_.P + s_.sigma * Matrix::Identity(n, n);
        if (m > 0) K.noalias() += sc_.A.transpose() * rho_vec_.asDiagonal() * sc_.A;
        llt_.compute(K);
        if (llt_.info() != Eigen::Success) throw QpError("KKT factorization failed; P is not positive semidefinite");
    }

    Residuals residuals(const Vector& x, const Vector& z, const Vector& y) const {
        const Vector ax = sc_.Einv.cwiseProduct(sc_.A * x);
        const Vector zu = sc_.Einv.cwiseProduct(z);
        const Vector px = sc_.cinv * sc_.Dinv.cwiseProduct(sc_.P * x);
        const Vector aty = sc_.cinv * sc_.Dinv.cwiseProduct(sc_.A.transpose() * y);
        const Vector qu = sc_.cinv * sc_.Dinv.cwiseProduct(sc_.q);
        Residuals r{};
        r.prim = inf_norm(ax - zu);
        r.dual = inf_norm(px + qu + aty);
        r.max_prim = std::max(inf_norm(ax), inf_norm(zu));
        r.max_dual = std::max({inf_norm(px), inf_norm(aty), inf_norm(qu)});
        r.eps_prim = s_.eps_abs + s_.eps_rel * r.max_prim;
        r.eps_dual = s_.eps_abs + s_.eps_rel * r.max_dual;
        return r;
    }

    bool primal_infeasible(Vector dy) const {
        const auto m = dy.size();
        if (m == 0) return false;
        for (Eigen::Index i = 0; i < m; ++i) {
            if (std::isinf(sc_.u(i))) dy(i) = std::min(dy(i), 0.0);
            if (std::isinf(sc_.l(i))) dy(i) = std::max(dy(i), 0.0);
        }
        const double norm_dy = inf_norm(sc_.E.cwiseProduct(dy));
        if (norm_dy <= kDivisionTol) return false;
        double support = 0.0;
        for (Eigen::Index i = 0; i < m; ++i) {
            if (dy(i) > 0.0) support += sc_.u(i) * dy(i);
            else if (dy(i) < 0.0) support += sc_.l(i) * dy(i);
        }
        // Compare in unscaled units: E dy is proportional to the unscaled certificate.
        const double eps = s_.eps_prim_inf * norm_dy;
        if (!(support < -eps)) return false;
        return inf_norm(sc_.Dinv.cwiseProduct(sc_.A.transpose() * dy)) <= eps;
    }

    bool dual_infeasible(const Vector& dx) const {
        const double norm_dx = inf_norm(sc_.D.cwiseProduct(dx));
        if (norm_dx <= kDivisionTol) return false;
        const double eps = s_.eps_dual_inf * norm_dx;
        if (!(sc_.cinv * sc_.q.dot(dx) < -eps)) return false;
        if (inf_norm(sc_.cinv * sc_.Dinv.cwiseProduct(sc_.P * dx)) > eps) return false;
        const Vector adx = sc_.Einv.cwiseProduct(sc_.A * dx);
        for (Eigen::Index i = 0; i < adx.size(); ++i) {
            const bool lo_inf = std::isinf(sc_.l(i)), up_inf = std::isinf(sc_.u(i));
            if (lo_inf && up_inf) continue;
            if (!lo_inf && !up_inf && std::abs(adx(i)) > eps) return false;
            if (up_inf && !lo_inf && adx(i) < -eps) return false;
            if (lo_inf && !up_inf && adx(i) > eps) return false;
        }
        return true;
    }

    void adapt_rho(const Residuals& r) {
        const double prim = r.prim / (r.max_prim + kDivisionTol);
        const double dual = r.dual / (r.max_dual + kDivisionTol);
        if (dual <= kDivisionTol) return;
        const double rho_new = std::clamp(rho_ * std::sqrt(prim / dual), kRhoMin, kRhoMax);
        if (rho_new > 5.0 * rho_ || rho_new < 0.2 * rho_) {
            rho_ = rho_new;
            refactor();
        }
    }

    // Guess the active set from the ADMM iterate, solve the equality-constrained
    // KKT system with iterative refinement, and keep the result only if it is
    // at least as accurate and sign-consistent.
    void polish(QpSolution& sol, const Vector& z) const {
        const auto n = pb_.num_vars();
        const auto m = pb_.num_constraints();
        std::vector<Eigen::Index> rows;
        std::vector<double> rhs_b;
        std::vector<int> side;  // -1 lower, +1 upper, 0 equality
        for (Eigen::Index i = 0; i < m; ++i) {
            if (constraint_kind_[i] == Kind::equality) {
                rows.push_back(i);
                rhs_b.push_back(pb_.l(i));
                side.push_back(0);
            } else if (!is_lower_inf(pb_.l(i)) && z(i) - pb_.l(i) < -sol.y(i)) {
                rows.push_back(i);
                rhs_b.push_back(pb_.l(i));
                side.push_back(-1);
            } else if (!is_upper_inf(pb_.u(i)) && pb_.u(i) - z(i) < sol.y(i)) {
                rows.push_back(i);
                rhs_b.push_back(pb_.u(i));
                side.push_back(1);
            }
        }
        const auto na = static_cast<Eigen::Index>(rows.size());
        const double delta = 1e-9;
        Matrix K0 = Matrix::Zero(n + na, n + na);
        K0.topLeftCorner(n, n) = pb_.P;
        Vector rhs(n + na);
        rhs.head(n) = -pb_.q;
        for (Eigen::Index k = 0; k < na; ++k) {
            K0.block(n + k, 0, 1, n) = pb_.A.row(rows[k]);
            K0.block(0, n + k, n, 1) = pb_.A.row(rows[k]).transpose();
            rhs(n + k) = rhs_b[k];
        }
        Matrix Kd = K0;
        Kd.topLeftCorner(n, n).diagonal().array() += delta;
        Kd.bottomRightCorner(na, na).diagonal().array() -= delta;
        const Eigen::PartialPivLU<Matrix> lu(Kd);
        Vector sol_kkt = lu.solve(rhs);
        for (int refine = 0; refine < 3; ++refine) sol_kkt += lu.solve(rhs - K0 * sol_kkt);
        if (!sol_kkt.allFinite()) return;

        Vector x = sol_kkt.head(n);
        Vector y = Vector::Zero(m);
        for (Eigen::Index k = 0; k < na; ++k) {
            const double yk = sol_kkt(n + k);
            if (side[k] < 0 && yk > 1e-9) return;
            if (side[k] > 0 && yk < -1e-9) return;
            y(rows[k]) = yk;
        }
        const Vector ax = pb_.A * x;
        const double prim = inf_norm(ax - clamp(ax, pb_.l, pb_.u));
        const double dual = inf_norm(pb_.P * x + pb_.q + pb_.A.transpose() * y);
        if (prim <= sol.primal_residual + 1e-10 && dual <= sol.dual_residual + 1e-10) {
            sol.x = std::move(x);
            sol.y = std::move(y);
            sol.primal_residual = prim;
            sol.dual_residual = dual;
            sol.polished = true;
        }
    }

    const QpProblem& pb_;
    const QpSettings& s_;
    Scaled sc_;
    std::vector<Kind> constraint_kind_;
    double rho_{0.1};
    Vector rho_vec_, rho_inv_vec_;
    Eigen::LLT<Matrix> llt_;
};

}  // namespace

const char* to_string(QpStatus s) noexcept {
    switch (s) {
        case QpStatus::solved: return "solved";
        case QpStatus::max_iter: return "max_iter";
        case QpStatus::primal_infeasible: return "primal_infeasible";
        case QpStatus::dual_infeasible: return "dual_infeasible";
    }
    return "unknown";
}

void validate(const QpProblem& pb) {
    const auto n = pb.q.size();
    const auto m = pb.l.size();
    if (pb.P.rows() != n || pb.P.cols() != n) throw QpError("P must be n x n");
    if (pb.u.size() != m) throw QpError("l and u must have equal length");
    if (pb.A.rows() != m || (m > 0 && pb.A.cols() != n)) throw QpError("A must be m x n");
    if (!pb.P.allFinite() || !pb.q.allFinite() || !pb.A.allFinite()) throw QpError("P, q, A must be finite");
    const double scale = std::max(1.0, pb.P.cwiseAbs().maxCoeff());
    if (n > 0 && (pb.P - pb.P.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) {
        throw QpError("P must be symmetric");
    }
    for (Eigen::Index i = 0; i < m; ++i) {
        if (std::isnan(pb.l(i)) || std::isnan(pb.u(i))) throw QpError("bounds must not be NaN");
        if (pb.l(i) > pb.u(i)) throw QpError("lower bound exceeds upper bound at row " + std::to_string(i));
    }
}

QpSolution solve(const QpProblem& problem, const QpSettings& settings, const QpSolution* warm) {
    const auto t0 = std::chrono::steady_clock::now();
    validate(problem);
    if (!(settings.rho > 0) || !(settings.sigma > 0) || !(settings.alpha > 0 && settings.alpha < 2) ||
        !(settings.eps_abs > 0) || !(settings.eps_rel > 0) || settings.max_iter <= 0) {
        throw QpError("invalid solver settings");
    }
    const auto n = problem.num_vars();
    if (n > 0) {
        const double scale = std::max(1.0, problem.P.cwiseAbs().maxCoeff());
        const Eigen::SelfAdjointEigenSolver<Matrix> eig(problem.P, Eigen::EigenvaluesOnly);
        if (eig.eigenvalues().minCoeff() < -1e-9 * scale) throw QpError("P is not positive semidefinite");
    }
    QpSolution sol;
    if (n == 0) {
        sol.x = Vector::Zero(0);
        sol.y = Vector::Zero(problem.num_constraints());
        const bool ok = (problem.l.array() <= 0.0).all() && (problem.u.array() >= 0.0).all();
        sol.status = ok ? QpStatus::solved : QpStatus::primal_infeasible;
    } else {
        Admm admm(problem, settings);
        sol = admm.run(warm);
    }
    sol.solve_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return sol;
}

double primal_violation(const QpProblem& problem, const Vector& x) {
    if (problem.num_constraints() == 0) return 0.0;
    const Vector ax = problem.A * x;
    return inf_norm(ax - clamp(ax, problem.l, problem.u));
}

void write_problem(std::ostream& os, const QpProblem& pb) {
    const Eigen::IOFormat fmt(Eigen::FullPrecision, 0, " ", "\n");
    os << "# n " << pb.num_vars() << " m " << pb.num_constraints() << "\n";
    os << "P\n" << pb.P.format(fmt) << "\n";
    os << "q\n" << pb.q.transpose().format(fmt) << "\n";
    os << "A\n" << pb.A.format(fmt) << "\n";
    os << "l\n" << pb.l.transpose().format(fmt) << "\n";
    os << "u\n" << pb.u.transpose().format(fmt) << "\n";
}

}  // namespace mmt::qp
