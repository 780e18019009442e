#pragma once
// Reference QP solver for tests: textbook primal active-set method on
//   min 0.5 x'Px + q'x  s.t.  E x = e,  G x <= h
// started from a known feasible point. Independent of the ADMM code path.

#include "mmt/qp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <vector>

namespace mmt::test {

struct OracleResult {
    Eigen::VectorXd x;
    int iterations{0};
    bool converged{false};
};

inline OracleResult active_set_qp(const Eigen::MatrixXd& P, const Eigen::VectorXd& q, const Eigen::MatrixXd& E,
                                  const Eigen::VectorXd& e, const Eigen::MatrixXd& G, const Eigen::VectorXd& h,
                                  Eigen::VectorXd x, int max_iter = 1000) {
    const auto n = x.size();
    const auto me = E.rows();
    const auto mi = G.rows();
    std::vector<Eigen::Index> working;
    OracleResult res;
    for (int it = 0; it < max_iter; ++it) {
        res.iterations = it + 1;
        const auto nw = static_cast<Eigen::Index>(working.size());
        const auto k = n + me + nw;
        Eigen::MatrixXd K = Eigen::MatrixXd::Zero(k, k);
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k);
        K.topLeftCorner(n, n) = P;
        if (me > 0) {
            K.block(0, n, n, me) = E.transpose();
            K.block(n, 0, me, n) = E;
        }
        for (Eigen::Index w = 0; w < nw; ++w) {
            K.block(0, n + me + w, n, 1) = G.row(working[w]).transpose();
            K.block(n + me + w, 0, 1, n) = G.row(working[w]);
        }
        rhs.head(n) = -(P * x + q);
        const Eigen::VectorXd sol = K.completeOrthogonalDecomposition().solve(rhs);
        const Eigen::VectorXd p = sol.head(n);
        if (p.lpNorm<Eigen::Infinity>() < 1e-13 * (1.0 + x.lpNorm<Eigen::Infinity>())) {
            // Multipliers of the working inequalities; negative means drop.
            Eigen::Index drop = -1;
            double most_negative = -1e-11;
            for (Eigen::Index w = 0; w < nw; ++w) {
                const double mu = sol(n + me + w);
                if (mu < most_negative) {
                    most_negative = mu;
                    drop = w;
                }
            }
            if (drop < 0) {
                res.x = x;
                res.converged = true;
                return res;
            }
            working.erase(working.begin() + drop);
            continue;
        }
        double alpha = 1.0;
        Eigen::Index blocking = -1;
        for (Eigen::Index i = 0; i < mi; ++i) {
            if (std::find(working.begin(), working.end(), i) != working.end()) continue;
            const double gp = G.row(i).dot(p);
            if (gp > 1e-14) {
                const double step = (h(i) - G.row(i).dot(x)) / gp;
                if (step < alpha) {
                    alpha = std::max(step, 0.0);
                    blocking = i;
                }
            }
        }
        x += alpha * p;
        if (blocking >= 0) working.push_back(blocking);
    }
    res.x = x;
    return res;
}

using qp::Matrix;
using qp::QpProblem;
using qp::Vector;

// Random strictly convex QP with a known feasible point; some rows are
// equalities, some one-sided.
struct RandomQp {
    QpProblem pb;
    Vector feasible;
};

inline RandomQp random_qp(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> nd(1, 10), md(0, 20);
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const int n = nd(rng);
    const int m = md(rng);
    RandomQp r;
    Matrix M(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) M(i, j) = g(rng);
    r.pb.P = M.transpose() * M + 0.1 * Matrix::Identity(n, n);
    r.pb.q.resize(n);
    for (int i = 0; i < n; ++i) r.pb.q(i) = 3.0 * g(rng);
    r.pb.A.resize(m, n);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) r.pb.A(i, j) = g(rng);
    r.feasible.resize(n);
    for (int i = 0; i < n; ++i) r.feasible(i) = g(rng);
    const Vector v = r.pb.A * r.feasible;
    r.pb.l.resize(m);
    r.pb.u.resize(m);
    int equalities = 0;
    for (int i = 0; i < m; ++i) {
        const double roll = u01(rng);
        if (roll < 0.1 && equalities < n / 2) {
            r.pb.l(i) = r.pb.u(i) = v(i);
            ++equalities;
            continue;
        }
        r.pb.l(i) = u01(rng) < 0.2 ? -qp::kInf : v(i) - u01(rng);
        r.pb.u(i) = u01(rng) < 0.2 ? qp::kInf : v(i) + u01(rng);
    }
    return r;
}

inline OracleResult oracle_solve(const RandomQp& r) {
    const auto n = r.pb.num_vars();
    std::vector<std::pair<Vector, double>> eq, in;
    for (Eigen::Index i = 0; i < r.pb.num_constraints(); ++i) {
        const Vector a = r.pb.A.row(i).transpose();
        if (r.pb.l(i) == r.pb.u(i)) {
            eq.emplace_back(a, r.pb.l(i));
            continue;
        }
        if (std::isfinite(r.pb.u(i))) in.emplace_back(a, r.pb.u(i));
        if (std::isfinite(r.pb.l(i))) in.emplace_back(-a, -r.pb.l(i));
    }
    Matrix E(eq.size(), n), G(in.size(), n);
    Vector e(eq.size()), h(in.size());
    for (std::size_t i = 0; i < eq.size(); ++i) {
        E.row(i) = eq[i].first.transpose();
        e(i) = eq[i].second;
    }
    for (std::size_t i = 0; i < in.size(); ++i) {
        G.row(i) = in[i].first.transpose();
        h(i) = in[i].second;
    }
    return active_set_qp(r.pb.P, r.pb.q, E, e, G, h, r.feasible);
}

}  // namespace mmt::test
