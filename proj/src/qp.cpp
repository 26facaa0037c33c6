#include "npeb/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "npeb/error.hpp"

namespace npeb {

namespace {

struct IpmResult {
    Vector x;
    std::size_t iterations = 0;
};

// Largest step in [0,1] keeping v + a*dv >= 0.
double max_step(const Vector& v, const Vector& dv) {
    double a = 1.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (dv[i] < 0.0) a = std::min(a, -v[i] / dv[i]);
    }
    return a;
}

// Mehrotra predictor-corrector for min 1/2 x'Hx + c'x, Ax = b, x >= 0.
// A must have full row rank.
IpmResult interior_point(const Matrix& H, const Vector& c, const Matrix& A, const Vector& b,
                         std::size_t max_iter) {
    const Eigen::Index m = c.size();
    const Eigen::Index p = A.rows();
    const double scale_b = 1.0 + b.lpNorm<Eigen::Infinity>();
    const double scale_c =
        1.0 + std::max(c.lpNorm<Eigen::Infinity>(), H.cwiseAbs().maxCoeff());
    const double reg = 1e-14 * scale_c;

    // Starting point (Mehrotra's heuristic).
    Eigen::LDLT<Matrix> aat(A * A.transpose());
    Vector x = A.transpose() * aat.solve(b);
    Vector grad = H * x + c;
    Vector y = aat.solve(A * grad);
    Vector z = grad - A.transpose() * y;
    x.array() += std::max(-1.5 * x.minCoeff(), 0.0);
    z.array() += std::max(-1.5 * z.minCoeff(), 0.0);
    if (x.dot(z) <= 0.0) {
        x.array() += 1.0;
        z.array() += 1.0;
    }
    {
        const double xz = x.dot(z);
        const double dx = 0.5 * xz / z.sum();
        const double dz = 0.5 * xz / x.sum();
        x.array() += dx;
        z.array() += dz;
    }
    x = x.cwiseMax(1e-8);
    z = z.cwiseMax(1e-8);

    IpmResult out;
    Vector best_x = x;
    double best_merit = std::numeric_limits<double>::infinity();
    for (std::size_t it = 1; it <= max_iter; ++it) {
        out.iterations = it;
        const Vector r_p = A * x - b;
        const Vector r_d = H * x + c - A.transpose() * y - z;
        const double mu = x.dot(z) / static_cast<double>(m);
        const double merit = std::max({r_p.lpNorm<Eigen::Infinity>() / scale_b,
                                       r_d.lpNorm<Eigen::Infinity>() / scale_c, mu / scale_c});
        if (merit < best_merit) {
            best_merit = merit;
            best_x = x;
        }
        if (r_p.lpNorm<Eigen::Infinity>() <= 1e-14 * scale_b &&
            r_d.lpNorm<Eigen::Infinity>() <= 1e-13 * scale_c && mu <= 1e-15 * scale_c) {
            break;
        }

        Matrix K = H;
        K.diagonal() += (z.array() / x.array()).matrix();
        K.diagonal().array() += reg;
        Eigen::LDLT<Matrix> kfac(K);
        const Matrix ki_at = kfac.solve(A.transpose());
        Eigen::LDLT<Matrix> sfac(A * ki_at);

        auto solve = [&](const Vector& r_c, Vector& dx, Vector& dy, Vector& dz) {
            const Vector r1 = -r_d + (r_c.array() / x.array()).matrix();
            const Vector ki_r1 = kfac.solve(r1);
            dy = sfac.solve(-r_p - A * ki_r1);
            dx = ki_r1 + ki_at * dy;
            dz = ((r_c.array() - z.array() * dx.array()) / x.array()).matrix();
        };

        Vector dx_a, dy_a, dz_a;
        const Vector rc_aff = -(x.array() * z.array()).matrix();
        solve(rc_aff, dx_a, dy_a, dz_a);
        const double ap_a = max_step(x, dx_a);
        const double ad_a = max_step(z, dz_a);
        const double mu_aff =
            (x + ap_a * dx_a).dot(z + ad_a * dz_a) / static_cast<double>(m);
        const double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3);

        Vector dx, dy, dz;
        const Vector rc = rc_aff - (dx_a.array() * dz_a.array()).matrix() +
                          Vector::Constant(m, sigma * mu);
        solve(rc, dx, dy, dz);
        const double alpha = std::min(1.0, 0.995 * std::min(max_step(x, dx), max_step(z, dz)));
        if (!(alpha > 0.0) || !dx.allFinite() || !dz.allFinite() || !dy.allFinite()) break;
        x += alpha * dx;
        y += alpha * dy;
        z += alpha * dz;
        if (alpha < 1e-10) break;
    }
    {
        const Vector r_p = A * x - b;
        const Vector r_d = H * x + c - A.transpose() * y - z;
        const double mu = x.dot(z) / static_cast<double>(m);
        const double merit = std::max({r_p.lpNorm<Eigen::Infinity>() / scale_b,
                                       r_d.lpNorm<Eigen::Infinity>() / scale_c, mu / scale_c});
        if (merit <= best_merit) best_x = x;
    }
    (void)p;
    out.x = best_x;
    return out;
}

Matrix equality_matrix(const SimplexQP& problem, Vector& rhs) {
    const auto m = problem.linear.size();
    const auto q = static_cast<Eigen::Index>(problem.equalities.size());
    Matrix A(q + 1, m);
    rhs.resize(q + 1);
    A.row(0).setOnes();
    rhs[0] = 1.0;
    for (Eigen::Index i = 0; i < q; ++i) {
        A.row(i + 1) = problem.equalities[static_cast<std::size_t>(i)].coefficients.transpose();
        rhs[i + 1] = problem.equalities[static_cast<std::size_t>(i)].target;
    }
    return A;
}

Matrix symmetrized(const Matrix& Q) { return 0.5 * (Q + Q.transpose()); }

void validate(const SimplexQP& problem) {
    const auto m = problem.linear.size();
    if (m < 1) throw InputError("QP needs at least one variable");
    if (problem.quadratic.rows() != m || problem.quadratic.cols() != m) {
        throw InputError("QP quadratic term has the wrong shape");
    }
    if (!problem.quadratic.allFinite() || !problem.linear.allFinite()) {
        throw InputError("QP data must be finite");
    }
    for (const auto& eq : problem.equalities) {
        if (eq.coefficients.size() != m) throw InputError("QP equality has the wrong length");
        if (!eq.coefficients.allFinite() || !std::isfinite(eq.target)) {
            throw InputError("QP equality must be finite");
        }
    }
    const Matrix Q = symmetrized(problem.quadratic);
    const double qnorm = Q.cwiseAbs().maxCoeff();
    if (qnorm > 0.0) {
        Eigen::SelfAdjointEigenSolver<Matrix> es(Q, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < -1e-8 * qnorm) {
            throw InputError("QP quadratic term is not positive semidefinite");
        }
    }
}

// Phase 1: min sum(s+ + s-) s.t. sum(x) = 1, Ex + s+ - s- = e, all >= 0.
// Throws InfeasibleError when the optimum leaves a residual.
void check_feasible(const SimplexQP& problem, std::size_t max_iter) {
    const auto m = problem.linear.size();
    const auto q = static_cast<Eigen::Index>(problem.equalities.size());
    if (q == 0) return;
    const Eigen::Index n = m + 2 * q;
    Matrix A = Matrix::Zero(q + 1, n);
    Vector b(q + 1);
    A.block(0, 0, 1, m).setOnes();
    b[0] = 1.0;
    double scale = 1.0;
    for (Eigen::Index i = 0; i < q; ++i) {
        const auto& eq = problem.equalities[static_cast<std::size_t>(i)];
        A.block(i + 1, 0, 1, m) = eq.coefficients.transpose();
        A(i + 1, m + i) = 1.0;
        A(i + 1, m + q + i) = -1.0;
        b[i + 1] = eq.target;
        scale = std::max({scale, std::abs(eq.target), eq.coefficients.cwiseAbs().maxCoeff()});
    }
    Vector c = Vector::Zero(n);
    c.tail(2 * q).setOnes();
    const Matrix H = Matrix::Zero(n, n);
    const IpmResult r = interior_point(H, c, A, b, max_iter);

    Vector x = r.x.head(m).cwiseMax(0.0);
    x /= x.sum();
    Eigen::Index worst = 0;
    double violation = 0.0;
    for (Eigen::Index i = 0; i < q; ++i) {
        const auto& eq = problem.equalities[static_cast<std::size_t>(i)];
        const double v = std::abs(eq.coefficients.dot(x) - eq.target);
        if (v > violation) {
            violation = v;
            worst = i;
        }
    }
    if (violation > 1e-9 * scale) {
        throw InfeasibleError("equality constraint " + std::to_string(worst) +
                                  " cannot be met on the simplex (residual " +
                                  std::to_string(violation) + ")",
                              static_cast<std::size_t>(worst));
    }
}

}  // namespace

double qp_objective(const SimplexQP& problem, const Vector& x) {
    return 0.5 * x.dot(symmetrized(problem.quadratic) * x) + problem.linear.dot(x);
}

double kkt_residual(const SimplexQP& problem, const Vector& x) {
    Vector b;
    const Matrix A = equality_matrix(problem, b);
    const Vector grad = symmetrized(problem.quadratic) * x + problem.linear;
    const Vector xw = x.cwiseMax(0.0);
    const double primal = std::max((A * x - b).lpNorm<Eigen::Infinity>(), (-x).maxCoeff());

    auto residual_for = [&](const Vector& w, Vector& d) {
        const Matrix AW = A * w.asDiagonal();
        const Vector lambda =
            (AW * A.transpose()).completeOrthogonalDecomposition().solve(AW * grad);
        d = grad - A.transpose() * lambda;
        double res = primal;
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            res = std::max({res, -d[i], xw[i] * std::abs(d[i])});
        }
        return res;
    };

    // Multipliers need not be unique when the support is small. Start from
    // the x-weighted fit, then repeatedly add unit weight on coordinates with
    // a negative reduced gradient (minimizing sum x_i d_i^2 + sum min(d_i,0)^2).
    Vector d;
    double best = residual_for(xw, d);
    std::vector<bool> negative(static_cast<std::size_t>(x.size()), false);
    for (int pass = 0; pass < 50; ++pass) {
        bool changed = false;
        Vector w = xw;
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            const bool neg = negative[static_cast<std::size_t>(i)] || d[i] < 0.0;
            if (neg != negative[static_cast<std::size_t>(i)]) changed = true;
            negative[static_cast<std::size_t>(i)] = neg;
            if (neg) w[i] += 1.0;
        }
        if (!changed) break;
        best = std::min(best, residual_for(w, d));
    }
    return best;
}

QPSolution solve_qp(const SimplexQP& problem, const QPOptions& opts) {
    validate(problem);
    check_feasible(problem, opts.max_iter);

    const Matrix H = symmetrized(problem.quadratic);
    Vector b_full;
    const Matrix A_full = equality_matrix(problem, b_full);

    // Keep a maximal independent subset of the equality rows. Phase 1 has
    // already established that the dropped rows are consistent.
    Eigen::ColPivHouseholderQR<Matrix> qr(A_full.transpose());
    qr.setThreshold(1e-10);
    const auto rank = qr.rank();
    Matrix A(rank, A_full.cols());
    Vector b(rank);
    for (Eigen::Index i = 0; i < rank; ++i) {
        const auto row = qr.colsPermutation().indices()[i];
        A.row(i) = A_full.row(row);
        b[i] = b_full[row];
    }

    QPSolution sol;
    if (problem.linear.size() == 1) {
        sol.x = Vector::Ones(1);
        sol.iterations = 0;
    } else {
        const IpmResult r = interior_point(H, problem.linear, A, b, opts.max_iter);
        sol.x = r.x;
        sol.iterations = r.iterations;
    }
    sol.objective = qp_objective(problem, sol.x);
    sol.kkt_residual = kkt_residual(problem, sol.x);
    sol.status = sol.kkt_residual <= opts.tol ? QPStatus::converged : QPStatus::max_iterations;
    return sol;
}

QPSolution min_quadratic_given_level(const SimplexQP& problem, const Vector& h, double level,
                                     const QPOptions& opts) {
    if (h.size() != problem.linear.size()) throw InputError("functional has the wrong length");
    const double span = std::max(1.0, h.cwiseAbs().maxCoeff());
    if (level < h.minCoeff() - 1e-12 * span || level > h.maxCoeff() + 1e-12 * span) {
        throw InfeasibleError("level outside the range of the functional on the simplex",
                              problem.equalities.size());
    }
    SimplexQP pinned = problem;
    pinned.equalities.push_back({h, level});
    return solve_qp(pinned, opts);
}

}  // namespace npeb
