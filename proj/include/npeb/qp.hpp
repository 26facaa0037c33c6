#pragma once

// Convex quadratic programs over the probability simplex:
//
//   minimize  1/2 x'Qx + c'x   subject to  x >= 0,  sum(x) = 1,  a_i'x = b_i.
//
// The bound x <= 1 is implied by the simplex and is not carried separately.
// Solutions are certified by a KKT residual that kkt_residual() recomputes
// from (problem, x) alone.

#include <cstddef>
#include <vector>

#include "npeb/model.hpp"

namespace npeb {

struct LinearEquality {
    Vector coefficients;
    double target = 0.0;
};

struct SimplexQP {
    Matrix quadratic;  // symmetric positive semidefinite
    Vector linear;
    std::vector<LinearEquality> equalities;  // in addition to sum(x) = 1
};

enum class QPStatus { converged, max_iterations };

struct QPSolution {
    Vector x;
    double objective = 0.0;
    double kkt_residual = 0.0;
    std::size_t iterations = 0;
    QPStatus status = QPStatus::converged;
};

struct QPOptions {
    double tol = 1e-8;
    std::size_t max_iter = 200;
};

/// Solves the problem with a primal-dual interior point method. Throws
/// InputError for malformed or indefinite problems and InfeasibleError (with
/// the index of the most violated extra equality) when the equalities cannot
/// be met on the simplex. Hitting the iteration cap returns the last iterate
/// with status max_iterations.
QPSolution solve_qp(const SimplexQP& problem, const QPOptions& opts = {});

/// Same problem with the extra equality h'x = level.
QPSolution min_quadratic_given_level(const SimplexQP& problem, const Vector& h, double level,
                                     const QPOptions& opts = {});

double qp_objective(const SimplexQP& problem, const Vector& x);

/// KKT residual of x: with multipliers fitted by x-weighted least squares and
/// reduced gradient d = Qx + c - A'lambda, the largest of
///   max(0, -d_i)          (dual feasibility on every coordinate)
///   x_i |d_i|             (complementarity / stationarity on the support)
///   |Ax - b|, max(0,-x_i) (primal feasibility).
double kkt_residual(const SimplexQP& problem, const Vector& x);

}  // namespace npeb
