#pragma once

// NPMLE of a mixing distribution on a fixed grid via the weighted
// least-squares quadratic program
//
//   min_g (f* - P* g)' S^{-1} (f* - P* g),  g >= 0, sum g = 1, calibrations,
//
// and evaluation of functionals of the fitted distribution.

#include <functional>
#include <string>
#include <vector>

#include "npeb/model.hpp"
#include "npeb/qp.hpp"

namespace npeb {

/// QP for the fit: quadratic 2 P*'S^{-1}P*, linear -2 P*'S^{-1} f*, with the
/// calibration constraints as extra equalities.
SimplexQP npmle_problem(const EmpiricalFrequencies& freq, const KernelMatrix& kernel,
                        const CovarianceEstimate& cov,
                        const std::vector<CalibrationConstraint>& calib = {});

/// (f* - P* g)' S^{-1} (f* - P* g), without the factor n.
double npmle_quadratic_form(const EmpiricalFrequencies& freq, const KernelMatrix& kernel,
                            const CovarianceEstimate& cov, const Vector& g);

MixingEstimate npmle(const EmpiricalFrequencies& freq, const KernelMatrix& kernel,
                     const SupportGrid& grid, const CovarianceEstimate& cov,
                     const std::vector<CalibrationConstraint>& calib = {},
                     const QPOptions& opts = {});

double functional_value(const MixingEstimate& est, const Functional& h);

/// Tabulates h(x, s) on the grid cells; marginal grids pass x = 0.
Functional make_functional(const SupportGrid& grid, std::string name,
                           const std::function<double(double x, double s)>& h);

/// E(p | X = x_level) under the estimate; p is the grid's response
/// probability (mapped from single-attempt values when the grid has attempts).
double conditional_mean_p(const MixingEstimate& est, std::size_t level);

/// E(1/p | X = x_level) under the estimate.
double conditional_mean_inv_p(const MixingEstimate& est, std::size_t level);

/// Total mass the estimate puts on covariate level `level`.
double level_mass(const MixingEstimate& est, std::size_t level);

/// CSV with columns x_level,support_value,mass (x_level empty for marginal grids).
std::string estimate_to_csv(const MixingEstimate& est);
MixingEstimate estimate_from_csv(const std::string& text);

/// JSON mirror with grid description, fit diagnostics and calibrations.
std::string estimate_to_json(const MixingEstimate& est);
MixingEstimate estimate_from_json(const std::string& text);

}  // namespace npeb
