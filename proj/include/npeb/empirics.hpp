#pragma once

#include <string>
#include <vector>

#include "npeb/model.hpp"

namespace npeb {

inline constexpr double kDefaultRidge = 0.001;

/// Counts each observation label against the outcome space. Throws InputError
/// naming the first unknown label, or on an empty list.
EmpiricalFrequencies tabulate(const std::vector<std::string>& observations,
                              const OutcomeSpace& space);

/// Sigma* = diag(f*) - f* f*^T for the reduced frequencies, with `ridge` added
/// to the diagonal before inverting by Cholesky. Throws SingularCovariance if
/// the ridged matrix is not positive definite.
CovarianceEstimate multinomial_covariance(const EmpiricalFrequencies& freq,
                                          double ridge = kDefaultRidge);

}  // namespace npeb
