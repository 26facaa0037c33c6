#pragma once

// Confidence intervals for linear functionals h'g of the mixing density:
// the extremes of h'g over the simplex intersected with the chi-square
// ellipsoid  n (f* - P* g)' S^{-1} (f* - P* g) <= chi2_{Q-1, 1-alpha}.

#include <string>
#include <vector>

#include "npeb/model.hpp"
#include "npeb/qp.hpp"

namespace npeb {

/// prob-quantile of the chi-square distribution with df degrees of freedom.
double chi2_quantile(int df, double prob);

struct FunctionalInterval {
    std::string functional_name;
    double alpha = 0.05;
    double lower = 0.0;  // T_L
    double upper = 0.0;  // T_U
    double npmle_value = 0.0;
    double threshold = 0.0;
    int df = 0;
};

struct CiOptions {
    QPOptions qp;
    double relative_width = 1e-7;
    int max_bisections = 60;
};

FunctionalInterval functional_ci(const Functional& h, const EmpiricalFrequencies& freq,
                                 const KernelMatrix& kernel, const CovarianceEstimate& cov,
                                 double alpha,
                                 const std::vector<CalibrationConstraint>& calib = {},
                                 const CiOptions& opts = {});

/// Same construction with an explicit critical value in place of the
/// chi-square quantile.
FunctionalInterval functional_ci_with_threshold(const Functional& h,
                                                const EmpiricalFrequencies& freq,
                                                const KernelMatrix& kernel,
                                                const CovarianceEstimate& cov, double threshold,
                                                const std::vector<CalibrationConstraint>& calib = {},
                                                const CiOptions& opts = {});

std::string interval_to_json(const FunctionalInterval& ci);
FunctionalInterval interval_from_json(const std::string& text);

}  // namespace npeb
