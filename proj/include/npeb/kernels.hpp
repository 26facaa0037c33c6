#pragma once

// Builders for the conditional outcome-probability matrices of each
// observation model, plus ingestion of a user-supplied table.

#include <string>
#include <utility>
#include <vector>

#include "npeb/model.hpp"

namespace npeb {

/// Attempts-until-response, observed only for responders (Y <= max_attempts).
struct GeometricTruncatedSpec {
    std::vector<double> p_tilde;  // single-attempt success probabilities, each in (0,1]
    int max_attempts = 1;
};

/// Attempts-until-response with non-response observed as the NR outcome.
struct GeometricCensoredSpec {
    std::vector<double> p_tilde;
    int max_attempts = 1;
};

/// Y = 1 + W, W ~ Binomial(trials, p).
struct ShiftedBinomialSpec {
    std::vector<double> p;
    int trials = 3;
};

/// Normal(theta, sigma^2) observations binned by strictly increasing edges;
/// the outer bins extend to -inf and +inf, so there are edges.size()+1 bins.
struct NormalDiscretizedSpec {
    std::vector<double> theta;
    double sigma = 1.0;
    std::vector<double> edges;
};

KernelMatrix geometric_truncated_kernel(const GeometricTruncatedSpec& spec);
KernelMatrix geometric_censored_kernel(const GeometricCensoredSpec& spec);
KernelMatrix shifted_binomial_kernel(const ShiftedBinomialSpec& spec);
KernelMatrix normal_discretized_kernel(const NormalDiscretizedSpec& spec);

/// Expands a kernel over the parameter grid to the product grid of covariate
/// levels and parameters. Outcome (x_l, y_j) has probability base(j,k) in
/// column (l,k) and zero elsewhere. When `censored`, the base's last row must
/// be the NR outcome; it becomes one shared row that does not reveal x.
KernelMatrix joint_kernel(const KernelMatrix& base, const std::vector<double>& x_levels,
                          bool censored);

/// Standard normal CDF.
double normal_cdf(double z);

/// Kernel table from CSV: header row of support labels (first cell names the
/// outcome column), then one row per outcome. Support labels that parse as
/// numbers become the grid values; otherwise values are 1..K. Columns must sum
/// to 1 within 1e-6 and are renormalized exactly.
std::pair<KernelMatrix, SupportGrid> read_kernel_csv(const std::string& path);

}  // namespace npeb
