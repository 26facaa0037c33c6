#include "npeb/kernels.hpp"

#include <cmath>

#include "npeb/csv.hpp"
#include "npeb/error.hpp"

namespace npeb {

namespace {

void check_probabilities(const std::vector<double>& values, const char* what) {
    if (values.empty()) throw InputError(std::string(what) + " grid is empty");
    for (double v : values) {
        if (!(v > 0.0 && v <= 1.0)) {
            throw InputError(std::string(what) + " value " + format_number(v) +
                             " outside (0,1]");
        }
    }
}

OutcomeSpace attempt_outcomes(int max_attempts, bool with_nr) {
    std::vector<std::string> labels;
    for (int j = 1; j <= max_attempts; ++j) labels.push_back(outcome_label(j));
    if (with_nr) labels.push_back(kNonResponse);
    return OutcomeSpace(std::move(labels));
}

double binomial_coefficient(int n, int k) {
    double c = 1.0;
    for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
    return c;
}

}  // namespace

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

KernelMatrix geometric_truncated_kernel(const GeometricTruncatedSpec& spec) {
    check_probabilities(spec.p_tilde, "single-attempt probability");
    if (spec.max_attempts < 1) throw InputError("max attempts must be >= 1");
    if (spec.max_attempts < 2) {
        // A single outcome carries no information; the reduced system is empty.
        throw InputError("truncated geometric kernel needs at least two attempts");
    }
    const auto K = static_cast<Eigen::Index>(spec.p_tilde.size());
    Matrix P(spec.max_attempts, K);
    for (Eigen::Index k = 0; k < K; ++k) {
        const double pt = spec.p_tilde[static_cast<std::size_t>(k)];
        const double respond = response_probability(pt, spec.max_attempts);
        for (int j = 1; j <= spec.max_attempts; ++j) {
            P(j - 1, k) = std::pow(1.0 - pt, j - 1) * pt / respond;
        }
    }
    return KernelMatrix(attempt_outcomes(spec.max_attempts, false), std::move(P));
}

KernelMatrix geometric_censored_kernel(const GeometricCensoredSpec& spec) {
    check_probabilities(spec.p_tilde, "single-attempt probability");
    if (spec.max_attempts < 1) throw InputError("max attempts must be >= 1");
    const auto K = static_cast<Eigen::Index>(spec.p_tilde.size());
    Matrix P(spec.max_attempts + 1, K);
    for (Eigen::Index k = 0; k < K; ++k) {
        const double pt = spec.p_tilde[static_cast<std::size_t>(k)];
        for (int j = 1; j <= spec.max_attempts; ++j) {
            P(j - 1, k) = std::pow(1.0 - pt, j - 1) * pt;
        }
        P(spec.max_attempts, k) = std::pow(1.0 - pt, spec.max_attempts);
    }
    return KernelMatrix(attempt_outcomes(spec.max_attempts, true), std::move(P));
}

KernelMatrix shifted_binomial_kernel(const ShiftedBinomialSpec& spec) {
    check_probabilities(spec.p, "response probability");
    if (spec.trials < 1) throw InputError("shifted binomial needs at least one trial");
    const auto K = static_cast<Eigen::Index>(spec.p.size());
    Matrix P(spec.trials + 1, K);
    for (Eigen::Index k = 0; k < K; ++k) {
        const double p = spec.p[static_cast<std::size_t>(k)];
        for (int y = 1; y <= spec.trials + 1; ++y) {
            const int w = y - 1;
            P(y - 1, k) = binomial_coefficient(spec.trials, w) * std::pow(p, w) *
                          std::pow(1.0 - p, spec.trials - w);
        }
    }
    return KernelMatrix(attempt_outcomes(spec.trials + 1, false), std::move(P));
}

KernelMatrix normal_discretized_kernel(const NormalDiscretizedSpec& spec) {
    if (spec.theta.empty()) throw InputError("normal kernel needs a location grid");
    if (!(spec.sigma > 0.0) || !std::isfinite(spec.sigma)) {
        throw InputError("normal kernel sigma must be positive");
    }
    if (spec.edges.empty()) throw InputError("normal kernel needs at least one bin edge");
    for (std::size_t i = 0; i < spec.edges.size(); ++i) {
        if (!std::isfinite(spec.edges[i])) throw InputError("bin edges must be finite");
        if (i > 0 && !(spec.edges[i] > spec.edges[i - 1])) {
            throw InputError("bin edges must be strictly increasing");
        }
    }
    const auto J = static_cast<Eigen::Index>(spec.edges.size() + 1);
    const auto K = static_cast<Eigen::Index>(spec.theta.size());
    std::vector<std::string> labels;
    labels.push_back("(-inf," + format_number(spec.edges.front()) + ")");
    for (std::size_t i = 0; i + 1 < spec.edges.size(); ++i) {
        labels.push_back("[" + format_number(spec.edges[i]) + "," +
                         format_number(spec.edges[i + 1]) + ")");
    }
    labels.push_back("[" + format_number(spec.edges.back()) + ",inf)");

    Matrix P(J, K);
    for (Eigen::Index k = 0; k < K; ++k) {
        const double th = spec.theta[static_cast<std::size_t>(k)];
        if (!std::isfinite(th)) throw InputError("location grid must be finite");
        double lower = 0.0;
        for (Eigen::Index j = 0; j < J; ++j) {
            const double upper =
                j + 1 < J ? normal_cdf((spec.edges[static_cast<std::size_t>(j)] - th) / spec.sigma)
                          : 1.0;
            P(j, k) = upper - lower;
            lower = upper;
        }
    }
    return KernelMatrix(OutcomeSpace(std::move(labels)), std::move(P));
}

KernelMatrix joint_kernel(const KernelMatrix& base, const std::vector<double>& x_levels,
                          bool censored) {
    if (x_levels.empty()) throw InputError("joint kernel needs at least one covariate level");
    const auto& out = base.outcomes();
    if (censored && out[out.size() - 1] != kNonResponse) {
        throw InputError("censored joint kernel requires NR as the base kernel's last outcome");
    }
    const auto J = static_cast<Eigen::Index>(censored ? base.rows() - 1 : base.rows());
    const auto K = static_cast<Eigen::Index>(base.cols());
    const auto L = static_cast<Eigen::Index>(x_levels.size());
    const Eigen::Index Q = L * J + (censored ? 1 : 0);

    std::vector<std::string> labels;
    labels.reserve(static_cast<std::size_t>(Q));
    for (double x : x_levels) {
        for (Eigen::Index j = 0; j < J; ++j) {
            labels.push_back(format_number(x) + ":" + out[static_cast<std::size_t>(j)]);
        }
    }
    if (censored) labels.push_back(kNonResponse);

    Matrix P = Matrix::Zero(Q, L * K);
    for (Eigen::Index l = 0; l < L; ++l) {
        P.block(l * J, l * K, J, K) = base.entries().topRows(J);
        if (censored) P.block(Q - 1, l * K, 1, K) = base.entries().bottomRows(1);
    }
    return KernelMatrix(OutcomeSpace(std::move(labels)), std::move(P), base.complete());
}

std::pair<KernelMatrix, SupportGrid> read_kernel_csv(const std::string& path) {
    const CsvTable t = read_csv(path);
    if (t.header.size() < 2) throw InputError(path + ": kernel needs at least one support column");
    const std::size_t K = t.header.size() - 1;
    std::vector<std::string> support_labels(t.header.begin() + 1, t.header.end());
    std::vector<double> values(K);
    bool numeric = true;
    for (std::size_t k = 0; k < K; ++k) {
        try {
            values[k] = parse_double(support_labels[k], "support label", 1);
        } catch (const InputError&) {
            numeric = false;
        }
    }
    if (!numeric) {
        for (std::size_t k = 0; k < K; ++k) values[k] = static_cast<double>(k + 1);
    }

    std::vector<std::string> outcomes;
    Matrix P(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(K));
    for (std::size_t j = 0; j < t.rows.size(); ++j) {
        outcomes.push_back(t.rows[j][0]);
        for (std::size_t k = 0; k < K; ++k) {
            const double v = parse_double(t.rows[j][k + 1], "kernel entry", t.line_numbers[j]);
            if (v < 0.0 || v > 1.0) {
                throw InputError(path + ":" + std::to_string(t.line_numbers[j]) +
                                 ": kernel entry outside [0,1]");
            }
            P(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = v;
        }
    }
    for (Eigen::Index k = 0; k < P.cols(); ++k) {
        const double s = P.col(k).sum();
        if (std::abs(s - 1.0) > 1e-6) {
            throw InputError(path + ": column '" + support_labels[static_cast<std::size_t>(k)] +
                             "' sums to " + format_number(s));
        }
        P.col(k) /= s;
    }
    return {KernelMatrix(OutcomeSpace(std::move(outcomes)), std::move(P)),
            SupportGrid::labeled(std::move(support_labels), std::move(values))};
}

}  // namespace npeb
