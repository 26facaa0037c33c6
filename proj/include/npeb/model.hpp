#pragma once

// Domain types shared by the deconvolution, confidence and survey modules.
//
// Orientation convention used throughout: a kernel matrix has one row per
// outcome and one column per support cell. The reduced system drops the LAST
// outcome row (and the last coordinate of the frequency vector).

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace npeb {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Row-major flattening of a (covariate level, support point) pair, 1-based:
/// returns (l-1)*K + k. Throws InputError when l or k is out of range.
std::size_t flatten_joint_index(std::size_t l, std::size_t k, std::size_t K, std::size_t L);
std::size_t flatten_joint_index(std::size_t l, std::size_t k, std::size_t K);

/// Inverse of flatten_joint_index; returns the 1-based (l, k) pair.
std::pair<std::size_t, std::size_t> unflatten_joint_index(std::size_t flat, std::size_t K,
                                                          std::size_t L);

/// Probability of responding within `attempts` geometric trials of success
/// probability `p_tilde`: 1 - (1 - p_tilde)^attempts.
double response_probability(double p_tilde, int attempts);

/// Evenly spaced values start, start+step, ..., stop (inclusive, rounded so
/// that accumulated floating error never drops the last point).
std::vector<double> arithmetic_grid(double start, double step, double stop);

/// Fixed support of the mixing distribution. Marginal grids hold K parameter
/// values; joint grids hold the product of L covariate levels with the same K
/// parameter values, flattened with the level as the outer index.
///
/// When `attempts` is set, parameter values are single-attempt success
/// probabilities and response_probability() maps them to the probability of
/// responding within that many attempts.
class SupportGrid {
public:
    static SupportGrid marginal(std::vector<double> support,
                                std::optional<int> attempts = std::nullopt);
    static SupportGrid joint(std::vector<double> x_levels, std::vector<double> support,
                             std::optional<int> attempts = std::nullopt);
    // Marginal grid with caller-provided labels (generic kernel tables).
    static SupportGrid labeled(std::vector<std::string> labels, std::vector<double> support);

    std::size_t size() const noexcept { return level_count() * support_.size(); }
    std::size_t support_size() const noexcept { return support_.size(); }
    std::size_t level_count() const noexcept { return x_levels_.empty() ? 1 : x_levels_.size(); }
    bool is_joint() const noexcept { return !x_levels_.empty(); }

    const std::vector<double>& support() const noexcept { return support_; }
    const std::vector<double>& x_levels() const noexcept { return x_levels_; }
    const std::vector<std::string>& labels() const noexcept { return labels_; }
    std::optional<int> attempts() const noexcept { return attempts_; }

    // 0-based cell helpers.
    std::size_t cell(std::size_t level, std::size_t k) const noexcept {
        return level * support_.size() + k;
    }
    std::size_t level_of(std::size_t cell) const noexcept { return cell / support_.size(); }
    double support_value(std::size_t cell) const noexcept {
        return support_[cell % support_.size()];
    }
    double x_value(std::size_t cell) const;
    double response_probability(std::size_t cell) const;
    std::optional<std::size_t> level_index(double x) const;

private:
    std::vector<std::string> labels_;
    std::vector<double> support_;
    std::vector<double> x_levels_;
    std::optional<int> attempts_;
};

/// Ordered outcome labels t_1..t_Q. The dropped coordinate is always the last.
class OutcomeSpace {
public:
    OutcomeSpace() = default;
    explicit OutcomeSpace(std::vector<std::string> outcomes);

    std::size_t size() const noexcept { return outcomes_.size(); }
    std::size_t dropped_index() const noexcept { return outcomes_.size() - 1; }
    const std::vector<std::string>& outcomes() const noexcept { return outcomes_; }
    const std::string& operator[](std::size_t j) const { return outcomes_[j]; }
    std::optional<std::size_t> index_of(const std::string& label) const;

private:
    std::vector<std::string> outcomes_;
    std::unordered_map<std::string, std::size_t> index_;
};

inline const std::string kNonResponse = "NR";

/// Canonical outcome label for a scalar observation y, or a pair (x, y).
std::string outcome_label(long y);
std::string outcome_label(double x, long y);
std::string format_number(double v);

/// Matrix of conditional outcome probabilities, rows = outcomes, columns =
/// support cells. Complete kernels have every column summing to one.
class KernelMatrix {
public:
    KernelMatrix(OutcomeSpace outcomes, Matrix entries, bool complete = true);

    std::size_t rows() const noexcept { return static_cast<std::size_t>(entries_.rows()); }
    std::size_t cols() const noexcept { return static_cast<std::size_t>(entries_.cols()); }
    const OutcomeSpace& outcomes() const noexcept { return outcomes_; }
    const Matrix& entries() const noexcept { return entries_; }
    bool complete() const noexcept { return complete_; }
    double operator()(std::size_t j, std::size_t k) const { return entries_(j, k); }

    /// P*: the first Q-1 rows.
    Matrix reduced() const { return entries_.topRows(entries_.rows() - 1); }

private:
    OutcomeSpace outcomes_;
    Matrix entries_;
    bool complete_;
};

/// Outcome counts with their proportions. f_star() drops the last outcome.
class EmpiricalFrequencies {
public:
    explicit EmpiricalFrequencies(std::vector<std::uint64_t> counts);

    /// Exact proportions with a nominal sample size, for noiseless fixtures
    /// and population-level calculations. counts() holds round(n * f).
    static EmpiricalFrequencies from_proportions(const Vector& f, std::uint64_t n);

    std::uint64_t n() const noexcept { return n_; }
    const std::vector<std::uint64_t>& counts() const noexcept { return counts_; }
    const Vector& f_hat() const noexcept { return f_hat_; }
    Vector f_star() const { return f_hat_.head(f_hat_.size() - 1); }
    std::size_t size() const noexcept { return counts_.size(); }

private:
    std::vector<std::uint64_t> counts_;
    std::uint64_t n_ = 0;
    Vector f_hat_;
};

/// Per-observation covariance of the reduced frequencies (Sigma*), the ridge
/// added to its diagonal, and the inverse of the ridged matrix.
struct CovarianceEstimate {
    Matrix matrix;
    double ridge = 0.001;
    Matrix inverse;
};

struct CalibrationConstraint {
    Vector coefficients;
    double target = 0.0;
    std::string name;
};

struct Functional {
    std::string name;
    Vector values;
};

enum class EstimateStatus { converged, max_iterations, infeasible_calibration };

std::string to_string(EstimateStatus s);
EstimateStatus estimate_status_from_string(const std::string& s);

struct MixingEstimate {
    SupportGrid grid;
    Vector g;
    double objective = 0.0;
    double kkt_residual = 0.0;
    std::size_t iterations = 0;
    EstimateStatus status = EstimateStatus::converged;
    std::vector<CalibrationConstraint> calibration;
};

/// One surveyed unit. `y` is absent for non-responders; `true_p` is only known
/// inside simulations.
struct SurveyRecord {
    double x = 0.0;
    std::optional<long> y;
    bool responded = true;
    std::optional<double> true_p;
};

}  // namespace npeb
