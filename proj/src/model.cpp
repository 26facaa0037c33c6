#include "npeb/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "npeb/error.hpp"

namespace npeb {

std::size_t flatten_joint_index(std::size_t l, std::size_t k, std::size_t K, std::size_t L) {
    if (l < 1 || l > L || k < 1 || k > K) {
        throw InputError("joint index (" + std::to_string(l) + "," + std::to_string(k) +
                         ") out of range for L=" + std::to_string(L) +
                         ", K=" + std::to_string(K));
    }
    return (l - 1) * K + k;
}

std::size_t flatten_joint_index(std::size_t l, std::size_t k, std::size_t K) {
    if (l < 1 || k < 1 || k > K) {
        throw InputError("joint index (" + std::to_string(l) + "," + std::to_string(k) +
                         ") out of range for K=" + std::to_string(K));
    }
    return (l - 1) * K + k;
}

std::pair<std::size_t, std::size_t> unflatten_joint_index(std::size_t flat, std::size_t K,
                                                          std::size_t L) {
    if (K == 0 || flat < 1 || flat > K * L) {
        throw InputError("flat index " + std::to_string(flat) + " out of range");
    }
    return {(flat - 1) / K + 1, (flat - 1) % K + 1};
}

double response_probability(double p_tilde, int attempts) {
    return 1.0 - std::pow(1.0 - p_tilde, attempts);
}

std::vector<double> arithmetic_grid(double start, double step, double stop) {
    if (!(step > 0.0) || !std::isfinite(start) || !std::isfinite(stop) || stop < start) {
        throw InputError("invalid grid specification");
    }
    const auto count = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
    std::vector<double> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        out.push_back(std::round((start + static_cast<double>(i) * step) * 1e12) / 1e12);
    }
    return out;
}

std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

std::string outcome_label(long y) { return std::to_string(y); }

std::string outcome_label(double x, long y) { return format_number(x) + ":" + std::to_string(y); }

namespace {

void check_support(const std::vector<double>& values) {
    if (values.empty()) throw InputError("support grid must have at least one point");
    std::set<double> seen;
    for (double v : values) {
        if (!std::isfinite(v)) throw InputError("support grid values must be finite");
        if (!seen.insert(v).second) {
            throw InputError("duplicate support value " + format_number(v));
        }
    }
}

void check_attempts(const std::vector<double>& values, std::optional<int> attempts) {
    if (!attempts) return;
    if (*attempts < 1) throw InputError("attempt count must be >= 1");
    for (double v : values) {
        if (!(v > 0.0 && v <= 1.0)) {
            throw InputError("single-attempt probability " + format_number(v) +
                             " outside (0,1]");
        }
    }
}

}  // namespace

SupportGrid SupportGrid::marginal(std::vector<double> support, std::optional<int> attempts) {
    check_support(support);
    check_attempts(support, attempts);
    SupportGrid g;
    g.support_ = std::move(support);
    g.attempts_ = attempts;
    for (double v : g.support_) g.labels_.push_back(format_number(v));
    return g;
}

SupportGrid SupportGrid::joint(std::vector<double> x_levels, std::vector<double> support,
                               std::optional<int> attempts) {
    check_support(support);
    check_attempts(support, attempts);
    if (x_levels.empty()) throw InputError("joint grid needs at least one covariate level");
    check_support(x_levels);
    SupportGrid g;
    g.support_ = std::move(support);
    g.x_levels_ = std::move(x_levels);
    g.attempts_ = attempts;
    for (double x : g.x_levels_) {
        for (double s : g.support_) g.labels_.push_back(format_number(x) + ":" + format_number(s));
    }
    return g;
}

SupportGrid SupportGrid::labeled(std::vector<std::string> labels, std::vector<double> support) {
    check_support(support);
    if (labels.size() != support.size()) throw InputError("label/value count mismatch");
    std::set<std::string> seen(labels.begin(), labels.end());
    if (seen.size() != labels.size()) throw InputError("duplicate support labels");
    SupportGrid g;
    g.support_ = std::move(support);
    g.labels_ = std::move(labels);
    return g;
}

double SupportGrid::x_value(std::size_t cell) const {
    if (x_levels_.empty()) throw InputError("marginal grid has no covariate");
    return x_levels_[level_of(cell)];
}

double SupportGrid::response_probability(std::size_t cell) const {
    const double s = support_value(cell);
    return attempts_ ? npeb::response_probability(s, *attempts_) : s;
}

std::optional<std::size_t> SupportGrid::level_index(double x) const {
    auto it = std::find(x_levels_.begin(), x_levels_.end(), x);
    if (it == x_levels_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - x_levels_.begin());
}

OutcomeSpace::OutcomeSpace(std::vector<std::string> outcomes) : outcomes_(std::move(outcomes)) {
    if (outcomes_.size() < 2) throw InputError("outcome space needs at least two outcomes");
    for (std::size_t j = 0; j < outcomes_.size(); ++j) {
        if (!index_.emplace(outcomes_[j], j).second) {
            throw InputError("duplicate outcome label '" + outcomes_[j] + "'");
        }
    }
}

std::optional<std::size_t> OutcomeSpace::index_of(const std::string& label) const {
    auto it = index_.find(label);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

KernelMatrix::KernelMatrix(OutcomeSpace outcomes, Matrix entries, bool complete)
    : outcomes_(std::move(outcomes)), entries_(std::move(entries)), complete_(complete) {
    if (static_cast<std::size_t>(entries_.rows()) != outcomes_.size()) {
        throw InputError("kernel has " + std::to_string(entries_.rows()) + " rows but " +
                         std::to_string(outcomes_.size()) + " outcomes");
    }
    if (entries_.cols() < 1) throw InputError("kernel needs at least one column");
    for (Eigen::Index k = 0; k < entries_.cols(); ++k) {
        for (Eigen::Index j = 0; j < entries_.rows(); ++j) {
            const double v = entries_(j, k);
            if (!(v >= 0.0 && v <= 1.0)) {
                throw InputError("kernel entry (" + std::to_string(j) + "," + std::to_string(k) +
                                 ") = " + format_number(v) + " outside [0,1]");
            }
        }
        if (complete_ && std::abs(entries_.col(k).sum() - 1.0) > 1e-12) {
            throw InputError("kernel column " + std::to_string(k) + " sums to " +
                             format_number(entries_.col(k).sum()) + ", not 1");
        }
    }
}

EmpiricalFrequencies::EmpiricalFrequencies(std::vector<std::uint64_t> counts)
    : counts_(std::move(counts)) {
    if (counts_.size() < 2) throw InputError("need at least two outcomes");
    for (auto c : counts_) n_ += c;
    if (n_ == 0) throw InputError("empty sample");
    f_hat_.resize(static_cast<Eigen::Index>(counts_.size()));
    for (std::size_t j = 0; j < counts_.size(); ++j) {
        f_hat_[static_cast<Eigen::Index>(j)] =
            static_cast<double>(counts_[j]) / static_cast<double>(n_);
    }
}

EmpiricalFrequencies EmpiricalFrequencies::from_proportions(const Vector& f, std::uint64_t n) {
    if (f.size() < 2) throw InputError("need at least two outcomes");
    if (n == 0) throw InputError("empty sample");
    if ((f.array() < 0.0).any() || std::abs(f.sum() - 1.0) > 1e-12) {
        throw InputError("proportions must be non-negative and sum to 1");
    }
    std::vector<std::uint64_t> counts(static_cast<std::size_t>(f.size()));
    for (Eigen::Index j = 0; j < f.size(); ++j) {
        counts[static_cast<std::size_t>(j)] =
            static_cast<std::uint64_t>(std::llround(f[j] * static_cast<double>(n)));
    }
    EmpiricalFrequencies out(std::vector<std::uint64_t>(counts.size(), 1));
    out.counts_ = std::move(counts);
    out.n_ = n;
    out.f_hat_ = f;
    return out;
}

std::string to_string(EstimateStatus s) {
    switch (s) {
        case EstimateStatus::converged: return "converged";
        case EstimateStatus::max_iterations: return "max-iterations";
        case EstimateStatus::infeasible_calibration: return "infeasible-calibration";
    }
    return "unknown";
}

EstimateStatus estimate_status_from_string(const std::string& s) {
    if (s == "converged") return EstimateStatus::converged;
    if (s == "max-iterations") return EstimateStatus::max_iterations;
    if (s == "infeasible-calibration") return EstimateStatus::infeasible_calibration;
    throw InputError("unknown estimate status '" + s + "'");
}

}  // namespace npeb
