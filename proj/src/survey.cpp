#include "npeb/survey.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "npeb/csv.hpp"
#include "npeb/deconvolve.hpp"
#include "npeb/empirics.hpp"
#include "npeb/error.hpp"
#include "npeb/kernels.hpp"

namespace npeb {

double WeightFit::weight_for(double x) const {
    auto it = std::lower_bound(levels.begin(), levels.end(), x);
    if (it == levels.end() || *it != x) {
        throw InputError("no weight for covariate level " + format_number(x));
    }
    return weights[static_cast<std::size_t>(it - levels.begin())];
}

std::vector<double> default_probability_grid() { return arithmetic_grid(0.1, 0.01, 1.0); }

std::vector<double> responder_levels(const std::vector<SurveyRecord>& records) {
    std::set<double> s;
    for (const auto& r : records) {
        if (r.responded) s.insert(r.x);
    }
    return {s.begin(), s.end()};
}

std::vector<std::uint64_t> responder_counts(const std::vector<SurveyRecord>& records,
                                            const std::vector<double>& levels) {
    std::vector<std::uint64_t> counts(levels.size(), 0);
    for (const auto& r : records) {
        if (!r.responded) continue;
        auto it = std::lower_bound(levels.begin(), levels.end(), r.x);
        if (it == levels.end() || *it != r.x) {
            throw InputError("covariate level " + format_number(r.x) + " has no weight");
        }
        ++counts[static_cast<std::size_t>(it - levels.begin())];
    }
    return counts;
}

namespace {

void check_response(const SurveyRecord& r, int max_y) {
    if (!r.y) throw InputError("responder without a response value");
    if (*r.y < 1 || *r.y > max_y) {
        throw InputError("response value " + std::to_string(*r.y) + " outside 1.." +
                         std::to_string(max_y));
    }
}

// Fits the joint (X, parameter) distribution and fills per-level weights.
WeightFit fit_joint(const std::vector<std::string>& observations, const KernelMatrix& base,
                    const std::vector<double>& levels, const SupportGrid& grid, bool censored,
                    bool inverse_mean, const std::vector<CalibrationConstraint>& calib,
                    const QPOptions& opts) {
    const KernelMatrix kernel = joint_kernel(base, levels, censored);
    const EmpiricalFrequencies freq = tabulate(observations, kernel.outcomes());
    const CovarianceEstimate cov = multinomial_covariance(freq);
    WeightFit fit{levels, {}, npmle(freq, kernel, grid, cov, calib, opts), 0};
    for (std::size_t l = 0; l < levels.size(); ++l) {
        if (inverse_mean) {
            fit.weights.push_back(conditional_mean_inv_p(fit.estimate, l));
        } else {
            const double mean_p = conditional_mean_p(fit.estimate, l);
            if (!(mean_p > 0.0)) {
                throw UndefinedConditional("estimated response probability is zero at x=" +
                                           format_number(levels[l]));
            }
            fit.weights.push_back(1.0 / mean_p);
        }
    }
    return fit;
}

}  // namespace

WeightFit estimate_weights_truncated(const SurveyDataset& data, const std::vector<double>& grid,
                                     const std::vector<CalibrationConstraint>& calib,
                                     const QPOptions& opts) {
    if (data.mode != SurveyMode::truncated) throw InputError("dataset is not in truncated mode");
    std::vector<std::string> obs;
    for (const auto& r : data.records) {
        if (!r.responded) throw InputError("non-response record in a truncated dataset");
        check_response(r, data.attempts);
        obs.push_back(outcome_label(r.x, *r.y));
    }
    const auto levels = responder_levels(data.records);
    if (levels.empty()) throw InputError("no responders");
    const KernelMatrix base = geometric_truncated_kernel({grid, data.attempts});
    return fit_joint(obs, base, levels, SupportGrid::joint(levels, grid, data.attempts), false,
                     true, calib, opts);
}

WeightFit estimate_weights_censored(const SurveyDataset& data, const std::vector<double>& grid,
                                    const std::vector<CalibrationConstraint>& calib,
                                    const QPOptions& opts) {
    if (data.mode != SurveyMode::censored) throw InputError("dataset is not in censored mode");
    std::vector<std::string> obs;
    for (const auto& r : data.records) {
        if (r.responded) {
            check_response(r, data.attempts);
            obs.push_back(outcome_label(r.x, *r.y));
        } else {
            obs.push_back(kNonResponse);
        }
    }
    const auto levels = responder_levels(data.records);
    if (levels.empty()) throw InputError("no responders");
    const KernelMatrix base = geometric_censored_kernel({grid, data.attempts});
    return fit_joint(obs, base, levels, SupportGrid::joint(levels, grid, data.attempts), true,
                     false, calib, opts);
}

WeightFit estimate_weights_hybrid(const SurveyDataset& history, const std::vector<double>& grid,
                                  int trials, const std::vector<CalibrationConstraint>& calib,
                                  const QPOptions& opts) {
    std::vector<SurveyRecord> kept;
    std::size_t dropped = 0;
    for (const auto& r : history.records) {
        if (!r.responded || !r.y || *r.y == 0) {
            ++dropped;
            continue;
        }
        check_response(r, trials + 1);
        kept.push_back(r);
    }
    std::vector<std::string> obs;
    for (const auto& r : kept) obs.push_back(outcome_label(r.x, *r.y));
    const auto levels = responder_levels(kept);
    if (levels.empty()) throw InputError("no usable history records");
    const KernelMatrix base = shifted_binomial_kernel({grid, trials});
    WeightFit fit = fit_joint(obs, base, levels, SupportGrid::joint(levels, grid), false, true,
                              calib, opts);
    fit.dropped_records = dropped;
    return fit;
}

double estimate_total(const SurveyDataset& data, const WeightFit& weights,
                      const std::function<double(double)>& value_of_x) {
    double total = 0.0;
    for (const auto& r : data.records) {
        if (r.responded) total += value_of_x(r.x) * weights.weight_for(r.x);
    }
    return total;
}

double estimate_total_mle(const WeightFit& censored, double population_size) {
    const auto& est = censored.estimate;
    double mean = 0.0;
    for (std::size_t l = 0; l < est.grid.level_count(); ++l) {
        mean += est.grid.x_levels()[l] * level_mass(est, l);
    }
    return population_size * mean;
}

std::vector<double> weighted_proportions(const std::vector<std::uint64_t>& counts,
                                         const std::vector<double>& weights) {
    if (counts.size() != weights.size()) throw InputError("counts and weights differ in length");
    std::vector<double> out(counts.size());
    double denom = 0.0;
    for (std::size_t l = 0; l < counts.size(); ++l) {
        out[l] = static_cast<double>(counts[l]) * weights[l];
        denom += out[l];
    }
    if (!(denom > 0.0)) throw InputError("weighted count total is zero");
    for (auto& v : out) v /= denom;
    return out;
}

std::vector<double> estimate_proportions(const SurveyDataset& data, const WeightFit& weights) {
    return weighted_proportions(responder_counts(data.records, weights.levels), weights.weights);
}

std::vector<double> naive_proportions(const std::vector<SurveyRecord>& records,
                                      const std::vector<double>& levels) {
    return weighted_proportions(responder_counts(records, levels),
                                std::vector<double>(levels.size(), 1.0));
}

std::vector<double> oracle_proportions(const std::vector<SurveyRecord>& records,
                                       const std::vector<double>& levels) {
    std::vector<double> out(levels.size(), 0.0);
    double denom = 0.0;
    for (const auto& r : records) {
        if (!r.responded) continue;
        if (!r.true_p) throw InputError("oracle proportions need the true response probability");
        if (!(*r.true_p > 0.0)) throw InputError("responder with zero response probability");
        auto it = std::lower_bound(levels.begin(), levels.end(), r.x);
        if (it == levels.end() || *it != r.x) {
            throw InputError("covariate level " + format_number(r.x) + " not listed");
        }
        out[static_cast<std::size_t>(it - levels.begin())] += 1.0 / *r.true_p;
        denom += 1.0 / *r.true_p;
    }
    if (!(denom > 0.0)) throw InputError("no responders");
    for (auto& v : out) v /= denom;
    return out;
}

std::vector<double> hybrid_estimate(const std::map<double, std::uint64_t>& current_counts,
                                    const SurveyDataset& pooled_history,
                                    const std::vector<double>& grid, int trials,
                                    const QPOptions& opts) {
    const WeightFit fit = estimate_weights_hybrid(pooled_history, grid, trials, {}, opts);
    std::vector<std::uint64_t> counts;
    std::vector<double> weights;
    for (const auto& [x, m] : current_counts) {
        counts.push_back(m);
        weights.push_back(fit.weight_for(x));
    }
    return weighted_proportions(counts, weights);
}

std::vector<SurveyRecord> parse_survey_csv(const std::string& text, const std::string& source) {
    const CsvTable t = parse_csv(text, source);
    t.require_column("id");
    const auto cx = t.require_column("x");
    const auto cy = t.require_column("y");
    const auto cr = t.require_column("responded");
    std::vector<SurveyRecord> out;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        const auto line = t.line_numbers[i];
        SurveyRecord r;
        const std::string& resp = row[cr];
        if (resp == "1" || resp == "true") {
            r.responded = true;
        } else if (resp == "0" || resp == "false") {
            r.responded = false;
        } else {
            throw InputError(source + ":" + std::to_string(line) + ": invalid responded '" +
                             resp + "'");
        }
        if (r.responded) {
            r.x = parse_double(row[cx], "x", line);
            r.y = parse_long(row[cy], "y", line);
        } else {
            if (!row[cy].empty() && row[cy] != kNonResponse) {
                throw InputError(source + ":" + std::to_string(line) +
                                 ": non-responder with a response value");
            }
            if (!row[cx].empty()) r.x = parse_double(row[cx], "x", line);
        }
        out.push_back(r);
    }
    return out;
}

std::vector<SurveyRecord> read_survey_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_survey_csv(ss.str(), path);
}

}  // namespace npeb
