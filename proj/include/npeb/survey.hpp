#pragma once

// Empirical-Bayes Horvitz-Thompson estimation under non-response.
//
// Truncated mode sees only responders and fits the joint law of (X, p) given
// response; its weight for level x is E(1/p | X = x). Censored mode also sees
// non-responders as a single NR outcome, fits the unconditional joint law and
// uses 1 / E(p | X = x). Weights depend on a unit only through its level.

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "npeb/model.hpp"
#include "npeb/qp.hpp"

namespace npeb {

enum class SurveyMode { truncated, censored };

struct SurveyDataset {
    std::vector<SurveyRecord> records;
    int attempts = 1;  // M0 for the geometric models, trials for the shifted binomial
    SurveyMode mode = SurveyMode::truncated;
};

/// Fitted per-level weights with the estimate they came from.
struct WeightFit {
    std::vector<double> levels;   // ascending covariate values
    std::vector<double> weights;  // aligned with levels
    MixingEstimate estimate;
    std::size_t dropped_records = 0;

    double weight_for(double x) const;
};

/// Response probabilities for the p-tilde grid 0.1, 0.11, ..., 1.
std::vector<double> default_probability_grid();

/// Ascending distinct covariate values among responders.
std::vector<double> responder_levels(const std::vector<SurveyRecord>& records);

/// Responder counts m_l aligned with `levels`.
std::vector<std::uint64_t> responder_counts(const std::vector<SurveyRecord>& records,
                                            const std::vector<double>& levels);

WeightFit estimate_weights_truncated(const SurveyDataset& data, const std::vector<double>& grid,
                                     const std::vector<CalibrationConstraint>& calib = {},
                                     const QPOptions& opts = {});

WeightFit estimate_weights_censored(const SurveyDataset& data, const std::vector<double>& grid,
                                    const std::vector<CalibrationConstraint>& calib = {},
                                    const QPOptions& opts = {});

/// Truncated fit with the shifted binomial response-count model Y = 1 + W,
/// W ~ Binomial(trials, p). Records with y = 0 are dropped.
WeightFit estimate_weights_hybrid(const SurveyDataset& history, const std::vector<double>& grid,
                                  int trials,
                                  const std::vector<CalibrationConstraint>& calib = {},
                                  const QPOptions& opts = {});

/// sum over responders of value(X_i) * weight(X_i).
double estimate_total(const SurveyDataset& data, const WeightFit& weights,
                      const std::function<double(double)>& value_of_x);

/// N * sum_l x_l * (mass of level l) for a censored fit.
double estimate_total_mle(const WeightFit& censored, double population_size);

/// alpha_l = m_l w_l / sum_j m_j w_j over the fit's levels.
std::vector<double> estimate_proportions(const SurveyDataset& data, const WeightFit& weights);

/// Same formula from level counts.
std::vector<double> weighted_proportions(const std::vector<std::uint64_t>& counts,
                                         const std::vector<double>& weights);

/// Responder proportions per level (no weighting).
std::vector<double> naive_proportions(const std::vector<SurveyRecord>& records,
                                      const std::vector<double>& levels);

/// Inverse-probability proportions using the true response probabilities.
std::vector<double> oracle_proportions(const std::vector<SurveyRecord>& records,
                                       const std::vector<double>& levels);

/// Current-period counts inflated by weights fitted on pooled history.
std::vector<double> hybrid_estimate(const std::map<double, std::uint64_t>& current_counts,
                                    const SurveyDataset& pooled_history,
                                    const std::vector<double>& grid, int trials,
                                    const QPOptions& opts = {});

/// Survey CSV with columns id,x,y,responded; non-response is responded=0 with
/// an empty y.
std::vector<SurveyRecord> read_survey_csv(const std::string& path);
std::vector<SurveyRecord> parse_survey_csv(const std::string& text,
                                           const std::string& source = "<survey>");

}  // namespace npeb
