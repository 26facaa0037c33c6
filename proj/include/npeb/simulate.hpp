#pragma once

// Monte-Carlo harness for the two-group non-response experiment.
//
// Each unit gets X in {0, 1} with probability 1/2 each. Units with X = 1 draw
// the per-attempt response probability from the base prior G0; units with
// X = 0 draw it from the shifted prior G1(gamma), so their response is worse.
// The attempt count is geometric and the unit responds iff it is <= M0.
// Every estimator targets the share of X = 0, which is 0.5.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "npeb/model.hpp"
#include "npeb/qp.hpp"

namespace npeb {

enum class FamilyKind { two_points, uniform_mix, trunc_normal };

std::string to_string(FamilyKind kind);
FamilyKind family_from_string(const std::string& name);

struct PriorFamily {
    FamilyKind kind = FamilyKind::two_points;
    double gamma = 0.0;
};

/// Simulation support grid for p-tilde: 0.1, 0.12, ..., 1.
std::vector<double> simulation_grid();

struct ExperimentConfig {
    std::size_t population = 1000;  // N
    int max_attempts = 8;           // M0
    PriorFamily family;
    std::size_t replications = 200;
    std::uint64_t seed = 1;
    std::vector<double> grid = simulation_grid();
    unsigned jobs = 1;
};

void validate(const ExperimentConfig& config);

struct PopulationUnit {
    double x = 0.0;
    double p_tilde = 1.0;
    long y = 1;  // attempts until response, unbounded
};

/// Counter-based stream: replication r of a master seed is reproducible alone.
std::mt19937_64 replication_engine(std::uint64_t seed, std::uint64_t replication);

/// Uniform on (0, 1), never exactly 0 or 1.
double uniform_open(std::mt19937_64& rng);
double standard_normal(std::mt19937_64& rng);

/// Y = 1 + floor(log U / log(1 - p)), and 1 when p = 1.
long geometric_draw(double p_tilde, std::mt19937_64& rng);

double draw_p_tilde(const PriorFamily& family, bool shifted, std::mt19937_64& rng);

std::vector<PopulationUnit> draw_population(const ExperimentConfig& config,
                                            std::mt19937_64& rng);

/// Censors at M0; true_p is filled with the response probability.
std::vector<SurveyRecord> censor_population(const std::vector<PopulationUnit>& population,
                                            int max_attempts);

struct ReplicationEstimates {
    double naive = 0.0;
    double oracle = 0.0;
    double alpha1 = 0.0;
    double alpha2 = 0.0;
    double kkt_residual = 0.0;  // mean over the two fits
    bool failed = false;
    std::string failure;
};

ReplicationEstimates run_replication(const ExperimentConfig& config, std::uint64_t replication);

struct ExperimentResult {
    ExperimentConfig config;
    double m_naive = 0.0;
    double m_alpha1 = 0.0;
    double m_alpha2 = 0.0;
    double m_oracle = 0.0;
    double s_naive = 0.0;
    double s_oracle = 0.0;
    double s_alpha1 = 0.0;
    double s_alpha2 = 0.0;
    std::size_t failed_reps = 0;
    double mean_kkt_residual = 0.0;
};

/// Means and root-MSE against 0.5 over the successful replications. Throws
/// NumericalError when more than 1% of replications fail.
ExperimentResult run_experiment(const ExperimentConfig& config);

std::string results_to_csv(const std::vector<ExperimentResult>& rows);
std::vector<ExperimentResult> results_from_csv(const std::string& text);
std::string results_to_json(const std::vector<ExperimentResult>& rows);

struct Example1Result {
    double naive_value = 0.0;
    double eb_value = 0.0;
    double kkt_residual = 0.0;
};

/// Y_i ~ N(1, 1). naive = mean of 1 / max(0.5, Y_i); eb = E(1/theta) under
/// the deconvolved prior on 0.5, 0.55, ..., 3 with Y binned at -3, -2, ..., 5.
Example1Result example1_demo(std::size_t n, std::uint64_t seed);

}  // namespace npeb
