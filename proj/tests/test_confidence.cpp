#include "doctest.h"

#include <random>

#include "npeb/confidence.hpp"
#include "npeb/deconvolve.hpp"
#include "npeb/empirics.hpp"
#include "npeb/error.hpp"
#include "npeb/kernels.hpp"
#include "support/oracles.hpp"

using namespace npeb;

namespace {

struct Instance {
    Matrix P;
    KernelMatrix kernel;
    EmpiricalFrequencies freq;
    CovarianceEstimate cov;
};

Instance random_instance(int Q, int K, std::uint64_t n, std::mt19937_64& rng) {
    const Matrix P = oracle::random_kernel(Q, K, rng);
    std::vector<std::string> labels;
    for (int j = 0; j < Q; ++j) labels.push_back(std::to_string(j));
    KernelMatrix k(OutcomeSpace(labels), P);
    const Vector g = oracle::random_simplex_point(K, rng);
    EmpiricalFrequencies f(oracle::multinomial(P * g, n, rng));
    auto cov = multinomial_covariance(f);
    return {P, std::move(k), f, std::move(cov)};
}

}  // namespace

TEST_SUITE("confidence") {

TEST_CASE("chi-square quantiles") {
    CHECK(std::abs(chi2_quantile(1, 0.95) - 3.841459) <= 1e-5);
    CHECK(std::abs(chi2_quantile(3, 0.95) - 7.814728) <= 1e-5);
    CHECK(std::abs(chi2_quantile(2, 1.0 - std::exp(-1.0)) - 2.0) <= 1e-12);
    CHECK_THROWS_AS(chi2_quantile(2, 1.0), InputError);
    CHECK_THROWS_AS(chi2_quantile(0, 0.5), InputError);
}

TEST_CASE("constant functional gives a degenerate interval") {
    std::mt19937_64 rng(1);
    const auto in = random_instance(4, 3, 500, rng);
    const auto ci = functional_ci({"c", Vector::Constant(3, 2.5)}, in.freq, in.kernel, in.cov, 0.05);
    CHECK(ci.lower == 2.5);
    CHECK(ci.upper == 2.5);
}

TEST_CASE("huge critical value opens the whole simplex") {
    std::mt19937_64 rng(2);
    const auto in = random_instance(4, 3, 500, rng);
    Vector h(3);
    h << 0.2, -1.0, 3.0;
    const auto ci = functional_ci_with_threshold({"h", h}, in.freq, in.kernel, in.cov, 1e12);
    CHECK(ci.lower == doctest::Approx(-1.0).epsilon(1e-7));
    CHECK(ci.upper == doctest::Approx(3.0).epsilon(1e-7));
}

TEST_CASE("endpoints match the lattice") {
    std::mt19937_64 rng(3);
    for (int rep = 0; rep < 5; ++rep) {
        const int K = 2 + rep % 3;
        const auto in = random_instance(K + 1, K, 200, rng);
        const Vector h = oracle::random_simplex_point(K, rng) * 2.0;
        const auto ci = functional_ci({"h", h}, in.freq, in.kernel, in.cov, 0.05);
        const double n = static_cast<double>(in.freq.n());
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        oracle::for_each_lattice_point(K, 200, [&](const Vector& g) {
            if (n * oracle::weighted_misfit(in.P, in.freq.f_star(), in.cov.inverse, g) <= ci.threshold) {
                lo = std::min(lo, h.dot(g));
                hi = std::max(hi, h.dot(g));
            }
        });
        REQUIRE(std::isfinite(lo));
        CHECK(ci.lower <= lo + 1e-7);
        CHECK(ci.upper >= hi - 1e-7);
        CHECK(lo - ci.lower <= 0.005);
        CHECK(ci.upper - hi <= 0.005);
        CHECK(ci.npmle_value >= ci.lower - 1e-7);
        CHECK(ci.npmle_value <= ci.upper + 1e-7);
    }
}

TEST_CASE("alpha monotonicity and calibration nesting") {
    std::mt19937_64 rng(4);
    for (int rep = 0; rep < 10; ++rep) {
        const auto in = random_instance(5, 4, 300, rng);
        const Vector h = oracle::random_simplex_point(4, rng);
        const auto wide = functional_ci({"h", h}, in.freq, in.kernel, in.cov, 0.01);
        const auto narrow = functional_ci({"h", h}, in.freq, in.kernel, in.cov, 0.2);
        CHECK(wide.lower <= narrow.lower + 1e-7);
        CHECK(wide.upper >= narrow.upper - 1e-7);
        CHECK(narrow.lower <= narrow.upper);

        // Calibrate on the NPMLE's own first-cell mass so the constraint is feasible.
        const auto e = npmle(in.freq, in.kernel, SupportGrid::marginal({1, 2, 3, 4}), in.cov);
        Vector a = Vector::Zero(4);
        a[0] = 1.0;
        const auto cal = functional_ci({"h", h}, in.freq, in.kernel, in.cov, 0.05, {{a, e.g[0], "c"}});
        const auto free = functional_ci({"h", h}, in.freq, in.kernel, in.cov, 0.05);
        CHECK(cal.lower >= free.lower - 1e-7);
        CHECK(cal.upper <= free.upper + 1e-7);
    }
}

TEST_CASE("misfit is reported") {
    // A kernel that cannot produce the data at all.
    Matrix P(3, 2);
    P << 1.0, 0.9, 0.0, 0.1, 0.0, 0.0;
    const KernelMatrix k(OutcomeSpace({"a", "b", "c"}), P);
    const EmpiricalFrequencies f({100, 100, 800});
    const auto cov = multinomial_covariance(f);
    CHECK_THROWS_AS(functional_ci({"h", Vector::Ones(2)}, f, k, cov, 0.05), InfeasibleError);
}

TEST_CASE("interval JSON round trip") {
    FunctionalInterval ci{"mean p", 0.05, 0.25, 0.75, 0.5, 9.4877, 4};
    const auto json = interval_to_json(ci);
    CHECK(json.find("\"T_L\"") != std::string::npos);
    CHECK(interval_to_json(interval_from_json(json)) == json);
    CHECK_THROWS_AS(interval_from_json("[]"), InputError);
}

}  // TEST_SUITE
