#include "doctest.h"

#include <algorithm>
#include <random>

#include "npeb/deconvolve.hpp"
#include "npeb/empirics.hpp"
#include "npeb/error.hpp"
#include "npeb/kernels.hpp"
#include "support/oracles.hpp"

using namespace npeb;

namespace {

MixingEstimate fit(const KernelMatrix& k, const SupportGrid& grid, const EmpiricalFrequencies& f,
                   const std::vector<CalibrationConstraint>& calib = {}) {
    return npmle(f, k, grid, multinomial_covariance(f), calib);
}

MixingEstimate joint_estimate(std::vector<double> levels, std::vector<double> support,
                              std::vector<double> mass) {
    MixingEstimate e{SupportGrid::joint(std::move(levels), std::move(support)),
                     Vector::Map(mass.data(), static_cast<Eigen::Index>(mass.size())),
                     0.0, 0.0, 0, EstimateStatus::converged, {}};
    return e;
}

}  // namespace

TEST_SUITE("deconvolve") {

TEST_CASE("identity kernel returns the frequencies") {
    const OutcomeSpace s({"a", "b", "c"});
    const KernelMatrix k(s, Matrix::Identity(3, 3));
    const EmpiricalFrequencies f({20, 50, 30});
    const auto e = fit(k, SupportGrid::marginal({1.0, 2.0, 3.0}), f);
    CHECK((e.g - f.f_hat()).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK(e.objective <= 1e-14);
    CHECK(e.status == EstimateStatus::converged);
}

TEST_CASE("noiseless geometric recovery") {
    const std::vector<double> support{0.3, 0.8};
    const auto k = geometric_truncated_kernel({support, 4});
    Vector g0(2);
    g0 << 0.3, 0.7;
    const auto f = EmpiricalFrequencies::from_proportions(k.entries() * g0, 1000);
    const auto e = fit(k, SupportGrid::marginal(support, 4), f);
    CHECK((e.g - g0).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK(e.objective <= 1e-12);

    // The true-value calibration does not hurt.
    Vector a(2);
    a << 1.0, 0.0;
    const auto ec = fit(k, SupportGrid::marginal(support, 4), f, {{a, 0.3, "first"}});
    CHECK(ec.objective <= 1e-12);
    CHECK((ec.g - g0).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("random small instances match the lattice") {
    std::mt19937_64 rng(8);
    for (int rep = 0; rep < 10; ++rep) {
        const int K = 2 + rep % 3;
        const int Q = K + 1;
        const Matrix P = oracle::random_kernel(Q, K, rng);
        std::vector<std::string> labels;
        for (int j = 0; j < Q; ++j) labels.push_back(std::to_string(j));
        const KernelMatrix k(OutcomeSpace(labels), P);
        const auto f = EmpiricalFrequencies(oracle::multinomial(oracle::random_simplex_point(Q, rng), 200, rng));
        std::vector<double> sv;
        for (int i = 0; i < K; ++i) sv.push_back(i + 1.0);
        const auto e = fit(k, SupportGrid::marginal(sv), f);
        const Matrix W = oracle::ridged_inverse(f.f_star(), 0.001);
        double best = std::numeric_limits<double>::infinity();
        oracle::for_each_lattice_point(K, 100, [&](const Vector& g) {
            best = std::min(best, oracle::weighted_misfit(P, f.f_star(), W, g));
        });
        const double at_near = oracle::weighted_misfit(P, f.f_star(), W, oracle::round_to_lattice(e.g, 100));
        CHECK(e.objective <= best + 1e-9);
        CHECK(best - e.objective <= at_near - e.objective + 1e-12);
        CHECK(e.kkt_residual <= 1e-8);
    }
}

TEST_CASE("functionals") {
    const auto e = joint_estimate({0.0, 1.0}, {0.5, 1.0}, {0.1, 0.2, 0.3, 0.4});
    CHECK(functional_value(e, make_functional(e.grid, "one", [](double, double) { return 1.0; })) ==
          doctest::Approx(1.0).epsilon(1e-12));
    const auto ind = make_functional(e.grid, "cell", [](double x, double s) {
        return (x == 1.0 && s == 0.5) ? 1.0 : 0.0;
    });
    CHECK(functional_value(e, ind) == 0.3);
    CHECK_THROWS_AS(functional_value(e, Functional{"short", Vector::Ones(3)}), InputError);
    CHECK_THROWS_AS(make_functional(e.grid, "inf", [](double, double s) { return 1.0 / (s - 0.5); }),
                    InputError);
}

TEST_CASE("conditional means") {
    auto e = joint_estimate({0.0, 1.0}, {0.8, 0.5}, {1.0, 0.0, 0.0, 0.0});
    CHECK(conditional_mean_p(e, 0) == doctest::Approx(0.8));
    CHECK_THROWS_AS(conditional_mean_p(e, 1), UndefinedConditional);

    e = joint_estimate({0.0}, {0.5, 1.0}, {0.5, 0.5});
    CHECK(conditional_mean_p(e, 0) == doctest::Approx(0.75));
    e = joint_estimate({0.0}, {0.5, 1.0}, {1.0, 0.0});
    CHECK(conditional_mean_inv_p(e, 0) == doctest::Approx(2.0));
    e = joint_estimate({0.0}, {0.5, 1.0}, {1.0 / 3.0, 2.0 / 3.0});
    CHECK(conditional_mean_inv_p(e, 0) == doctest::Approx(4.0 / 3.0));

    // p is mapped from p-tilde when the grid carries attempts.
    MixingEstimate m{SupportGrid::joint({0.0}, {0.5}, 2), Vector::Ones(1), 0.0, 0.0, 0,
                     EstimateStatus::converged, {}};
    CHECK(conditional_mean_p(m, 0) == doctest::Approx(0.75));
}

TEST_CASE("tilted conditional identity") {
    // Weights from the response-tilted law p g / E(p) agree with 1 / E(p | x).
    std::mt19937_64 rng(12);
    for (int rep = 0; rep < 20; ++rep) {
        const int L = 1 + rep % 3;
        const int K = 3 + rep % 5;
        std::vector<double> levels, support, mass;
        for (int l = 0; l < L; ++l) levels.push_back(l);
        std::uniform_real_distribution<double> u(0.05, 1.0);
        for (int k = 0; k < K; ++k) support.push_back(u(rng));
        std::sort(support.begin(), support.end());
        const Vector g = oracle::random_simplex_point(L * K, rng);
        Vector tilted(L * K);
        for (int c = 0; c < L * K; ++c) tilted[c] = support[static_cast<std::size_t>(c % K)] * g[c];
        tilted /= tilted.sum();
        const auto grid = SupportGrid::joint(levels, support);
        const MixingEstimate full{grid, g, 0.0, 0.0, 0, EstimateStatus::converged, {}};
        const MixingEstimate resp{grid, tilted, 0.0, 0.0, 0, EstimateStatus::converged, {}};
        for (int l = 0; l < L; ++l) {
            double mass_l = 0.0, mean = 0.0;
            for (int k = 0; k < K; ++k) {
                mass_l += g[l * K + k];
                mean += g[l * K + k] * support[static_cast<std::size_t>(k)];
            }
            const auto ll = static_cast<std::size_t>(l);
            CHECK(std::abs(conditional_mean_p(full, ll) - mean / mass_l) <= 1e-12);
            CHECK(std::abs(conditional_mean_inv_p(resp, ll) - 1.0 / conditional_mean_p(full, ll)) <=
                  1e-10);
        }
    }
}

TEST_CASE("calibration") {
    const std::vector<double> support = arithmetic_grid(0.2, 0.2, 1.0);
    const auto base = geometric_truncated_kernel({support, 4});
    const auto k = joint_kernel(base, {0.0, 1.0}, false);
    const auto grid = SupportGrid::joint({0.0, 1.0}, support, 4);
    std::mt19937_64 rng(2);
    const Vector g0 = oracle::random_simplex_point(static_cast<int>(grid.size()), rng);
    const auto f = EmpiricalFrequencies(oracle::multinomial(k.entries() * g0, 2000, rng));

    Vector male = Vector::Zero(static_cast<Eigen::Index>(grid.size()));
    male.tail(static_cast<Eigen::Index>(support.size())).setOnes();
    const auto e = fit(k, grid, f, {{male, 0.5, "male share"}});
    CHECK(std::abs(male.dot(e.g) - 0.5) <= 1e-8);
    CHECK(std::abs(e.g.sum() - 1.0) <= 1e-9);
    CHECK(e.g.minCoeff() >= 0.0);

    try {
        fit(k, grid, f, {{male, 1.5, "impossible"}});
        FAIL("expected infeasible calibration");
    } catch (const CalibrationInfeasible& err) {
        CHECK(std::string(err.what()).find("impossible") != std::string::npos);
    }
}

TEST_CASE("estimates round trip through CSV and JSON") {
    const std::vector<double> support{0.3, 0.8};
    const auto k = geometric_truncated_kernel({support, 4});
    const auto f = EmpiricalFrequencies({40, 30, 20, 10});
    Vector a(2);
    a << 1.0, 0.0;
    const auto e = fit(k, SupportGrid::marginal(support, 4), f, {{a, 0.4, "first"}});
    const auto csv = estimate_to_csv(e);
    CHECK(estimate_to_csv(estimate_from_csv(csv)) == csv);
    const auto json = estimate_to_json(e);
    const auto back = estimate_from_json(json);
    CHECK(estimate_to_json(back) == json);
    CHECK(back.g == e.g);
    CHECK(back.grid.attempts() == 4);

    const auto je = joint_estimate({0.0, 1.0}, {0.5, 1.0}, {0.1, 0.2, 0.3, 0.4});
    const auto jcsv = estimate_to_csv(je);
    CHECK(jcsv.rfind("x_level,support_value,mass\n0,0.5,0.1\n", 0) == 0);
    CHECK(estimate_to_csv(estimate_from_csv(jcsv)) == jcsv);
    CHECK_THROWS_AS(estimate_from_json("{\"grid\": 3}"), InputError);
}

TEST_CASE("functional error shrinks with n") {
    const std::vector<double> support{0.2, 0.5, 0.9};
    const auto k = geometric_truncated_kernel({support, 8});
    const auto grid = SupportGrid::marginal(support, 8);
    Vector g0(3);
    g0 << 0.3, 0.3, 0.4;
    std::vector<Functional> hs;
    for (int i = 0; i < 5; ++i) {
        hs.push_back(make_functional(grid, "h" + std::to_string(i), [i](double, double s) {
            return std::cos((i + 1) * s);
        }));
    }
    auto error_at = [&](std::uint64_t n) {
        double worst = 0.0;
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            std::mt19937_64 rng(seed);
            const auto e = fit(k, grid, EmpiricalFrequencies(oracle::multinomial(k.entries() * g0, n, rng)));
            double err = 0.0;
            for (const auto& h : hs) err += std::pow(functional_value(e, h) - h.values.dot(g0), 2);
            worst += std::sqrt(err);
        }
        return worst;
    };
    CHECK(error_at(100000) < error_at(1000));
}

}  // TEST_SUITE
