#include "doctest.h"

#include <random>

#include "npeb/error.hpp"
#include "npeb/simulate.hpp"
#include "npeb/survey.hpp"

using namespace npeb;

namespace {

SurveyRecord responder(double x, long y, std::optional<double> p = std::nullopt) {
    return {x, y, true, p};
}

SurveyRecord nonresponder(double x) { return {x, std::nullopt, false, std::nullopt}; }

}  // namespace

TEST_SUITE("survey") {

TEST_CASE("proportion arithmetic") {
    const auto a = weighted_proportions({50, 50}, {1.0, 2.0});
    CHECK(a[0] == doctest::Approx(1.0 / 3.0));
    CHECK(a[1] == doctest::Approx(2.0 / 3.0));
    const auto same = weighted_proportions({10, 30, 60}, {1.7, 1.7, 1.7});
    CHECK(same[0] == doctest::Approx(0.1));
    CHECK(same[2] == doctest::Approx(0.6));
    CHECK(std::abs(same[0] + same[1] + same[2] - 1.0) <= 1e-12);
    CHECK_THROWS_AS(weighted_proportions({0, 0}, {1.0, 1.0}), InputError);
}

TEST_CASE("oracle proportions") {
    const auto o = oracle_proportions({responder(0, 1, 0.5), responder(1, 1, 1.0)}, {0.0, 1.0});
    CHECK(o[0] == doctest::Approx(2.0 / 3.0));
    CHECK(o[1] == doctest::Approx(1.0 / 3.0));
    const auto full = oracle_proportions(
        {responder(0, 1, 1.0), responder(1, 1, 1.0), responder(1, 2, 1.0), nonresponder(0)},
        {0.0, 1.0});
    CHECK(full[1] == doctest::Approx(2.0 / 3.0));
    CHECK_THROWS_AS(oracle_proportions({responder(0, 1, 0.0)}, {0.0}), InputError);
    CHECK_THROWS_AS(oracle_proportions({responder(0, 1)}, {0.0}), InputError);
}

TEST_CASE("totals") {
    SurveyDataset d{{}, 4, SurveyMode::censored};
    for (int i = 0; i < 40; ++i) d.records.push_back(responder(0, 1));
    for (int i = 0; i < 60; ++i) d.records.push_back(responder(1, 1));
    WeightFit w;
    w.levels = {0.0, 1.0};
    w.weights = {2.0, 4.0 / 3.0};
    CHECK(estimate_total(d, w, [](double x) { return x; }) == doctest::Approx(80.0));
    w.weights = {1.0, 1.0};
    CHECK(estimate_total(d, w, [](double x) { return 3.0 * x + 1.0; }) == doctest::Approx(280.0));
    d.records.push_back(responder(2, 1));
    CHECK_THROWS_AS(estimate_total(d, w, [](double x) { return x; }), InputError);
}

TEST_CASE("immediate responders get unit weight") {
    SurveyDataset d{{}, 20, SurveyMode::truncated};
    for (int i = 0; i < 200; ++i) d.records.push_back(responder(0, 1));
    const auto w = estimate_weights_truncated(d, default_probability_grid());
    REQUIRE(w.weights.size() == 1);
    CHECK(w.weights[0] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(w.weights[0] >= 1.0);

    SurveyDataset c{d.records, 20, SurveyMode::censored};
    const auto w2 = estimate_weights_censored(c, default_probability_grid());
    CHECK(w2.weights[0] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("truncated weights on a noiseless two-point population") {
    // p-tilde in {0.3, 0.8} with weights (0.5, 0.5) under the responder law,
    // M0 = 4; counts proportional to the exact outcome probabilities.
    const int M0 = 4;
    const std::vector<double> pt{0.3, 0.8};
    SurveyDataset d{{}, M0, SurveyMode::truncated};
    double expect = 0.0;
    for (double p : pt) expect += 0.5 / response_probability(p, M0);
    // Exact frequencies at n = 10^6 rounded to integers.
    for (int y = 1; y <= M0; ++y) {
        double f = 0.0;
        for (double p : pt) f += 0.5 * std::pow(1.0 - p, y - 1) * p / response_probability(p, M0);
        const long count = std::lround(f * 1e6);
        for (long i = 0; i < count; ++i) d.records.push_back(responder(0, y));
    }
    const auto w = estimate_weights_truncated(d, {0.3, 0.8});
    CHECK(std::abs(w.weights[0] - expect) <= 1e-4);
}

TEST_CASE("censored weight recovers 1 / E(p | x)") {
    // p-tilde in {0.2, 0.6} mixed so that E(p | x) = 0.75 at M0 = 3.
    const int M0 = 3;
    const double p1 = response_probability(0.2, M0), p2 = response_probability(0.6, M0);
    const double w1 = (p2 - 0.75) / (p2 - p1);
    std::mt19937_64 rng(31);
    SurveyDataset d{{}, M0, SurveyMode::censored};
    for (int i = 0; i < 10000; ++i) {
        const double pt = uniform_open(rng) < w1 ? 0.2 : 0.6;
        const long y = geometric_draw(pt, rng);
        d.records.push_back(y <= M0 ? responder(0, y) : nonresponder(0));
    }
    const auto w = estimate_weights_censored(d, {0.2, 0.6});
    CHECK(std::abs(w.weights[0] - 4.0 / 3.0) <= 2e-2);
    CHECK(w.weights[0] >= 1.0);
}

TEST_CASE("mode checks") {
    SurveyDataset t{{responder(0, 1), nonresponder(0)}, 4, SurveyMode::truncated};
    CHECK_THROWS_AS(estimate_weights_truncated(t, {0.5, 1.0}), InputError);
    SurveyDataset bad{{responder(0, 9)}, 4, SurveyMode::truncated};
    CHECK_THROWS_AS(estimate_weights_truncated(bad, {0.5, 1.0}), InputError);
    CHECK_THROWS_AS(estimate_weights_censored(bad, {0.5, 1.0}), InputError);
}

TEST_CASE("relabeling levels permutes proportions") {
    ExperimentConfig cfg;
    cfg.family = {FamilyKind::two_points, 0.3};
    cfg.max_attempts = 6;
    auto rng = replication_engine(5, 0);
    auto records = censor_population(draw_population(cfg, rng), cfg.max_attempts);
    SurveyDataset a{records, 6, SurveyMode::censored};
    for (auto& r : records) r.x = 7.0 - 5.0 * r.x;  // 0 -> 7, 1 -> 2
    SurveyDataset b{records, 6, SurveyMode::censored};
    const auto grid = simulation_grid();
    const auto pa = estimate_proportions(a, estimate_weights_censored(a, grid));
    const auto pb = estimate_proportions(b, estimate_weights_censored(b, grid));
    CHECK(pa[0] == doctest::Approx(pb[1]).epsilon(1e-6));
    CHECK(pa[1] == doctest::Approx(pb[0]).epsilon(1e-6));
}

TEST_CASE("hybrid estimator") {
    // Equal response behaviour across levels leaves the current proportions alone.
    std::mt19937_64 rng(6);
    SurveyDataset hist{{}, 3, SurveyMode::truncated};
    std::binomial_distribution<long> b(3, 0.6);
    for (int i = 0; i < 4000; ++i) hist.records.push_back(responder(i % 2, 1 + b(rng)));
    hist.records.push_back(responder(0, 0));
    const auto w = estimate_weights_hybrid(hist, default_probability_grid(), 3);
    CHECK(w.dropped_records == 1);
    const auto eq = hybrid_estimate({{0.0, 300}, {1.0, 700}}, hist, default_probability_grid(), 3);
    CHECK(std::abs(eq[0] - 0.3) <= 0.02);
    CHECK(std::abs(eq[0] + eq[1] - 1.0) <= 1e-12);

    // Status 0 responds less: its share among responders understates the truth.
    SurveyDataset biased{{}, 3, SurveyMode::truncated};
    std::map<double, std::uint64_t> current;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 20000; ++i) {
        const int x = i % 2;
        const double p = x == 0 ? 0.25 : 0.75;
        // Response probability rises with p; respondents report 1 + Bin(3, p).
        if (u(rng) > p) continue;
        biased.records.push_back(responder(x, 1 + std::binomial_distribution<long>(3, p)(rng)));
        ++current[x];
    }
    const auto naive = static_cast<double>(current[0]) / static_cast<double>(current[0] + current[1]);
    const auto adj = hybrid_estimate(current, biased, default_probability_grid(), 3);
    CHECK(adj[0] > naive);
    CHECK(std::abs(adj[0] - 0.5) < std::abs(naive - 0.5));
}

TEST_CASE("survey CSV") {
    const auto r = parse_survey_csv("id,x,y,responded\n1,0,2,1\n2,1,,0\n3,,NR,0\n", "s.csv");
    REQUIRE(r.size() == 3);
    CHECK(r[0].y.value() == 2);
    CHECK_FALSE(r[1].responded);
    CHECK_FALSE(r[2].y.has_value());
    CHECK_THROWS_WITH_AS(parse_survey_csv("id,x,responded\n1,0,1\n"), doctest::Contains("'y'"),
                         InputError);
    CHECK_THROWS_WITH_AS(parse_survey_csv("id,x,y,responded\n1,0,2,yes\n", "s.csv"),
                         doctest::Contains("s.csv:2"), InputError);
    CHECK_THROWS_AS(parse_survey_csv("id,x,y,responded\n1,0,2,0\n"), InputError);
}

}  // TEST_SUITE
