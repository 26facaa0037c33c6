#include "doctest.h"

#include <random>

#include "npeb/empirics.hpp"
#include "npeb/error.hpp"
#include "support/oracles.hpp"

using namespace npeb;

TEST_SUITE("empirics") {

TEST_CASE("tabulate") {
    OutcomeSpace s({"a", "b"});
    const auto f = tabulate({"a", "a", "b", "a"}, s);
    CHECK(f.f_hat()[0] == 0.75);
    CHECK(f.f_star().size() == 1);
    CHECK(f.f_star()[0] == 0.75);
    CHECK(tabulate({"b", "b"}, s).f_star().isZero());
    CHECK_THROWS_WITH_AS(tabulate({"a", "c"}, s), doctest::Contains("'c'"), InputError);
    CHECK_THROWS_AS(tabulate({}, s), InputError);
}

TEST_CASE("tabulate matches an independent recount") {
    std::mt19937_64 rng(5);
    std::vector<std::string> labels{"1", "2", "3", "4", "NR"};
    OutcomeSpace s(labels);
    std::discrete_distribution<int> d({0.1, 0.3, 0.2, 0.15, 0.25});
    std::vector<std::string> obs;
    for (int i = 0; i < 1000; ++i) obs.push_back(labels[static_cast<std::size_t>(d(rng))]);
    const auto f = tabulate(obs, s);
    const auto h = oracle::histogram(obs);
    CHECK(f.n() == 1000);
    for (std::size_t j = 0; j < labels.size(); ++j) {
        const auto it = h.find(labels[j]);
        CHECK(f.counts()[j] == (it == h.end() ? 0 : it->second));
    }
}

TEST_CASE("covariance examples") {
    const EmpiricalFrequencies half({5, 5});
    auto c = multinomial_covariance(half, 0.0);
    CHECK(c.matrix(0, 0) == 0.25);
    CHECK(c.inverse(0, 0) == doctest::Approx(4.0).epsilon(1e-14));
    c = multinomial_covariance(half);
    CHECK(c.ridge == 0.001);
    CHECK(c.inverse(0, 0) == doctest::Approx(1.0 / 0.251).epsilon(1e-14));
    CHECK_NOTHROW(multinomial_covariance(EmpiricalFrequencies({7, 0, 0})));
    CHECK_THROWS_AS(multinomial_covariance(EmpiricalFrequencies({7, 0, 0}), 0.0),
                    SingularCovariance);
}

TEST_CASE("covariance properties on random frequencies") {
    std::mt19937_64 rng(17);
    for (int rep = 0; rep < 50; ++rep) {
        const int Q = 2 + rep % 7;
        const Vector f = oracle::random_simplex_point(Q, rng);
        const auto freq = EmpiricalFrequencies::from_proportions(f, 1000);
        const auto c = multinomial_covariance(freq);
        const Matrix ident = c.inverse * (c.matrix + c.ridge * Matrix::Identity(Q - 1, Q - 1));
        CHECK((ident - Matrix::Identity(Q - 1, Q - 1)).cwiseAbs().maxCoeff() <= 1e-8);
        CHECK((c.inverse - c.inverse.transpose()).cwiseAbs().maxCoeff() == 0.0);
        Eigen::SelfAdjointEigenSolver<Matrix> es(c.matrix);
        CHECK(es.eigenvalues().minCoeff() >= -1e-10);
        const Matrix ref = oracle::ridged_inverse(freq.f_star(), 0.001);
        CHECK((ref - c.inverse).cwiseAbs().maxCoeff() <= 1e-8 * ref.cwiseAbs().maxCoeff());
        // Per-draw covariance: the sample size does not enter.
        const auto c2 = multinomial_covariance(EmpiricalFrequencies::from_proportions(f, 2000));
        CHECK(c2.matrix == c.matrix);
    }
}

TEST_CASE("all counts positive gives a Cholesky-factorable inverse") {
    std::mt19937_64 rng(3);
    for (int rep = 0; rep < 30; ++rep) {
        std::vector<std::uint64_t> counts(6);
        for (auto& c : counts) c = 1 + rng() % 40;
        const auto cov = multinomial_covariance(EmpiricalFrequencies(counts), 0.0);
        CHECK(cov.inverse.llt().info() == Eigen::Success);
    }
}

}  // TEST_SUITE
