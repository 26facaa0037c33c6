#include "npeb/empirics.hpp"

#include <cmath>

#include "npeb/error.hpp"

namespace npeb {

EmpiricalFrequencies tabulate(const std::vector<std::string>& observations,
                              const OutcomeSpace& space) {
    if (observations.empty()) throw InputError("cannot tabulate an empty sample");
    std::vector<std::uint64_t> counts(space.size(), 0);
    for (const auto& obs : observations) {
        auto j = space.index_of(obs);
        if (!j) throw InputError("observation '" + obs + "' is not in the outcome space");
        ++counts[*j];
    }
    return EmpiricalFrequencies(std::move(counts));
}

CovarianceEstimate multinomial_covariance(const EmpiricalFrequencies& freq, double ridge) {
    if (!(ridge >= 0.0) || !std::isfinite(ridge)) throw InputError("ridge must be >= 0");
    const Vector f = freq.f_star();
    CovarianceEstimate cov;
    cov.ridge = ridge;
    cov.matrix = Matrix(f.asDiagonal()) - f * f.transpose();
    Matrix ridged = cov.matrix;
    ridged.diagonal().array() += ridge;

    Eigen::LLT<Matrix> llt(ridged);
    if (llt.info() != Eigen::Success) {
        throw SingularCovariance("covariance of the reduced frequencies is singular after ridge " +
                                 std::to_string(ridge));
    }
    cov.inverse = llt.solve(Matrix::Identity(f.size(), f.size()));
    cov.inverse = 0.5 * (cov.inverse + cov.inverse.transpose()).eval();
    return cov;
}

}  // namespace npeb
