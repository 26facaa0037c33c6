#include "npeb/confidence.hpp"

#include <cmath>

#include <boost/math/special_functions/gamma.hpp>

#include "json.hpp"
#include "npeb/deconvolve.hpp"
#include "npeb/error.hpp"

namespace npeb {

double chi2_quantile(int df, double prob) {
    if (df < 1) throw InputError("chi-square degrees of freedom must be >= 1");
    if (!(prob > 0.0 && prob < 1.0)) throw InputError("chi-square probability must be in (0,1)");
    return 2.0 * boost::math::gamma_p_inv(0.5 * df, prob);
}

FunctionalInterval functional_ci(const Functional& h, const EmpiricalFrequencies& freq,
                                 const KernelMatrix& kernel, const CovarianceEstimate& cov,
                                 double alpha, const std::vector<CalibrationConstraint>& calib,
                                 const CiOptions& opts) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("alpha must be in (0,1)");
    const int df = static_cast<int>(freq.size()) - 1;
    FunctionalInterval ci = functional_ci_with_threshold(h, freq, kernel, cov,
                                                         chi2_quantile(df, 1.0 - alpha), calib,
                                                         opts);
    ci.alpha = alpha;
    return ci;
}

FunctionalInterval functional_ci_with_threshold(const Functional& h,
                                                const EmpiricalFrequencies& freq,
                                                const KernelMatrix& kernel,
                                                const CovarianceEstimate& cov, double threshold,
                                                const std::vector<CalibrationConstraint>& calib,
                                                const CiOptions& opts) {
    if (static_cast<std::size_t>(h.values.size()) != kernel.cols()) {
        throw InputError("functional '" + h.name + "' does not match the kernel columns");
    }
    if (!(threshold > 0.0)) throw InputError("critical value must be positive");
    const double n = static_cast<double>(freq.n());
    const SimplexQP qp = npmle_problem(freq, kernel, cov, calib);

    FunctionalInterval ci;
    ci.functional_name = h.name;
    ci.threshold = threshold;
    ci.df = static_cast<int>(freq.size()) - 1;

    QPSolution fit;
    try {
        fit = solve_qp(qp, opts.qp);
    } catch (const InfeasibleError& e) {
        throw CalibrationInfeasible(e.constraint_index().value_or(0), "", e.what());
    }
    const Vector g_hat = fit.x.cwiseMax(0.0) / fit.x.cwiseMax(0.0).sum();
    if (n * npmle_quadratic_form(freq, kernel, cov, g_hat) > threshold) {
        throw InfeasibleError("the confidence ellipsoid does not meet the simplex (model misfit)");
    }
    ci.npmle_value = h.values.dot(g_hat);

    const double h_min = h.values.minCoeff();
    const double h_max = h.values.maxCoeff();
    const double span = h_max - h_min;
    if (span <= 1e-15 * std::max(1.0, std::abs(h_max))) {
        ci.lower = ci.upper = ci.npmle_value;
        return ci;
    }

    auto feasible = [&](double level) {
        try {
            const QPSolution s = min_quadratic_given_level(qp, h.values, level, opts.qp);
            const Vector g = s.x.cwiseMax(0.0);
            return n * npmle_quadratic_form(freq, kernel, cov, g) <= threshold;
        } catch (const InfeasibleError&) {
            return false;
        }
    };

    // Feasible levels form an interval containing the NPMLE value.
    auto bisect = [&](double inside, double outside) {
        if (feasible(outside)) return outside;
        for (int it = 0; it < opts.max_bisections; ++it) {
            if (std::abs(outside - inside) <= opts.relative_width * span) break;
            const double mid = 0.5 * (inside + outside);
            (feasible(mid) ? inside : outside) = mid;
        }
        return inside;
    };
    ci.upper = bisect(ci.npmle_value, h_max);
    ci.lower = bisect(ci.npmle_value, h_min);
    return ci;
}

std::string interval_to_json(const FunctionalInterval& ci) {
    nlohmann::ordered_json j;
    j["functional_name"] = ci.functional_name;
    j["alpha"] = ci.alpha;
    j["T_L"] = ci.lower;
    j["T_U"] = ci.upper;
    j["npmle_value"] = ci.npmle_value;
    j["threshold"] = ci.threshold;
    j["df"] = ci.df;
    return j.dump(2) + "\n";
}

FunctionalInterval interval_from_json(const std::string& text) {
    try {
        const auto j = nlohmann::json::parse(text);
        FunctionalInterval ci;
        ci.functional_name = j.at("functional_name").get<std::string>();
        ci.alpha = j.at("alpha").get<double>();
        ci.lower = j.at("T_L").get<double>();
        ci.upper = j.at("T_U").get<double>();
        ci.npmle_value = j.at("npmle_value").get<double>();
        ci.threshold = j.at("threshold").get<double>();
        ci.df = j.at("df").get<int>();
        return ci;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("malformed interval JSON: ") + e.what());
    }
}

}  // namespace npeb
