#include "npeb/deconvolve.hpp"

#include <cmath>
#include <sstream>

#include "json.hpp"
#include "npeb/csv.hpp"
#include "npeb/error.hpp"

namespace npeb {

namespace {

void check_shapes(const EmpiricalFrequencies& freq, const KernelMatrix& kernel,
                  const CovarianceEstimate& cov) {
    if (kernel.rows() != freq.size()) {
        throw InputError("kernel has " + std::to_string(kernel.rows()) +
                         " outcomes but the frequencies have " + std::to_string(freq.size()));
    }
    const auto r = static_cast<Eigen::Index>(freq.size() - 1);
    if (cov.inverse.rows() != r || cov.inverse.cols() != r) {
        throw InputError("covariance estimate has the wrong dimension");
    }
}

}  // namespace

SimplexQP npmle_problem(const EmpiricalFrequencies& freq, const KernelMatrix& kernel,
                        const CovarianceEstimate& cov,
                        const std::vector<CalibrationConstraint>& calib) {
    check_shapes(freq, kernel, cov);
    const Matrix Ps = kernel.reduced();
    const Matrix WP = cov.inverse * Ps;
    SimplexQP qp;
    qp.quadratic = 2.0 * Ps.transpose() * WP;
    qp.quadratic = 0.5 * (qp.quadratic + qp.quadratic.transpose()).eval();
    qp.linear = -2.0 * WP.transpose() * freq.f_star();
    for (const auto& c : calib) {
        if (static_cast<std::size_t>(c.coefficients.size()) != kernel.cols()) {
            throw InputError("calibration constraint '" + c.name + "' has the wrong length");
        }
        qp.equalities.push_back({c.coefficients, c.target});
    }
    return qp;
}

double npmle_quadratic_form(const EmpiricalFrequencies& freq, const KernelMatrix& kernel,
                            const CovarianceEstimate& cov, const Vector& g) {
    const Vector r = freq.f_star() - kernel.reduced() * g;
    return r.dot(cov.inverse * r);
}

MixingEstimate npmle(const EmpiricalFrequencies& freq, const KernelMatrix& kernel,
                     const SupportGrid& grid, const CovarianceEstimate& cov,
                     const std::vector<CalibrationConstraint>& calib, const QPOptions& opts) {
    if (grid.size() != kernel.cols()) {
        throw InputError("grid has " + std::to_string(grid.size()) + " cells but the kernel has " +
                         std::to_string(kernel.cols()) + " columns");
    }
    const SimplexQP qp = npmle_problem(freq, kernel, cov, calib);
    QPSolution sol;
    try {
        sol = solve_qp(qp, opts);
    } catch (const CalibrationInfeasible&) {
        throw;
    } catch (const InfeasibleError& e) {
        const std::size_t idx = e.constraint_index().value_or(0);
        throw CalibrationInfeasible(idx, idx < calib.size() ? calib[idx].name : "", e.what());
    }

    Vector g = sol.x;
    for (Eigen::Index i = 0; i < g.size(); ++i) {
        if (g[i] < -1e-10) {
            throw NumericalError("solver returned mass " + std::to_string(g[i]) + " at cell " +
                                 std::to_string(i));
        }
        g[i] = std::max(g[i], 0.0);
    }
    g /= g.sum();

    MixingEstimate est{grid, g, 0.0, sol.kkt_residual, sol.iterations,
                       sol.status == QPStatus::converged ? EstimateStatus::converged
                                                         : EstimateStatus::max_iterations,
                       calib};
    est.objective = npmle_quadratic_form(freq, kernel, cov, g);
    return est;
}

double functional_value(const MixingEstimate& est, const Functional& h) {
    if (h.values.size() != est.g.size()) {
        throw InputError("functional '" + h.name + "' has " + std::to_string(h.values.size()) +
                         " values for a grid of " + std::to_string(est.g.size()));
    }
    return h.values.dot(est.g);
}

Functional make_functional(const SupportGrid& grid, std::string name,
                           const std::function<double(double, double)>& h) {
    Functional f{std::move(name), Vector(static_cast<Eigen::Index>(grid.size()))};
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double x = grid.is_joint() ? grid.x_value(i) : 0.0;
        const double v = h(x, grid.support_value(i));
        if (!std::isfinite(v)) throw InputError("functional '" + f.name + "' is not finite");
        f.values[static_cast<Eigen::Index>(i)] = v;
    }
    return f;
}

double level_mass(const MixingEstimate& est, std::size_t level) {
    const auto& grid = est.grid;
    if (level >= grid.level_count()) throw InputError("covariate level out of range");
    const auto K = static_cast<Eigen::Index>(grid.support_size());
    return est.g.segment(static_cast<Eigen::Index>(level) * K, K).sum();
}

namespace {

double conditional_mean(const MixingEstimate& est, std::size_t level,
                        const std::function<double(double)>& h) {
    const auto& grid = est.grid;
    if (level >= grid.level_count()) throw InputError("covariate level out of range");
    const double mass = level_mass(est, level);
    if (!(mass > 1e-12)) {
        const std::string where =
            grid.is_joint() ? "x=" + format_number(grid.x_levels()[level]) : "the marginal grid";
        throw UndefinedConditional("no estimated mass at " + where);
    }
    double acc = 0.0;
    for (std::size_t k = 0; k < grid.support_size(); ++k) {
        const std::size_t c = grid.cell(level, k);
        acc += h(grid.response_probability(c)) * est.g[static_cast<Eigen::Index>(c)];
    }
    return acc / mass;
}

}  // namespace

double conditional_mean_p(const MixingEstimate& est, std::size_t level) {
    return conditional_mean(est, level, [](double p) { return p; });
}

double conditional_mean_inv_p(const MixingEstimate& est, std::size_t level) {
    for (std::size_t k = 0; k < est.grid.support_size(); ++k) {
        if (!(est.grid.response_probability(est.grid.cell(level, k)) > 0.0)) {
            throw InputError("grid contains a zero response probability");
        }
    }
    return conditional_mean(est, level, [](double p) { return 1.0 / p; });
}

std::string estimate_to_csv(const MixingEstimate& est) {
    std::ostringstream out;
    out << "x_level,support_value,mass\n";
    for (std::size_t i = 0; i < est.grid.size(); ++i) {
        if (est.grid.is_joint()) out << format_exact(est.grid.x_value(i));
        out << ',' << format_exact(est.grid.support_value(i)) << ','
            << format_exact(est.g[static_cast<Eigen::Index>(i)]) << '\n';
    }
    return out.str();
}

MixingEstimate estimate_from_csv(const std::string& text) {
    const CsvTable t = parse_csv(text, "estimate");
    const auto cx = t.require_column("x_level");
    const auto cs = t.require_column("support_value");
    const auto cm = t.require_column("mass");
    if (t.rows.empty()) throw InputError("estimate file has no rows");

    const bool joint = !t.rows.front()[cx].empty();
    std::vector<double> levels, support, mass;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const auto line = t.line_numbers[r];
        if (row[cx].empty() == joint) throw InputError("line " + std::to_string(line) +
                                                       ": mixed marginal and joint rows");
        const double s = parse_double(row[cs], "support_value", line);
        mass.push_back(parse_double(row[cm], "mass", line));
        if (joint) {
            const double x = parse_double(row[cx], "x_level", line);
            if (levels.empty() || levels.back() != x) levels.push_back(x);
            if (levels.size() == 1) support.push_back(s);
        } else {
            support.push_back(s);
        }
    }
    MixingEstimate est{joint ? SupportGrid::joint(levels, support)
                             : SupportGrid::marginal(support),
                       Vector::Map(mass.data(), static_cast<Eigen::Index>(mass.size())),
                       0.0, 0.0, 0, EstimateStatus::converged, {}};
    if (est.grid.size() != mass.size()) throw InputError("estimate rows do not form a product grid");
    return est;
}

namespace {

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

Vector to_vector(const std::vector<double>& v) {
    return Vector::Map(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

std::string estimate_to_json(const MixingEstimate& est) {
    using nlohmann::ordered_json;
    ordered_json j;
    ordered_json grid;
    grid["kind"] = est.grid.is_joint() ? "joint" : "marginal";
    grid["support"] = est.grid.support();
    grid["x_levels"] = est.grid.x_levels();
    grid["attempts"] = est.grid.attempts() ? ordered_json(*est.grid.attempts()) : ordered_json();
    grid["labels"] = est.grid.labels();
    j["grid"] = grid;
    j["mass"] = to_std(est.g);
    j["objective"] = est.objective;
    j["kkt_residual"] = est.kkt_residual;
    j["iterations"] = est.iterations;
    j["status"] = to_string(est.status);
    ordered_json cal = ordered_json::array();
    for (const auto& c : est.calibration) {
        cal.push_back({{"name", c.name}, {"target", c.target}, {"coefficients", to_std(c.coefficients)}});
    }
    j["calibration"] = cal;
    return j.dump(2) + "\n";
}

MixingEstimate estimate_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
        const auto& g = j.at("grid");
        std::optional<int> attempts;
        if (!g.at("attempts").is_null()) attempts = g.at("attempts").get<int>();
        auto support = g.at("support").get<std::vector<double>>();
        auto levels = g.at("x_levels").get<std::vector<double>>();
        auto labels = g.at("labels").get<std::vector<std::string>>();
        SupportGrid grid = g.at("kind").get<std::string>() == "joint"
                               ? SupportGrid::joint(levels, support, attempts)
                               : SupportGrid::marginal(support, attempts);
        if (grid.labels() != labels) grid = SupportGrid::labeled(labels, support);

        MixingEstimate est{grid, to_vector(j.at("mass").get<std::vector<double>>()),
                           j.at("objective").get<double>(), j.at("kkt_residual").get<double>(),
                           j.at("iterations").get<std::size_t>(),
                           estimate_status_from_string(j.at("status").get<std::string>()),
                           {}};
        for (const auto& c : j.at("calibration")) {
            est.calibration.push_back({to_vector(c.at("coefficients").get<std::vector<double>>()),
                                       c.at("target").get<double>(),
                                       c.at("name").get<std::string>()});
        }
        if (static_cast<std::size_t>(est.g.size()) != est.grid.size()) {
            throw InputError("estimate mass has the wrong length");
        }
        return est;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("malformed estimate JSON: ") + e.what());
    }
}

}  // namespace npeb
