#include "npeb/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "npeb/csv.hpp"
#include "npeb/deconvolve.hpp"
#include "npeb/empirics.hpp"
#include "npeb/error.hpp"
#include "npeb/kernels.hpp"
#include "npeb/survey.hpp"

namespace npeb {

namespace {

constexpr double kTarget = 0.5;
constexpr double kPi = 3.14159265358979323846;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

std::string to_string(FamilyKind kind) {
    switch (kind) {
        case FamilyKind::two_points: return "TwoPts";
        case FamilyKind::uniform_mix: return "Uniform";
        case FamilyKind::trunc_normal: return "Normal";
    }
    return "?";
}

FamilyKind family_from_string(const std::string& name) {
    std::string s = name;
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "twopts" || s == "twopoints" || s == "two-points") return FamilyKind::two_points;
    if (s == "uniform" || s == "uniformmix") return FamilyKind::uniform_mix;
    if (s == "normal" || s == "truncnormal") return FamilyKind::trunc_normal;
    throw InputError("unknown prior family '" + name + "' (expected TwoPts, Uniform or Normal)");
}

std::vector<double> simulation_grid() { return arithmetic_grid(0.1, 0.02, 1.0); }

void validate(const ExperimentConfig& c) {
    if (c.population < 1) throw InputError("population size must be >= 1");
    if (c.max_attempts < 2) throw InputError("M0 must be >= 2");
    if (c.replications < 1) throw InputError("replications must be >= 1");
    if (c.jobs < 1) throw InputError("jobs must be >= 1");
    const double g = c.family.gamma;
    if (!(g >= 0.0 && std::isfinite(g))) throw InputError("gamma must be >= 0");
    if (c.family.kind == FamilyKind::two_points && !(g < 0.5)) {
        throw InputError("two-point shift gamma must be < 0.5");
    }
    if (c.family.kind == FamilyKind::uniform_mix && g > 1.0) {
        throw InputError("mixing weight gamma must be <= 1");
    }
    if (c.grid.empty()) throw InputError("empty probability grid");
    for (double s : c.grid) {
        if (!(s > 0.0 && s <= 1.0)) throw InputError("grid values must lie in (0, 1]");
    }
}

std::mt19937_64 replication_engine(std::uint64_t seed, std::uint64_t replication) {
    const std::uint64_t a = splitmix64(seed);
    const std::uint64_t b = splitmix64(a ^ splitmix64(replication + 0x632be59bd9b4e019ULL));
    std::seed_seq seq{static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
                      static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32)};
    return std::mt19937_64(seq);
}

double uniform_open(std::mt19937_64& rng) {
    // 53 random bits, shifted to the midpoint of each cell.
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

double standard_normal(std::mt19937_64& rng) {
    const double u1 = uniform_open(rng);
    const double u2 = uniform_open(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

long geometric_draw(double p_tilde, std::mt19937_64& rng) {
    if (!(p_tilde > 0.0 && p_tilde <= 1.0)) throw InputError("p-tilde must be in (0, 1]");
    const double u = uniform_open(rng);
    if (p_tilde >= 1.0) return 1;
    return 1 + static_cast<long>(std::floor(std::log(u) / std::log1p(-p_tilde)));
}

double draw_p_tilde(const PriorFamily& family, bool shifted, std::mt19937_64& rng) {
    const double g = family.gamma;
    switch (family.kind) {
        case FamilyKind::two_points: {
            const double v = uniform_open(rng) < 0.5 ? 0.5 : 0.9;
            return shifted ? v - g : v;
        }
        case FamilyKind::uniform_mix: {
            const double u = uniform_open(rng);
            if (shifted && uniform_open(rng) < g) return 0.1;
            return 0.1 + 0.9 * u;
        }
        case FamilyKind::trunc_normal: {
            const double mean = shifted ? 0.5 - g : 0.5;
            return std::clamp(mean + 0.1 * standard_normal(rng), 0.1, 1.0);
        }
    }
    throw InputError("unknown prior family");
}

std::vector<PopulationUnit> draw_population(const ExperimentConfig& config,
                                            std::mt19937_64& rng) {
    std::vector<PopulationUnit> pop(config.population);
    for (auto& u : pop) {
        const bool group0 = uniform_open(rng) < 0.5;
        u.x = group0 ? 0.0 : 1.0;
        u.p_tilde = draw_p_tilde(config.family, group0, rng);
        u.y = geometric_draw(u.p_tilde, rng);
    }
    return pop;
}

std::vector<SurveyRecord> censor_population(const std::vector<PopulationUnit>& population,
                                            int max_attempts) {
    std::vector<SurveyRecord> out;
    out.reserve(population.size());
    for (const auto& u : population) {
        SurveyRecord r;
        r.x = u.x;
        r.responded = u.y <= max_attempts;
        if (r.responded) r.y = u.y;
        r.true_p = response_probability(u.p_tilde, max_attempts);
        out.push_back(r);
    }
    return out;
}

namespace {

double share_of_zero(const std::vector<double>& levels, const std::vector<double>& alpha) {
    for (std::size_t l = 0; l < levels.size(); ++l) {
        if (levels[l] == 0.0) return alpha[l];
    }
    return 0.0;
}

}  // namespace

ReplicationEstimates run_replication(const ExperimentConfig& config, std::uint64_t replication) {
    ReplicationEstimates est;
    auto rng = replication_engine(config.seed, replication);
    const auto records = censor_population(draw_population(config, rng), config.max_attempts);
    const auto levels = responder_levels(records);
    if (levels.empty()) {
        est.failed = true;
        est.failure = "no responders";
        return est;
    }
    est.naive = share_of_zero(levels, naive_proportions(records, levels));
    est.oracle = share_of_zero(levels, oracle_proportions(records, levels));

    SurveyDataset censored{records, config.max_attempts, SurveyMode::censored};
    SurveyDataset truncated{{}, config.max_attempts, SurveyMode::truncated};
    for (const auto& r : records) {
        if (r.responded) truncated.records.push_back(r);
    }
    try {
        const WeightFit w1 = estimate_weights_truncated(truncated, config.grid);
        const WeightFit w2 = estimate_weights_censored(censored, config.grid);
        est.alpha1 = share_of_zero(w1.levels, estimate_proportions(truncated, w1));
        est.alpha2 = share_of_zero(w2.levels, estimate_proportions(censored, w2));
        est.kkt_residual = 0.5 * (w1.estimate.kkt_residual + w2.estimate.kkt_residual);
    } catch (const NumericalError& e) {
        est.failed = true;
        est.failure = e.what();
    }
    return est;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
    validate(config);
    const std::size_t reps = config.replications;
    std::vector<ReplicationEstimates> all(reps);

    const unsigned jobs = std::min<unsigned>(config.jobs, static_cast<unsigned>(reps));
    if (jobs <= 1) {
        for (std::size_t r = 0; r < reps; ++r) all[r] = run_replication(config, r);
    } else {
        std::vector<std::thread> workers;
        std::vector<std::exception_ptr> errors(jobs);
        for (unsigned j = 0; j < jobs; ++j) {
            workers.emplace_back([&, j] {
                try {
                    for (std::size_t r = j; r < reps; r += jobs) all[r] = run_replication(config, r);
                } catch (...) {
                    errors[j] = std::current_exception();
                }
            });
        }
        for (auto& w : workers) w.join();
        for (auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }

    ExperimentResult res;
    res.config = config;
    std::size_t ok = 0;
    for (const auto& e : all) {
        if (e.failed) {
            ++res.failed_reps;
            continue;
        }
        ++ok;
        res.m_naive += e.naive;
        res.m_alpha1 += e.alpha1;
        res.m_alpha2 += e.alpha2;
        res.m_oracle += e.oracle;
        res.s_naive += (e.naive - kTarget) * (e.naive - kTarget);
        res.s_oracle += (e.oracle - kTarget) * (e.oracle - kTarget);
        res.s_alpha1 += (e.alpha1 - kTarget) * (e.alpha1 - kTarget);
        res.s_alpha2 += (e.alpha2 - kTarget) * (e.alpha2 - kTarget);
        res.mean_kkt_residual += e.kkt_residual;
    }
    if (static_cast<double>(res.failed_reps) > 0.01 * static_cast<double>(reps) || ok == 0) {
        std::string first;
        for (const auto& e : all) {
            if (e.failed) {
                first = e.failure;
                break;
            }
        }
        throw NumericalError(std::to_string(res.failed_reps) + " of " + std::to_string(reps) +
                             " replications failed; first failure: " + first);
    }
    const double k = static_cast<double>(ok);
    for (double* m : {&res.m_naive, &res.m_alpha1, &res.m_alpha2, &res.m_oracle,
                      &res.mean_kkt_residual}) {
        *m /= k;
    }
    for (double* s : {&res.s_naive, &res.s_oracle, &res.s_alpha1, &res.s_alpha2}) {
        *s = std::sqrt(*s / k);
    }
    return res;
}

namespace {

const char* const kResultHeader =
    "family,M0,gamma,N,reps,seed,m_naive,m_alpha1,m_alpha2,S_naive,S_oracle,S_alpha1,S_alpha2,"
    "m_oracle,failed_reps,mean_kkt_residual";

}  // namespace

std::string results_to_csv(const std::vector<ExperimentResult>& rows) {
    std::ostringstream out;
    out << kResultHeader << '\n';
    for (const auto& r : rows) {
        const auto& c = r.config;
        out << to_string(c.family.kind) << ',' << c.max_attempts << ','
            << format_exact(c.family.gamma) << ',' << c.population << ',' << c.replications << ','
            << c.seed << ',' << format_exact(r.m_naive) << ',' << format_exact(r.m_alpha1) << ','
            << format_exact(r.m_alpha2) << ',' << format_exact(r.s_naive) << ','
            << format_exact(r.s_oracle) << ',' << format_exact(r.s_alpha1) << ','
            << format_exact(r.s_alpha2) << ',' << format_exact(r.m_oracle) << ','
            << r.failed_reps << ',' << format_exact(r.mean_kkt_residual) << '\n';
    }
    return out.str();
}

std::vector<ExperimentResult> results_from_csv(const std::string& text) {
    const CsvTable t = parse_csv(text, "results");
    auto col = [&](const char* name) { return t.require_column(name); };
    const auto cf = col("family"), cm = col("M0"), cg = col("gamma"), cn = col("N"),
               cr = col("reps"), cs = col("seed"), c1 = col("m_naive"), c2 = col("m_alpha1"),
               c3 = col("m_alpha2"), c4 = col("S_naive"), c5 = col("S_oracle"),
               c6 = col("S_alpha1"), c7 = col("S_alpha2"), c8 = col("m_oracle"),
               c9 = col("failed_reps"), c10 = col("mean_kkt_residual");
    std::vector<ExperimentResult> out;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        const auto line = t.line_numbers[i];
        ExperimentResult r;
        r.config.family.kind = family_from_string(row[cf]);
        r.config.max_attempts = static_cast<int>(parse_long(row[cm], "M0", line));
        r.config.family.gamma = parse_double(row[cg], "gamma", line);
        r.config.population = static_cast<std::size_t>(parse_long(row[cn], "N", line));
        r.config.replications = static_cast<std::size_t>(parse_long(row[cr], "reps", line));
        try {
            r.config.seed = std::stoull(row[cs]);
        } catch (const std::exception&) {
            throw InputError("line " + std::to_string(line) + ": invalid seed '" + row[cs] + "'");
        }
        r.m_naive = parse_double(row[c1], "m_naive", line);
        r.m_alpha1 = parse_double(row[c2], "m_alpha1", line);
        r.m_alpha2 = parse_double(row[c3], "m_alpha2", line);
        r.s_naive = parse_double(row[c4], "S_naive", line);
        r.s_oracle = parse_double(row[c5], "S_oracle", line);
        r.s_alpha1 = parse_double(row[c6], "S_alpha1", line);
        r.s_alpha2 = parse_double(row[c7], "S_alpha2", line);
        r.m_oracle = parse_double(row[c8], "m_oracle", line);
        r.failed_reps = static_cast<std::size_t>(parse_long(row[c9], "failed_reps", line));
        r.mean_kkt_residual = parse_double(row[c10], "mean_kkt_residual", line);
        out.push_back(r);
    }
    return out;
}

std::string results_to_json(const std::vector<ExperimentResult>& rows) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
        const auto& c = r.config;
        arr.push_back({{"family", to_string(c.family.kind)},
                       {"M0", c.max_attempts},
                       {"gamma", c.family.gamma},
                       {"N", c.population},
                       {"reps", c.replications},
                       {"seed", c.seed},
                       {"m_naive", r.m_naive},
                       {"m_alpha1", r.m_alpha1},
                       {"m_alpha2", r.m_alpha2},
                       {"S_naive", r.s_naive},
                       {"S_oracle", r.s_oracle},
                       {"S_alpha1", r.s_alpha1},
                       {"S_alpha2", r.s_alpha2},
                       {"m_oracle", r.m_oracle},
                       {"failed_reps", r.failed_reps},
                       {"mean_kkt_residual", r.mean_kkt_residual}});
    }
    return arr.dump(2) + "\n";
}

Example1Result example1_demo(std::size_t n, std::uint64_t seed) {
    if (n < 1) throw InputError("sample size must be >= 1");
    auto rng = replication_engine(seed, 0);
    const std::vector<double> support = arithmetic_grid(0.5, 0.05, 3.0);
    const std::vector<double> edges = arithmetic_grid(-3.0, 1.0, 5.0);

    std::vector<std::uint64_t> counts(edges.size() + 1, 0);
    double naive = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double y = 1.0 + standard_normal(rng);
        naive += 1.0 / std::max(0.5, y);
        const auto bin = std::upper_bound(edges.begin(), edges.end(), y) - edges.begin();
        ++counts[static_cast<std::size_t>(bin)];
    }

    const KernelMatrix kernel = normal_discretized_kernel({support, 1.0, edges});
    const EmpiricalFrequencies freq(counts);
    const MixingEstimate est = npmle(freq, kernel, SupportGrid::marginal(support),
                                     multinomial_covariance(freq));
    Example1Result res;
    res.naive_value = naive / static_cast<double>(n);
    res.eb_value = functional_value(
        est, make_functional(est.grid, "1/theta", [](double, double s) { return 1.0 / s; }));
    res.kkt_residual = est.kkt_residual;
    return res;
}

}  // namespace npeb
