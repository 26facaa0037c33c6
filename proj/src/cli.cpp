#include "npeb/cli.hpp"

#include <algorithm>
#include <iostream>
#include <map>
#include <set>

#include "CLI11.hpp"
#include "json.hpp"
#include "npeb/confidence.hpp"
#include "npeb/csv.hpp"
#include "npeb/deconvolve.hpp"
#include "npeb/empirics.hpp"
#include "npeb/error.hpp"
#include "npeb/kernels.hpp"
#include "npeb/simulate.hpp"
#include "npeb/survey.hpp"

namespace npeb {

std::vector<double> parse_grid_spec(const std::string& spec) {
    if (spec.find(':') != std::string::npos) {
        std::vector<double> parts;
        std::size_t start = 0;
        while (true) {
            const auto colon = spec.find(':', start);
            parts.push_back(parse_double(spec.substr(start, colon - start), "grid", 0));
            if (colon == std::string::npos) break;
            start = colon + 1;
        }
        if (parts.size() != 3) throw InputError("grid spec must be start:step:stop");
        return arithmetic_grid(parts[0], parts[1], parts[2]);
    }
    std::vector<double> out;
    for (const auto& f : split_csv_line(spec)) out.push_back(parse_double(f, "grid", 0));
    if (out.empty()) throw InputError("empty grid");
    return out;
}

std::vector<std::string> read_observations_csv(const std::string& path) {
    const CsvTable t = read_csv(path);
    const auto co = t.require_column("outcome");
    const auto cc = t.column("count");
    std::vector<std::string> obs;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        long count = 1;
        if (cc) {
            count = parse_long(t.rows[i][*cc], "count", t.line_numbers[i]);
            if (count < 0) {
                throw InputError(path + ":" + std::to_string(t.line_numbers[i]) +
                                 ": negative count");
            }
        }
        obs.insert(obs.end(), static_cast<std::size_t>(count), t.rows[i][co]);
    }
    return obs;
}

namespace {

std::map<std::string, std::size_t> label_index(const SupportGrid& grid) {
    std::map<std::string, std::size_t> idx;
    for (std::size_t i = 0; i < grid.labels().size(); ++i) idx[grid.labels()[i]] = i;
    return idx;
}

}  // namespace

std::vector<CalibrationConstraint> read_calibration_csv(const std::string& path,
                                                        const SupportGrid& grid) {
    const CsvTable t = read_csv(path);
    const auto ct = t.require_column("target");
    const auto cn = t.column("name");
    const auto idx = label_index(grid);
    std::vector<std::pair<std::size_t, std::size_t>> cols;  // csv column, grid cell
    for (std::size_t c = 0; c < t.header.size(); ++c) {
        if (c == ct || (cn && c == *cn)) continue;
        auto it = idx.find(t.header[c]);
        if (it == idx.end()) {
            throw InputError(path + ": column '" + t.header[c] + "' is not a grid label");
        }
        cols.emplace_back(c, it->second);
    }
    std::vector<CalibrationConstraint> out;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        const auto line = t.line_numbers[i];
        CalibrationConstraint c{Vector::Zero(static_cast<Eigen::Index>(grid.size())),
                                parse_double(row[ct], "target", line),
                                cn ? row[*cn] : "calibration " + std::to_string(i + 1)};
        for (const auto& [col, cell] : cols) {
            c.coefficients[static_cast<Eigen::Index>(cell)] =
                parse_double(row[col], t.header[col], line);
        }
        out.push_back(std::move(c));
    }
    return out;
}

Functional read_functional_csv(const std::string& path, const SupportGrid& grid) {
    const CsvTable t = read_csv(path);
    const auto cl = t.require_column("label");
    const auto ch = t.require_column("h");
    const auto idx = label_index(grid);
    Functional f{path, Vector::Zero(static_cast<Eigen::Index>(grid.size()))};
    std::vector<bool> seen(grid.size(), false);
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        const auto line = t.line_numbers[i];
        auto it = idx.find(row[cl]);
        if (it == idx.end()) {
            throw InputError(path + ":" + std::to_string(line) + ": unknown grid label '" +
                             row[cl] + "'");
        }
        if (seen[it->second]) {
            throw InputError(path + ":" + std::to_string(line) + ": duplicate label '" +
                             row[cl] + "'");
        }
        seen[it->second] = true;
        f.values[static_cast<Eigen::Index>(it->second)] = parse_double(row[ch], "h", line);
    }
    for (std::size_t i = 0; i < seen.size(); ++i) {
        if (!seen[i]) throw InputError(path + ": no h value for label '" + grid.labels()[i] + "'");
    }
    return f;
}

namespace {

struct ModelArgs {
    std::string observations;
    std::string model = "geometric-truncated";
    std::string kernel_file;
    std::string grid = "0.1:0.01:1";
    int m0 = 8;
    int trials = 3;
    double sigma = 1.0;
    std::string edges = "-3:1:5";
    std::string calibration;
};

void add_model_options(CLI::App* cmd, ModelArgs& a) {
    cmd->add_option("-i,--observations", a.observations, "observation CSV (outcome[,count])")
        ->required();
    cmd->add_option("--model", a.model,
                    "geometric-truncated | geometric-censored | shifted-binomial | normal")
        ->capture_default_str();
    cmd->add_option("--kernel", a.kernel_file, "kernel CSV; overrides --model");
    cmd->add_option("--grid", a.grid, "support grid, start:step:stop or a list")
        ->capture_default_str();
    cmd->add_option("--m0", a.m0, "maximum attempts for the geometric models")
        ->capture_default_str();
    cmd->add_option("--trials", a.trials, "trials for the shifted binomial")
        ->capture_default_str();
    cmd->add_option("--sigma", a.sigma, "noise sd for the normal model")->capture_default_str();
    cmd->add_option("--edges", a.edges, "bin edges for the normal model")->capture_default_str();
    cmd->add_option("--calibration", a.calibration, "calibration CSV");
}

struct Problem {
    KernelMatrix kernel;
    SupportGrid grid;
    EmpiricalFrequencies freq;
    CovarianceEstimate cov;
    std::vector<CalibrationConstraint> calib;
};

Problem load_problem(const ModelArgs& a) {
    std::optional<KernelMatrix> kernel;
    std::optional<SupportGrid> grid;
    if (!a.kernel_file.empty()) {
        auto [k, g] = read_kernel_csv(a.kernel_file);
        kernel = std::move(k);
        grid = std::move(g);
    } else {
        const auto support = parse_grid_spec(a.grid);
        if (a.model == "geometric-truncated") {
            kernel = geometric_truncated_kernel({support, a.m0});
            grid = SupportGrid::marginal(support, a.m0);
        } else if (a.model == "geometric-censored") {
            kernel = geometric_censored_kernel({support, a.m0});
            grid = SupportGrid::marginal(support, a.m0);
        } else if (a.model == "shifted-binomial") {
            kernel = shifted_binomial_kernel({support, a.trials});
            grid = SupportGrid::marginal(support);
        } else if (a.model == "normal") {
            kernel = normal_discretized_kernel({support, a.sigma, parse_grid_spec(a.edges)});
            grid = SupportGrid::marginal(support);
        } else {
            throw InputError("unknown model '" + a.model + "'");
        }
    }
    const auto freq = tabulate(read_observations_csv(a.observations), kernel->outcomes());
    auto cov = multinomial_covariance(freq);
    std::vector<CalibrationConstraint> calib;
    if (!a.calibration.empty()) calib = read_calibration_csv(a.calibration, *grid);
    return {std::move(*kernel), std::move(*grid), freq, std::move(cov), std::move(calib)};
}

std::ostream& out_stream() { return std::cout; }

int cmd_deconvolve(const ModelArgs& a, const std::string& out_csv, const std::string& out_json) {
    const Problem p = load_problem(a);
    const MixingEstimate est = npmle(p.freq, p.kernel, p.grid, p.cov, p.calib);
    if (!out_csv.empty()) write_text_file(out_csv, estimate_to_csv(est));
    if (!out_json.empty()) write_text_file(out_json, estimate_to_json(est));
    if (out_csv.empty() && out_json.empty()) out_stream() << estimate_to_csv(est);
    out_stream() << "objective=" << format_exact(est.objective)
                 << " kkt_residual=" << format_exact(est.kkt_residual)
                 << " iterations=" << est.iterations << " status=" << to_string(est.status)
                 << '\n';
    return est.status == EstimateStatus::converged ? 0 : 2;
}

int cmd_ci(const ModelArgs& a, const std::string& h_file, double alpha, const std::string& out) {
    const Problem p = load_problem(a);
    const Functional h = read_functional_csv(h_file, p.grid);
    const FunctionalInterval ci = functional_ci(h, p.freq, p.kernel, p.cov, alpha, p.calib);
    const std::string text = interval_to_json(ci);
    if (!out.empty()) write_text_file(out, text);
    out_stream() << text;
    return 0;
}

struct AdjustArgs {
    std::string data;
    std::string mode = "censored";
    int m0 = 8;
    int trials = 3;
    std::string grid = "0.1:0.01:1";
    std::string current;
    double population = 0.0;
    std::string out;
};

std::map<double, std::uint64_t> read_current_counts(const std::string& path) {
    const CsvTable t = read_csv(path);
    const auto cx = t.require_column("x");
    const auto cc = t.require_column("count");
    std::map<double, std::uint64_t> counts;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto line = t.line_numbers[i];
        const long c = parse_long(t.rows[i][cc], "count", line);
        if (c < 0) throw InputError(path + ":" + std::to_string(line) + ": negative count");
        counts[parse_double(t.rows[i][cx], "x", line)] += static_cast<std::uint64_t>(c);
    }
    return counts;
}

int cmd_adjust(const AdjustArgs& a) {
    const auto records = read_survey_csv(a.data);
    const auto grid = parse_grid_spec(a.grid);
    nlohmann::ordered_json j;
    j["mode"] = a.mode;

    WeightFit fit;
    std::vector<double> proportions;
    std::vector<double> naive;
    if (a.mode == "hybrid") {
        SurveyDataset history{records, a.trials, SurveyMode::truncated};
        fit = estimate_weights_hybrid(history, grid, a.trials);
        std::map<double, std::uint64_t> current;
        if (!a.current.empty()) {
            current = read_current_counts(a.current);
        } else {
            for (const auto& r : records) {
                if (r.responded && r.y && *r.y > 0) ++current[r.x];
            }
        }
        std::vector<std::uint64_t> m;
        std::vector<double> w, levels;
        for (const auto& [x, c] : current) {
            levels.push_back(x);
            m.push_back(c);
            w.push_back(fit.weight_for(x));
        }
        proportions = weighted_proportions(m, w);
        naive = weighted_proportions(m, std::vector<double>(m.size(), 1.0));
        j["levels"] = levels;
    } else {
        SurveyDataset data{records, a.m0,
                           a.mode == "truncated" ? SurveyMode::truncated : SurveyMode::censored};
        if (a.mode == "truncated") {
            fit = estimate_weights_truncated(data, grid);
        } else if (a.mode == "censored") {
            fit = estimate_weights_censored(data, grid);
        } else {
            throw InputError("unknown mode '" + a.mode + "'");
        }
        proportions = estimate_proportions(data, fit);
        naive = naive_proportions(records, fit.levels);
        j["levels"] = fit.levels;
        j["total"] = estimate_total(data, fit, [](double x) { return x; });
        if (a.mode == "censored" && a.population > 0.0) {
            j["total_mle"] = estimate_total_mle(fit, a.population);
        }
    }
    j["weights"] = fit.weights;
    j["proportions"] = proportions;
    j["naive_proportions"] = naive;
    j["weight_levels"] = fit.levels;
    j["dropped_records"] = fit.dropped_records;
    j["fit"] = {{"objective", fit.estimate.objective},
                {"kkt_residual", fit.estimate.kkt_residual},
                {"iterations", fit.estimate.iterations},
                {"status", to_string(fit.estimate.status)}};
    const std::string text = j.dump(2) + "\n";
    if (!a.out.empty()) write_text_file(a.out, text);
    out_stream() << text;
    return fit.estimate.status == EstimateStatus::converged ? 0 : 2;
}

struct SimulateArgs {
    std::string family = "TwoPts";
    std::vector<double> gamma{0.4};
    std::vector<int> m0{8};
    std::size_t n = 1000;
    std::size_t reps = 200;
    std::uint64_t seed = 20240601;
    std::string grid = "0.1:0.02:1";
    unsigned jobs = 1;
    std::string out;
    std::string json;
};

int cmd_simulate(const SimulateArgs& a) {
    std::vector<ExperimentResult> rows;
    for (int m0 : a.m0) {
        for (double g : a.gamma) {
            ExperimentConfig c;
            c.population = a.n;
            c.max_attempts = m0;
            c.family = {family_from_string(a.family), g};
            c.replications = a.reps;
            c.seed = a.seed;
            c.grid = parse_grid_spec(a.grid);
            c.jobs = a.jobs;
            rows.push_back(run_experiment(c));
        }
    }
    const std::string csv = results_to_csv(rows);
    if (!a.out.empty()) write_text_file(a.out, csv);
    if (!a.json.empty()) write_text_file(a.json, results_to_json(rows));
    out_stream() << csv;
    return 0;
}

int cmd_example1(std::size_t n, std::uint64_t seed) {
    const Example1Result r = example1_demo(n, seed);
    nlohmann::ordered_json j{{"n", n},
                             {"seed", seed},
                             {"naive_value", r.naive_value},
                             {"eb_value", r.eb_value},
                             {"kkt_residual", r.kkt_residual}};
    out_stream() << j.dump(2) << '\n';
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Nonparametric empirical Bayes deconvolution and non-response adjustment"};
    app.set_config("--config", "", "TOML/INI file mirroring the command-line flags");
    app.require_subcommand(1);

    ModelArgs dec;
    std::string dec_out, dec_json;
    auto* d = app.add_subcommand("deconvolve", "estimate the mixing distribution");
    add_model_options(d, dec);
    d->add_option("-o,--out", dec_out, "estimate CSV");
    d->add_option("--json", dec_json, "estimate JSON");

    ModelArgs ci_args;
    std::string h_file, ci_out;
    double alpha = 0.05;
    auto* c = app.add_subcommand("ci", "confidence interval for a linear functional");
    add_model_options(c, ci_args);
    c->add_option("--h-file", h_file, "functional CSV (label,h)")->required();
    c->add_option("--alpha", alpha, "1 - confidence level")->capture_default_str();
    c->add_option("-o,--out", ci_out, "interval JSON");

    AdjustArgs adj;
    auto* a = app.add_subcommand("adjust", "non-response adjusted proportions");
    a->add_option("-i,--data", adj.data, "survey CSV (id,x,y,responded)")->required();
    a->add_option("--mode", adj.mode, "truncated | censored | hybrid")->capture_default_str();
    a->add_option("--m0", adj.m0, "maximum attempts")->capture_default_str();
    a->add_option("--trials", adj.trials, "trials for the hybrid model")->capture_default_str();
    a->add_option("--grid", adj.grid, "p-tilde grid")->capture_default_str();
    a->add_option("--current", adj.current, "hybrid: current-period counts CSV (x,count)");
    a->add_option("--population", adj.population, "censored: N for the model-based total");
    a->add_option("-o,--out", adj.out, "result JSON");

    SimulateArgs sim;
    auto* s = app.add_subcommand("simulate", "Monte-Carlo experiment");
    s->add_option("--family", sim.family, "TwoPts | Uniform | Normal")->capture_default_str();
    s->add_option("--gamma", sim.gamma, "one or more gamma values")->capture_default_str();
    s->add_option("--m0", sim.m0, "one or more M0 values")->capture_default_str();
    s->add_option("--n", sim.n, "population size")->capture_default_str();
    s->add_option("--reps", sim.reps, "replications")->capture_default_str();
    s->add_option("--seed", sim.seed, "master seed")->capture_default_str();
    s->add_option("--grid", sim.grid, "p-tilde grid")->capture_default_str();
    s->add_option("--jobs", sim.jobs, "worker threads")->capture_default_str();
    s->add_option("-o,--out", sim.out, "results CSV");
    s->add_option("--json", sim.json, "results JSON");

    std::size_t ex_n = 100000;
    std::uint64_t ex_seed = 1;
    auto* e = app.add_subcommand("example1", "plug-in versus deconvolution estimate of E(1/theta)");
    e->add_option("--n", ex_n, "sample size")->capture_default_str();
    e->add_option("--seed", ex_seed, "seed")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        return app.exit(err) == 0 ? 0 : 1;
    }

    try {
        if (d->parsed()) return cmd_deconvolve(dec, dec_out, dec_json);
        if (c->parsed()) return cmd_ci(ci_args, h_file, alpha, ci_out);
        if (a->parsed()) return cmd_adjust(adj);
        if (s->parsed()) return cmd_simulate(sim);
        if (e->parsed()) return cmd_example1(ex_n, ex_seed);
    } catch (const InputError& err) {
        std::cerr << "error: " << err.what() << '\n';
        return 1;
    } catch (const NumericalError& err) {
        std::cerr << "numerical failure: " << err.what() << '\n';
        return 2;
    }
    return 1;
}

}  // namespace npeb
