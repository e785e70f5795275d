// hidim: replica mean-field theory and finite-size validation for
// high-dimensional regularized M-estimation.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "hidim/classical.hpp"
#include "hidim/errors.hpp"
#include "hidim/estimator.hpp"
#include "hidim/harness.hpp"
#include "hidim/optimal.hpp"
#include "hidim/parallel.hpp"
#include "hidim/quadratic.hpp"
#include "hidim/rng.hpp"

using namespace hidim;

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_dir = "out";
    std::string format = "csv";
    std::int64_t seed = -1;
};

nlohmann::json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    return j;
}

void write_file(const std::string& dir, const std::string& name, const std::string& body) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create output directory: " + dir);
    const std::string path = dir + "/" + name;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << body;
    std::cout << "wrote " << path << "\n";
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

SweepConfig load_sweep_config(const CommonOpts& opts) {
    SweepConfig cfg = SweepConfig::from_json(load_json(opts.config_path));
    if (opts.seed >= 0) cfg.mc.base_seed = static_cast<std::uint64_t>(opts.seed);
    return cfg;
}

int finish_table(const ResultTable& table) {
    int failed = 0;
    for (const auto& c : table.cells)
        if (!c.ok) {
            ++failed;
            std::cerr << "cell failed: " << c.procedure << " alpha=" << c.alpha
                      << " snr=" << c.snr << ": " << c.error << "\n";
        }
    std::cout << table.cells.size() - failed << "/" << table.cells.size() << " cells ok\n";
    return failed > 0 ? 2 : 0;
}

int cmd_theory(const CommonOpts& opts) {
    SweepConfig cfg = load_sweep_config(opts);
    cfg.mc.trials = 0;
    const ResultTable table = run_sweep(cfg);
    std::ostringstream csv;
    csv << "procedure,alpha,snr,q_s,q_d,lambda_rho,lambda_sigma,q_eps,e_train,e_gen,"
           "converged,iterations,residual\n";
    for (const auto& c : table.cells) {
        if (!c.ok) continue;
        csv << c.procedure << ',' << fmt(c.alpha) << ',' << fmt(c.snr) << ','
            << fmt(c.params.q_s) << ',' << fmt(c.params.q_d) << ',' << fmt(c.params.lambda_rho)
            << ',' << fmt(c.params.lambda_sigma) << ',' << fmt(c.theory.q_eps) << ','
            << fmt(c.theory.e_train) << ',' << fmt(c.theory.e_gen) << ','
            << (c.params.converged ? "true" : "false") << ',' << c.params.iterations << ','
            << fmt(c.params.residual) << '\n';
    }
    write_file(opts.out_dir, "theory.csv", csv.str());
    if (opts.format == "json" || opts.format == "both")
        write_file(opts.out_dir, "theory.json", table.to_json().dump(2) + "\n");
    return finish_table(table);
}

int cmd_optimal_design(const CommonOpts& opts) {
    const nlohmann::json j = load_json(opts.config_path);
    const auto signal = ScalarDistribution::from_json(j.at("signal"));
    double alpha;
    try {
        alpha = j.at("alpha").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("optimal-design config needs alpha: ") + e.what());
    }
    ConvOptions conv;
    if (j.contains("quadrature")) {
        const auto& q = j.at("quadrature");
        if (q.contains("conv_panels")) conv.panels = q.at("conv_panels").get<int>();
        if (q.contains("support_sigmas"))
            conv.support_sigmas = q.at("support_sigmas").get<double>();
    }
    OptimalSolution sol;
    if (j.value("noiseless", false)) {
        sol = solve_optimal_design_noiseless(signal, alpha, conv);
    } else {
        const auto noise = ScalarDistribution::from_json(j.at("noise"));
        sol = solve_optimal_design(noise, signal, alpha, conv);
    }
    write_file(opts.out_dir, "optimal_design.json", sol.to_json().dump(2) + "\n");
    std::cout << "q_s_opt = " << sol.q_s_opt << ", q_d_opt = " << sol.q_d_opt << "\n";
    return 0;
}

int cmd_quad(const CommonOpts& opts) {
    const nlohmann::json j = load_json(opts.config_path);
    std::vector<double> alphas, snrs;
    try {
        alphas = j.at("alpha_grid").get<std::vector<double>>();
        snrs = j.at("snr_grid").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("quad config needs alpha_grid and snr_grid: ") + e.what());
    }
    std::ostringstream csv;
    csv << "alpha,snr,qbar_closed,qbar_fixedpoint,qbar_mp,qbar_asymptote\n";
    for (double a : alphas)
        for (double s : snrs) {
            const QuadSetting setting{a, s};
            csv << fmt(a) << ',' << fmt(s) << ',' << fmt(ridge_closed_form(setting)) << ','
                << fmt(ridge_rs_fixed_point(setting).qbar_s) << ','
                << fmt(ridge_via_mp_integral(setting));
            if (s >= 10.0)
                csv << ',' << fmt(ridge_high_snr_asymptote(setting));
            else
                csv << ',';
            csv << '\n';
        }
    write_file(opts.out_dir, "quad.csv", csv.str());
    return 0;
}

int cmd_classical(const CommonOpts& opts) {
    const nlohmann::json j = load_json(opts.config_path);
    const auto noise = ScalarDistribution::from_json(j.at("noise"));
    std::optional<ScalarDistribution> signal;
    if (j.contains("signal")) signal = ScalarDistribution::from_json(j.at("signal"));
    std::vector<int> n_grid;
    try {
        n_grid = j.at("n_grid").get<std::vector<int>>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("classical config needs n_grid: ") + e.what());
    }
    std::ostringstream csv;
    csv << "n,loss,asymptotic_error,cramer_rao,bayes_q_d,bayes_q_s,bayes_bound\n";
    const std::vector<std::string> losses =
        j.value("losses", std::vector<std::string>{"ml", "quadratic", "absolute"});
    for (int n : n_grid) {
        const ScalarInferenceSetting setting{noise, signal, n};
        const CramerRaoBound cr = cramer_rao_bound(setting);
        for (const auto& loss : losses) {
            TabulatedConvexFunction rho = TabulatedConvexFunction::quadratic(1.0);
            if (loss == "ml")
                rho = noise.energy_function();
            else if (loss == "absolute")
                rho = TabulatedConvexFunction::absolute_value(1.0);
            else if (loss != "quadratic")
                throw ConfigError("unknown classical loss '" + loss + "'");
            csv << n << ',' << loss << ',' << fmt(asymptotic_error_unbiased(rho, setting)) << ','
                << fmt(cr.value);
            if (signal) {
                const BayesAsymptotics ba = bayes_asymptotics(setting);
                csv << ',' << fmt(ba.q_d) << ',' << fmt(ba.q_s) << ','
                    << fmt(bayes_lower_bound(setting));
            } else {
                csv << ",,,";
            }
            csv << '\n';
        }
    }
    write_file(opts.out_dir, "classical.csv", csv.str());
    return 0;
}

int cmd_simulate(const CommonOpts& opts) {
    const SweepConfig cfg = load_sweep_config(opts);
    std::ostringstream csv;
    csv << "procedure,alpha,snr,trial,seed,q_s_emp,q_eps_emp,e_train_emp,e_gen_emp,"
           "iterations,residual\n";
    int failures = 0;
    for (const auto& proc : cfg.procedures)
        for (double alpha : cfg.alpha_grid)
            for (double snr : cfg.snr_grid) {
                try {
                    ConvOptions conv;
                    conv.panels = cfg.quadrature.conv_panels;
                    conv.support_sigmas = cfg.quadrature.support_sigmas;
                    const double factor =
                        std::sqrt(cfg.signal.variance() / (snr * cfg.noise.variance()));
                    const ScalarDistribution noise = cfg.noise.rescaled(factor);
                    const auto pair =
                        build_procedure(proc, noise, cfg.signal, alpha, snr, conv);
                    const std::uint64_t base =
                        cell_seed(proc.name, alpha, snr, cfg.mc.base_seed);
                    std::vector<std::string> rows(cfg.mc.trials);
                    parallel_for(cfg.mc.trials, [&](int t) {
                        const std::uint64_t seed = derive_seed(base, t);
                        const ProblemInstance inst = generate_instance(
                            alpha, cfg.mc.sqrt_NP, noise, cfg.signal, seed, cfg.mc.test_rows);
                        SolverOptions sopt;
                        sopt.tol = cfg.solver.tol;
                        sopt.max_iters = cfg.solver.max_iters;
                        const SolveResult res =
                            solve_m_estimation(inst, pair.first, pair.second, sopt);
                        std::ostringstream row;
                        row << proc.name << ',' << fmt(alpha) << ',' << fmt(snr) << ',' << t
                            << ',' << seed << ',' << fmt(res.metrics.q_s_emp) << ','
                            << fmt(res.metrics.q_eps_emp) << ',' << fmt(res.metrics.e_train_emp)
                            << ',' << fmt(res.metrics.e_gen_emp) << ',' << res.iterations << ','
                            << fmt(res.iterate_change) << '\n';
                        rows[t] = row.str();
                    });
                    for (const auto& r : rows) csv << r;
                } catch (const std::exception& e) {
                    ++failures;
                    std::cerr << "cell failed: " << proc.name << " alpha=" << alpha
                              << " snr=" << snr << ": " << e.what() << "\n";
                }
            }
    write_file(opts.out_dir, "simulate.csv", csv.str());
    return failures > 0 ? 2 : 0;
}

int cmd_sweep(const CommonOpts& opts) {
    SweepConfig cfg = load_sweep_config(opts);
    if (!opts.format.empty()) cfg.format = opts.format;
    const ResultTable table = run_sweep(cfg);
    emit(table, opts.out_dir.empty() ? cfg.output_dir : opts.out_dir, cfg.format);
    return finish_table(table);
}

int cmd_compare(const CommonOpts& opts) {
    const ResultTable table = ResultTable::from_json(load_json(opts.config_path));
    const CompareReport report = compare_theory_mc(table);
    write_file(opts.out_dir, "compare.json", report.to_json().dump(2) + "\n");
    std::cout << report.rows.size() << " comparisons, " << report.flagged
              << " flagged (|z| > 3), " << report.bound_violations << " bound violations\n";
    for (const auto& r : report.rows)
        if (r.flagged)
            std::cout << "  flagged: " << r.procedure << " alpha=" << r.alpha
                      << " snr=" << r.snr << " " << r.metric << " z=" << r.z << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"replica mean-field theory for high-dimensional regularized M-estimation"};
    app.require_subcommand(1);

    CommonOpts opts;
    const auto add_common = [&](CLI::App* sub, bool needs_config = true) {
        auto* c = sub->add_option("--config", opts.config_path, "JSON configuration file");
        if (needs_config) c->required();
        sub->add_option("--out", opts.out_dir, "output directory");
        sub->add_option("--format", opts.format, "csv|json|both")
            ->check(CLI::IsMember({"csv", "json", "both"}));
        sub->add_option("--seed", opts.seed, "override mc.base_seed");
    };

    auto* theory = app.add_subcommand("theory", "mean-field predictions per (procedure, alpha, snr)");
    add_common(theory);
    auto* design = app.add_subcommand("optimal-design", "construct the optimal loss/regularizer pair");
    add_common(design);
    auto* quad = app.add_subcommand("quad", "quadratic/ridge theory cross-checks");
    add_common(quad);
    auto* classical = app.add_subcommand("classical", "scalar large-N asymptotics and bounds");
    add_common(classical);
    auto* simulate = app.add_subcommand("simulate", "per-trial Monte Carlo rows");
    add_common(simulate);
    auto* sweep = app.add_subcommand("sweep", "theory plus Monte Carlo over the full grid");
    add_common(sweep);
    auto* compare = app.add_subcommand("compare", "z-scores of a sweep result table");
    add_common(compare);

    CLI11_PARSE(app, argc, argv);

    try {
        if (theory->parsed()) return cmd_theory(opts);
        if (design->parsed()) return cmd_optimal_design(opts);
        if (quad->parsed()) return cmd_quad(opts);
        if (classical->parsed()) return cmd_classical(opts);
        if (simulate->parsed()) return cmd_simulate(opts);
        if (sweep->parsed()) return cmd_sweep(opts);
        if (compare->parsed()) return cmd_compare(opts);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
