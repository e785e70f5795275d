#include "hidim/harness.hpp"

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hidim/errors.hpp"
#include "hidim/estimator.hpp"
#include "hidim/optimal.hpp"
#include "hidim/parallel.hpp"
#include "hidim/rng.hpp"

namespace hidim {

namespace {

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

TabulatedConvexFunction load_function_source(const nlohmann::json& src,
                                             const char* design_key) {
    nlohmann::json j = src;
    if (j.is_string()) {
        std::ifstream in(j.get<std::string>());
        if (!in) throw ConfigError("cannot open function file: " + j.get<std::string>());
        in >> j;
    }
    // accept a whole optimal-design document and pull the relevant side
    if (!j.contains("tag") && j.contains(design_key)) j = j.at(design_key);
    return TabulatedConvexFunction::from_json(j);
}

}  // namespace

ProcedureSpec ProcedureSpec::from_json(const nlohmann::json& j) {
    ProcedureSpec p;
    std::string kind;
    if (j.is_string())
        kind = j.get<std::string>();
    else
        kind = j.at("name").get<std::string>();
    p.name = kind;
    if (kind == "ml")
        p.kind = ProcedureKind::Ml;
    else if (kind == "map")
        p.kind = ProcedureKind::Map;
    else if (kind == "quadratic_optimal")
        p.kind = ProcedureKind::QuadraticOptimal;
    else if (kind == "optimal")
        p.kind = ProcedureKind::Optimal;
    else if (kind == "custom") {
        p.kind = ProcedureKind::Custom;
        if (!j.is_object() || !j.contains("rho") || !j.contains("sigma"))
            throw ConfigError("custom procedure needs rho and sigma sources");
        p.rho_source = j.at("rho");
        p.sigma_source = j.at("sigma");
        if (j.contains("label")) p.name = j.at("label").get<std::string>();
    } else
        throw ConfigError("unknown procedure '" + kind + "'");
    return p;
}

nlohmann::json ProcedureSpec::to_json() const {
    switch (kind) {
        case ProcedureKind::Ml: return "ml";
        case ProcedureKind::Map: return "map";
        case ProcedureKind::QuadraticOptimal: return "quadratic_optimal";
        case ProcedureKind::Optimal: return "optimal";
        case ProcedureKind::Custom: {
            nlohmann::json j;
            j["name"] = "custom";
            j["label"] = name;
            j["rho"] = rho_source;
            j["sigma"] = sigma_source;
            return j;
        }
    }
    return {};
}

SweepConfig SweepConfig::from_json(const nlohmann::json& j) {
    SweepConfig cfg;
    try {
        cfg.noise = ScalarDistribution::from_json(j.at("noise"));
        cfg.signal = ScalarDistribution::from_json(j.at("signal"));
        cfg.alpha_grid = j.at("alpha_grid").get<std::vector<double>>();
        if (j.contains("snr_grid")) cfg.snr_grid = j.at("snr_grid").get<std::vector<double>>();
        if (cfg.snr_grid.empty())
            cfg.snr_grid = {cfg.signal.variance() / cfg.noise.variance()};
        for (const auto& p : j.at("procedures")) cfg.procedures.push_back(ProcedureSpec::from_json(p));
        if (j.contains("mc")) {
            const auto& m = j.at("mc");
            if (m.contains("sqrt_NP")) cfg.mc.sqrt_NP = m.at("sqrt_NP").get<double>();
            if (m.contains("trials")) cfg.mc.trials = m.at("trials").get<int>();
            if (m.contains("base_seed")) cfg.mc.base_seed = m.at("base_seed").get<std::uint64_t>();
            if (m.contains("test_rows")) cfg.mc.test_rows = m.at("test_rows").get<int>();
        }
        if (j.contains("solver")) {
            const auto& s = j.at("solver");
            if (s.contains("tol")) cfg.solver.tol = s.at("tol").get<double>();
            if (s.contains("max_iters")) cfg.solver.max_iters = s.at("max_iters").get<int>();
        }
        if (j.contains("quadrature")) {
            const auto& q = j.at("quadrature");
            if (q.contains("conv_panels")) cfg.quadrature.conv_panels = q.at("conv_panels").get<int>();
            if (q.contains("support_sigmas"))
                cfg.quadrature.support_sigmas = q.at("support_sigmas").get<double>();
        }
        if (j.contains("output")) {
            const auto& o = j.at("output");
            if (o.contains("dir")) cfg.output_dir = o.at("dir").get<std::string>();
            if (o.contains("format")) cfg.format = o.at("format").get<std::string>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
    if (cfg.alpha_grid.empty()) throw ConfigError("alpha_grid must be nonempty");
    if (cfg.snr_grid.empty()) throw ConfigError("snr_grid must be nonempty");
    if (cfg.procedures.empty()) throw ConfigError("procedures must be nonempty");
    if (cfg.mc.trials < 0) throw ConfigError("mc.trials must be >= 0");
    for (double a : cfg.alpha_grid)
        if (!(a > 0)) throw ConfigError("alpha grid entries must be positive");
    for (double s : cfg.snr_grid)
        if (!(s > 0)) throw ConfigError("snr grid entries must be positive");
    // custom procedures must reference parseable functions
    for (const auto& p : cfg.procedures)
        if (p.kind == ProcedureKind::Custom) {
            load_function_source(p.rho_source, "rho_opt");
            load_function_source(p.sigma_source, "sigma_opt");
        }
    return cfg;
}

nlohmann::json SweepConfig::to_json() const {
    nlohmann::json j;
    j["noise"] = noise.to_json();
    j["signal"] = signal.to_json();
    j["alpha_grid"] = alpha_grid;
    j["snr_grid"] = snr_grid;
    nlohmann::json procs = nlohmann::json::array();
    for (const auto& p : procedures) procs.push_back(p.to_json());
    j["procedures"] = std::move(procs);
    j["mc"] = {{"sqrt_NP", mc.sqrt_NP},
               {"trials", mc.trials},
               {"base_seed", mc.base_seed},
               {"test_rows", mc.test_rows}};
    j["solver"] = {{"tol", solver.tol}, {"max_iters", solver.max_iters}};
    j["quadrature"] = {{"conv_panels", quadrature.conv_panels},
                       {"support_sigmas", quadrature.support_sigmas}};
    j["output"] = {{"dir", output_dir}, {"format", format}};
    return j;
}

std::string config_hash_hex(const nlohmann::json& canonical) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a(canonical.dump())));
    return buf;
}

std::uint64_t cell_seed(const std::string& procedure, double alpha, double snr,
                        std::uint64_t base_seed) {
    return fnv1a(procedure + "|" + format_double(alpha) + "|" + format_double(snr)) ^ base_seed;
}

std::pair<TabulatedConvexFunction, TabulatedConvexFunction> build_procedure(
    const ProcedureSpec& proc, const ScalarDistribution& noise, const ScalarDistribution& signal,
    double alpha, double snr, ConvOptions conv) {
    switch (proc.kind) {
        case ProcedureKind::Ml:
            return {noise.energy_function(), TabulatedConvexFunction::zero()};
        case ProcedureKind::Map:
            return {noise.energy_function(), signal.energy_function()};
        case ProcedureKind::QuadraticOptimal:
            return {TabulatedConvexFunction::quadratic(1.0),
                    TabulatedConvexFunction::quadratic(1.0 / snr)};
        case ProcedureKind::Optimal:
            return build_optimal_pair(noise, signal, alpha, conv);
        case ProcedureKind::Custom:
            return {load_function_source(proc.rho_source, "rho_opt"),
                    load_function_source(proc.sigma_source, "sigma_opt")};
    }
    throw ConfigError("unreachable procedure kind");
}

namespace {

MetricSummary summarize(const std::vector<double>& xs) {
    MetricSummary s;
    if (xs.empty()) return s;
    double acc = 0;
    for (double x : xs) acc += x;
    s.mean = acc / xs.size();
    double var = 0;
    for (double x : xs) var += (x - s.mean) * (x - s.mean);
    s.stddev = xs.size() > 1 ? std::sqrt(var / (xs.size() - 1)) : 0.0;
    return s;
}

CellResult run_cell(const SweepConfig& cfg, const ProcedureSpec& proc, double alpha, double snr) {
    CellResult cell;
    cell.procedure = proc.name;
    cell.alpha = alpha;
    cell.snr = snr;

    ConvOptions conv;
    conv.panels = cfg.quadrature.conv_panels;
    conv.support_sigmas = cfg.quadrature.support_sigmas;

    // rescale the noise so <s^2>/<eps^2> matches the requested snr
    const double factor = std::sqrt(cfg.signal.variance() / (snr * cfg.noise.variance()));
    const ScalarDistribution noise = cfg.noise.rescaled(factor);
    const ScalarDistribution& signal = cfg.signal;

    const auto pair = build_procedure(proc, noise, signal, alpha, snr, conv);

    if (proc.kind == ProcedureKind::Optimal) {
        const RegularizedOptimal ro = solve_qopt_regularized(noise, signal, alpha, conv);
        cell.params.q_s = ro.q_s_opt;
        cell.params.q_d = ro.q_d_opt;
        cell.params.lambda_rho = ro.q_s_opt;
        cell.params.lambda_sigma = ro.q_d_opt;
        cell.params.iterations = ro.iterations;
        const ConvolvedDensity ce(noise, ro.q_s_opt, conv);
        cell.params.residual =
            std::abs(ro.q_d_opt - 1.0 / (alpha * ce.fisher_information())) /
            (1.0 + ro.q_d_opt);
        cell.params.converged = cell.params.residual < 1e-8;
        const OptimalTrainGen tg = optimal_train_gen(noise, ro.q_s_opt, conv);
        cell.theory.q_s = ro.q_s_opt;
        cell.theory.q_eps = tg.q_eps_opt;
        cell.theory.e_train = tg.e_train;
        cell.theory.e_gen = tg.e_gen;
    } else {
        MFTProblem pr{alpha, noise, signal, pair.first, pair.second};
        RsOptions ropt;
        ropt.conv = conv;
        cell.params = solve_rs_equations(pr, ropt);
        cell.theory = predict_performance(pr, cell.params, conv);
    }
    cell.bound = high_dim_lower_bound(noise, signal, alpha, cell.theory.q_s, conv);

    if (cfg.mc.trials > 0) {
        const std::uint64_t base = cell_seed(proc.name, alpha, snr, cfg.mc.base_seed);
        std::vector<double> qs(cfg.mc.trials), qe(cfg.mc.trials), et(cfg.mc.trials),
            eg(cfg.mc.trials);
        std::vector<std::string> trial_errors(cfg.mc.trials);
        parallel_for(cfg.mc.trials, [&](int t) {
            try {
                const ProblemInstance inst =
                    generate_instance(alpha, cfg.mc.sqrt_NP, noise, signal,
                                      derive_seed(base, t), cfg.mc.test_rows);
                EstimateMetrics m;
                if (pair.first.tag() == FunctionTag::Quadratic &&
                    pair.second.tag() == FunctionTag::Quadratic) {
                    const double gamma = pair.second.coefficient() / pair.first.coefficient();
                    m = evaluate_estimate(inst, ridge_analytic(inst, gamma));
                } else if (pair.first.tag() == FunctionTag::Quadratic &&
                           pair.second.tag() == FunctionTag::Zero) {
                    m = evaluate_estimate(
                        inst, inst.X.colPivHouseholderQr().solve(inst.y).eval());
                } else {
                    SolverOptions sopt;
                    sopt.tol = cfg.solver.tol;
                    sopt.max_iters = cfg.solver.max_iters;
                    m = solve_m_estimation(inst, pair.first, pair.second, sopt).metrics;
                }
                qs[t] = m.q_s_emp;
                qe[t] = m.q_eps_emp;
                et[t] = m.e_train_emp;
                eg[t] = m.e_gen_emp;
            } catch (const std::exception& e) {
                trial_errors[t] = e.what();
            }
        });
        for (const auto& err : trial_errors)
            if (!err.empty()) throw NumericalError("trial failed: " + err);
        cell.trials = cfg.mc.trials;
        cell.q_s = summarize(qs);
        cell.q_eps = summarize(qe);
        cell.e_train = summarize(et);
        cell.e_gen = summarize(eg);
    }
    cell.ok = true;
    return cell;
}

}  // namespace

ResultTable run_sweep(const SweepConfig& cfg) {
    ResultTable table;
    table.build_id = kBuildId;
    table.config_hash = config_hash_hex(cfg.to_json());
    table.base_seed = cfg.mc.base_seed;
    const auto now = std::chrono::system_clock::now();
    table.timestamp = std::to_string(
        std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count());

    for (const auto& proc : cfg.procedures)
        for (double alpha : cfg.alpha_grid)
            for (double snr : cfg.snr_grid) {
                try {
                    table.cells.push_back(run_cell(cfg, proc, alpha, snr));
                } catch (const std::exception& e) {
                    CellResult cell;
                    cell.procedure = proc.name;
                    cell.alpha = alpha;
                    cell.snr = snr;
                    cell.ok = false;
                    cell.error = e.what();
                    table.cells.push_back(cell);
                }
            }
    return table;
}

nlohmann::json ResultTable::to_json(bool with_timestamp) const {
    nlohmann::json j;
    j["build_id"] = build_id;
    j["config_hash"] = config_hash;
    j["base_seed"] = base_seed;
    if (with_timestamp) j["timestamp"] = timestamp;
    nlohmann::json cells_json = nlohmann::json::array();
    for (const auto& c : cells) {
        nlohmann::json cj;
        cj["procedure"] = c.procedure;
        cj["alpha"] = c.alpha;
        cj["snr"] = c.snr;
        cj["ok"] = c.ok;
        if (!c.ok) {
            cj["error"] = c.error;
            cells_json.push_back(std::move(cj));
            continue;
        }
        cj["params"] = {{"q_s", c.params.q_s},
                        {"q_d", c.params.q_d},
                        {"lambda_rho", c.params.lambda_rho},
                        {"lambda_sigma", c.params.lambda_sigma},
                        {"converged", c.params.converged},
                        {"iterations", c.params.iterations},
                        {"residual", c.params.residual}};
        cj["theory"] = {{"q_s", c.theory.q_s},
                        {"q_eps", c.theory.q_eps},
                        {"e_train", c.theory.e_train},
                        {"e_gen", c.theory.e_gen}};
        cj["bound"] = c.bound;
        cj["trials"] = c.trials;
        if (c.trials > 0) {
            cj["mc"] = {{"q_s", {{"mean", c.q_s.mean}, {"std", c.q_s.stddev}}},
                        {"q_eps", {{"mean", c.q_eps.mean}, {"std", c.q_eps.stddev}}},
                        {"e_train", {{"mean", c.e_train.mean}, {"std", c.e_train.stddev}}},
                        {"e_gen", {{"mean", c.e_gen.mean}, {"std", c.e_gen.stddev}}}};
        }
        cells_json.push_back(std::move(cj));
    }
    j["cells"] = std::move(cells_json);
    return j;
}

ResultTable ResultTable::from_json(const nlohmann::json& j) {
    ResultTable t;
    try {
        t.build_id = j.at("build_id").get<std::string>();
        t.config_hash = j.at("config_hash").get<std::string>();
        t.base_seed = j.at("base_seed").get<std::uint64_t>();
        if (j.contains("timestamp")) t.timestamp = j.at("timestamp").get<std::string>();
        for (const auto& cj : j.at("cells")) {
            CellResult c;
            c.procedure = cj.at("procedure").get<std::string>();
            c.alpha = cj.at("alpha").get<double>();
            c.snr = cj.at("snr").get<double>();
            c.ok = cj.at("ok").get<bool>();
            if (!c.ok) {
                c.error = cj.value("error", "");
                t.cells.push_back(c);
                continue;
            }
            const auto& pj = cj.at("params");
            c.params.q_s = pj.at("q_s").get<double>();
            c.params.q_d = pj.at("q_d").get<double>();
            c.params.lambda_rho = pj.at("lambda_rho").get<double>();
            c.params.lambda_sigma = pj.at("lambda_sigma").get<double>();
            c.params.converged = pj.at("converged").get<bool>();
            c.params.iterations = pj.at("iterations").get<int>();
            c.params.residual = pj.at("residual").get<double>();
            const auto& tj = cj.at("theory");
            c.theory.q_s = tj.at("q_s").get<double>();
            c.theory.q_eps = tj.at("q_eps").get<double>();
            c.theory.e_train = tj.at("e_train").get<double>();
            c.theory.e_gen = tj.at("e_gen").get<double>();
            c.bound = cj.at("bound").get<double>();
            c.trials = cj.at("trials").get<int>();
            if (c.trials > 0) {
                const auto& mj = cj.at("mc");
                auto get = [&](const char* k) {
                    return MetricSummary{mj.at(k).at("mean").get<double>(),
                                         mj.at(k).at("std").get<double>()};
                };
                c.q_s = get("q_s");
                c.q_eps = get("q_eps");
                c.e_train = get("e_train");
                c.e_gen = get("e_gen");
            }
            t.cells.push_back(c);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed result table: ") + e.what());
    }
    return t;
}

std::string ResultTable::to_csv() const {
    std::ostringstream out;
    out << "procedure,alpha,snr,metric,theory,bound,mc_mean,mc_std,trials,converged\n";
    for (const auto& c : cells) {
        if (!c.ok) continue;
        const struct {
            const char* name;
            double theory;
            const MetricSummary* mc;
            bool with_bound;
        } rows[4] = {{"q_s", c.theory.q_s, &c.q_s, true},
                     {"q_eps", c.theory.q_eps, &c.q_eps, false},
                     {"e_train", c.theory.e_train, &c.e_train, false},
                     {"e_gen", c.theory.e_gen, &c.e_gen, false}};
        for (const auto& r : rows) {
            out << c.procedure << ',' << format_double(c.alpha) << ',' << format_double(c.snr)
                << ',' << r.name << ',' << format_double(r.theory) << ','
                << (r.with_bound ? format_double(c.bound) : std::string()) << ',';
            if (c.trials > 0)
                out << format_double(r.mc->mean) << ',' << format_double(r.mc->stddev);
            else
                out << ',';
            out << ',' << c.trials << ',' << (c.params.converged ? "true" : "false") << '\n';
        }
    }
    return out.str();
}

CompareReport compare_theory_mc(const ResultTable& table) {
    CompareReport report;
    for (const auto& c : table.cells) {
        if (!c.ok) continue;
        if (c.theory.q_s < c.bound - 1e-9) ++report.bound_violations;
        if (c.trials < 2) continue;
        const struct {
            const char* name;
            double theory;
            const MetricSummary* mc;
        } rows[4] = {{"q_s", c.theory.q_s, &c.q_s},
                     {"q_eps", c.theory.q_eps, &c.q_eps},
                     {"e_train", c.theory.e_train, &c.e_train},
                     {"e_gen", c.theory.e_gen, &c.e_gen}};
        for (const auto& r : rows) {
            CompareRow row;
            row.procedure = c.procedure;
            row.alpha = c.alpha;
            row.snr = c.snr;
            row.metric = r.name;
            row.theory = r.theory;
            row.mc_mean = r.mc->mean;
            const double se = r.mc->stddev / std::sqrt(static_cast<double>(c.trials));
            if (se > 0)
                row.z = (r.mc->mean - r.theory) / se;
            else
                row.z = (r.mc->mean == r.theory) ? 0.0
                                                 : std::numeric_limits<double>::infinity();
            row.flagged = std::abs(row.z) > 3.0;
            if (row.flagged) ++report.flagged;
            report.rows.push_back(std::move(row));
        }
    }
    return report;
}

nlohmann::json CompareReport::to_json() const {
    nlohmann::json j;
    j["flagged"] = flagged;
    j["bound_violations"] = bound_violations;
    nlohmann::json rows_json = nlohmann::json::array();
    for (const auto& r : rows) {
        rows_json.push_back({{"procedure", r.procedure},
                             {"alpha", r.alpha},
                             {"snr", r.snr},
                             {"metric", r.metric},
                             {"theory", r.theory},
                             {"mc_mean", r.mc_mean},
                             {"z", r.z},
                             {"flagged", r.flagged}});
    }
    j["rows"] = std::move(rows_json);
    return j;
}

void emit(const ResultTable& table, const std::string& dir, const std::string& format) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create output directory: " + dir);
    if (format == "csv" || format == "both") {
        const std::string path = dir + "/results.csv";
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot write " + path);
        out << table.to_csv();
    }
    if (format == "json" || format == "both") {
        const std::string path = dir + "/results.json";
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot write " + path);
        out << table.to_json().dump(2) << '\n';
    }
    if (format != "csv" && format != "json" && format != "both")
        throw ConfigError("unknown output format '" + format + "'");
}

}  // namespace hidim
