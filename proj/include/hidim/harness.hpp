#pragma once

#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "hidim/convex_fn.hpp"
#include "hidim/distribution.hpp"
#include "hidim/mft.hpp"

namespace hidim {

/// The inference procedures constructible from configuration alone.
enum class ProcedureKind { Ml, Map, QuadraticOptimal, Optimal, Custom };

struct ProcedureSpec {
    ProcedureKind kind = ProcedureKind::Map;
    std::string name;
    nlohmann::json rho_source;    // custom only: inline function json or file path
    nlohmann::json sigma_source;

    static ProcedureSpec from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

struct McConfig {
    double sqrt_NP = 250;
    int trials = 20;
    std::uint64_t base_seed = 12345;
    int test_rows = 2000;
};

struct SolverConfigOpts {
    double tol = 1e-8;
    int max_iters = 100000;
};

struct QuadratureOpts {
    int conv_panels = 128;
    double support_sigmas = 13.0;
};

/// Full sweep description; the signal prior is required (trials need a true
/// signal even for unregularized procedures). At each grid point the noise is
/// rescaled so <s^2>/<eps^2> equals the requested snr.
struct SweepConfig {
    ScalarDistribution noise = ScalarDistribution::gaussian(1.0);
    ScalarDistribution signal = ScalarDistribution::gaussian(1.0);
    std::vector<double> alpha_grid;
    std::vector<double> snr_grid;
    std::vector<ProcedureSpec> procedures;
    McConfig mc;
    SolverConfigOpts solver;
    QuadratureOpts quadrature;
    std::string output_dir = "out";
    std::string format = "csv";

    static SweepConfig from_json(const nlohmann::json& j);  // throws ConfigError
    nlohmann::json to_json() const;
};

struct MetricSummary {
    double mean = 0;
    double stddev = 0;
};

struct CellResult {
    std::string procedure;
    double alpha = 0;
    double snr = 0;
    bool ok = false;
    std::string error;

    OrderParameters params;
    PerformancePrediction theory;
    double bound = 0;  // high-dimensional lower bound evaluated at theory q_s

    int trials = 0;
    MetricSummary q_s, q_eps, e_train, e_gen;
};

struct ResultTable {
    std::string build_id;
    std::string config_hash;
    std::uint64_t base_seed = 0;
    std::string timestamp;
    std::vector<CellResult> cells;

    nlohmann::json to_json(bool with_timestamp = true) const;
    static ResultTable from_json(const nlohmann::json& j);

    /// columns exactly: procedure, alpha, snr, metric, theory, bound,
    /// mc_mean, mc_std, trials, converged
    std::string to_csv() const;
};

/// Resolve a procedure into its loss/regularizer pair for a concrete cell.
std::pair<TabulatedConvexFunction, TabulatedConvexFunction> build_procedure(
    const ProcedureSpec& proc, const ScalarDistribution& noise, const ScalarDistribution& signal,
    double alpha, double snr, ConvOptions conv);

/// Theory + Monte Carlo over the full (procedure, alpha, snr) grid. Errors
/// are recorded per cell and the sweep continues. Deterministic end to end
/// for a fixed config.
ResultTable run_sweep(const SweepConfig& cfg);

struct CompareRow {
    std::string procedure;
    double alpha = 0;
    double snr = 0;
    std::string metric;
    double theory = 0;
    double mc_mean = 0;
    double z = 0;
    bool flagged = false;
};

struct CompareReport {
    std::vector<CompareRow> rows;
    int flagged = 0;
    int bound_violations = 0;
    nlohmann::json to_json() const;
};

/// z-scores of MC means against theory (standard error of the mean), flags
/// |z| > 3, and re-verifies that every theory q_s obeys its lower bound.
CompareReport compare_theory_mc(const ResultTable& table);

/// Write results.csv / results.json (format: "csv", "json" or "both").
void emit(const ResultTable& table, const std::string& dir, const std::string& format);

std::string config_hash_hex(const nlohmann::json& canonical);

/// Deterministic per-cell seed base; trial t uses derive_seed(cell_seed, t).
std::uint64_t cell_seed(const std::string& procedure, double alpha, double snr,
                        std::uint64_t base_seed);

inline constexpr const char* kBuildId = "hidim-0.1.0";

}  // namespace hidim
