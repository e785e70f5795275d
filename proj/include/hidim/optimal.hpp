#pragma once

#include <json.hpp>
#include <optional>
#include <utility>

#include "hidim/convex_fn.hpp"
#include "hidim/convolved.hpp"

namespace hidim {

/// The energy -log p of a convolved density as a convex function:
/// Quadratic tag for Gaussian bases, tabulated (grid, -log p, -score) otherwise.
TabulatedConvexFunction convolved_energy_function(const ConvolvedDensity& conv);

struct UnregularizedOptimal {
    double q_opt;         // minimal solution of q = 1 / (alpha J[eps_q])
    double lower_bound;   // 1 / ((alpha - 1) J[eps])
};

/// Ascending search from the lower bound to the first sign change, then
/// bisection. Requires alpha > 1.
UnregularizedOptimal solve_qopt_unregularized(const ScalarDistribution& noise, double alpha,
                                              ConvOptions conv = {});

/// The optimal unregularized loss: the negated Moreau envelope (at scale
/// q_opt) of the negated energy of the q_opt-convolved noise, normalized so
/// rho(0) = 0.
TabulatedConvexFunction build_rho_opt_unregularized(const ScalarDistribution& noise,
                                                    double alpha, ConvOptions conv = {});
TabulatedConvexFunction build_rho_opt_unregularized(const ScalarDistribution& noise,
                                                    double q_opt_value, ConvOptions conv,
                                                    bool precomputed);

struct RegularizedOptimal {
    double q_s_opt;
    double q_d_opt;
    int iterations;
};

/// Damped alternation of q_d = 1/(alpha J[eps_{q_s}]) and q_s = mmse(signal, q_d)
/// from q_s = <s^2>; works below alpha = 1 with informative priors.
RegularizedOptimal solve_qopt_regularized(const ScalarDistribution& noise,
                                          const ScalarDistribution& signal, double alpha,
                                          ConvOptions conv = {});

/// The optimal loss/regularizer pair, each normalized to vanish at its
/// minimum. The overload taking (q_s_opt, q_d_opt) skips the fixed point.
std::pair<TabulatedConvexFunction, TabulatedConvexFunction> build_optimal_pair(
    const ScalarDistribution& noise, const ScalarDistribution& signal, double alpha,
    ConvOptions conv = {});
std::pair<TabulatedConvexFunction, TabulatedConvexFunction> build_optimal_pair(
    const ScalarDistribution& noise, const ScalarDistribution& signal, double q_s_opt,
    double q_d_opt, ConvOptions conv);

/// 1 / (alpha J[eps_{q_s}] + J[s0]) evaluated at the caller's q_s, so the
/// self-consistent inequality q_s >= bound(q_s) can be tested directly.
double high_dim_lower_bound(const ScalarDistribution& noise, const ScalarDistribution& signal,
                            double alpha, double q_s, ConvOptions conv = {});

struct OptimalTrainGen {
    double q_eps_opt;
    double e_train;
    double e_gen;
};

OptimalTrainGen optimal_train_gen(const ScalarDistribution& noise,
                                  const ScalarDistribution& signal, double alpha,
                                  ConvOptions conv = {});
OptimalTrainGen optimal_train_gen(const ScalarDistribution& noise, double q_s_opt,
                                  ConvOptions conv);

struct NoiselessOptimal {
    double q_s_opt;
    double q_d_opt;
    bool perfect_recovery;
    int iterations;
};

/// Noiseless undersampled optimum: q_d = q_s / alpha and
/// q_s = q_d (1 - q_d J[s_{q_d}]) by damped fixed point; collapse below
/// 1e-12 is reported as perfect recovery. Requires 0 < alpha < 1.
NoiselessOptimal noiseless_qopt(const ScalarDistribution& signal, double alpha,
                                ConvOptions conv = {});

struct NoiselessBound {
    double value;  // (1 - alpha) / J[s0]
    bool perfect_recovery_possible;
};

NoiselessBound noiseless_bound(const ScalarDistribution& signal, double alpha);

/// Full optimal-design record (the `optimal-design` CLI output).
struct OptimalSolution {
    double alpha = 0;
    double q_s_opt = 0;
    double q_d_opt = 0;
    double q_eps_opt = 0;
    double e_train = 0;
    double e_gen = 0;
    bool noiseless_hard_constraint = false;
    std::optional<TabulatedConvexFunction> rho_opt;  // absent in the noiseless case
    std::optional<TabulatedConvexFunction> sigma_opt;
    std::optional<double> bound_unregularized;  // 1/((alpha-1) J[eps]), alpha > 1
    std::optional<double> bound_regularized;    // 1/(alpha J[eps_{q_s}] + J[s0])
    std::optional<double> bound_noiseless;      // (1-alpha)/J[s0], alpha < 1

    nlohmann::json to_json() const;
};

OptimalSolution solve_optimal_design(const ScalarDistribution& noise,
                                     const ScalarDistribution& signal, double alpha,
                                     ConvOptions conv = {});
OptimalSolution solve_optimal_design_noiseless(const ScalarDistribution& signal, double alpha,
                                               ConvOptions conv = {});

}  // namespace hidim
