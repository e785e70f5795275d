#pragma once

#include <cstdint>

#include "hidim/convex_fn.hpp"
#include "hidim/convolved.hpp"

namespace hidim {

/// One high-dimensional inference problem: measurement density, priors, and
/// the convex loss/regularizer pair defining the M-estimator.
struct MFTProblem {
    double alpha;
    ScalarDistribution noise;
    ScalarDistribution signal;
    TabulatedConvexFunction loss;         // rho
    TabulatedConvexFunction regularizer;  // sigma; Zero tag = unregularized
};

/// Replica-symmetric solution of the self-consistency equations.
struct OrderParameters {
    double q_s = 0;
    double q_d = 0;
    double lambda_rho = 0;
    double lambda_sigma = 0;
    bool converged = false;
    int iterations = 0;
    double residual = 0;
};

/// Mean-field performance predictions for a solved problem.
struct PerformancePrediction {
    double q_s = 0;
    double q_eps = 0;
    double e_train = 0;
    double e_gen = 0;
};

struct RsOptions {
    double damping = 0.5;    // relaxation factor per sweep
    double tol = 1e-8;       // max relative change stopping rule
    int max_sweeps = 500;
    int polish_sweeps = 10;  // undamped sweeps after the stopping rule fires
    ConvOptions conv;
};

/// Damped fixed-point solver for the four coupled equations. Per sweep:
/// signal statistics at the current (q_d, lambda_sigma) give q_s and the
/// jacobian ratio r = lambda_rho / lambda_sigma; lambda_rho is then solved by
/// bisection so the mean loss-prox jacobian equals 1 - r / alpha; q_d follows
/// from the envelope-gradient moments; all four unknowns are relaxed.
/// Throws ConvergenceError (with the q_s iterate trace) on non-convergence.
/// A Zero regularizer delegates to solve_unregularized.
OrderParameters solve_rs_equations(const MFTProblem& pr, const RsOptions& opt = {});

/// Reduced two-unknown system for sigma = 0 (valid only for alpha > 1):
/// <prox_jacobian of rho> = 1 - 1/alpha and q_s = alpha <M'^2> / (alpha <M''>)^2
/// collapse onto (q_s, lambda_rho); reports q_d = q_s, lambda_sigma = lambda_rho.
OrderParameters solve_unregularized(const MFTProblem& pr, const RsOptions& opt = {});

/// Max relative residual of the four RS equations at the given parameters,
/// evaluated on freshly built convolved densities with `refine` times the
/// panel count (refine = 2 gives the independent verification grid).
double rs_residual(const MFTProblem& pr, const OrderParameters& p, int refine = 1,
                   ConvOptions conv = {});

/// q_eps, E_train, E_gen under the mean-field joint laws.
PerformancePrediction predict_performance(const MFTProblem& pr, const OrderParameters& p,
                                          ConvOptions conv = {});

/// Draws from the mean-field joint distributions: (eps, eps_hat) through the
/// loss prox at scale lambda_rho, (s0, s_hat) through the regularizer prox.
struct MfJointSamples {
    Eigen::ArrayXd eps, eps_hat, s0, s_hat;
};
MfJointSamples mf_joint_samples(const MFTProblem& pr, const OrderParameters& p,
                                std::uint64_t seed, Eigen::Index n);

}  // namespace hidim
