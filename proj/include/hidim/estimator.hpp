#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <vector>

#include "hidim/convex_fn.hpp"
#include "hidim/distribution.hpp"

namespace hidim {

/// One finite-size inference instance: y = X s0 + eps with iid gaussian
/// design entries of variance 1/P, plus a held-out test set.
struct ProblemInstance {
    Eigen::MatrixXd X;
    Eigen::VectorXd s0;
    Eigen::VectorXd eps;
    Eigen::VectorXd y;
    Eigen::MatrixXd X_test;
    Eigen::VectorXd y_test;
    double alpha = 0;
    std::uint64_t seed = 0;

    int n() const { return static_cast<int>(X.rows()); }
    int p() const { return static_cast<int>(X.cols()); }
};

/// P = round(sqrt_NP / sqrt(alpha)), N = round(alpha P); deterministic per
/// seed. Without a noise distribution the measurements are exactly X s0
/// (the noiseless compressed-sensing setting).
ProblemInstance generate_instance(double alpha, double sqrt_NP,
                                  const std::optional<ScalarDistribution>& noise,
                                  const ScalarDistribution& signal, std::uint64_t seed,
                                  int test_rows = 2000);

/// Empirical counterparts of the mean-field performance measures.
struct EstimateMetrics {
    double q_s_emp = 0;
    double q_eps_emp = 0;
    double e_train_emp = 0;
    double e_gen_emp = 0;
    bool has_e_gen = false;
    int solver_iterations = 0;
    double solver_residual = 0;
};

EstimateMetrics evaluate_estimate(const ProblemInstance& inst, const Eigen::VectorXd& s_hat);

struct SolverOptions {
    double tol = 1e-8;        // relative iterate-change stopping rule
    int max_iters = 100000;
    int power_iters = 50;     // operator-norm estimation
    double step_safety = 1.05;
    int record_every = 10;    // objective recording cadence
};

struct SolveResult {
    Eigen::VectorXd s_hat;
    EstimateMetrics metrics;
    int iterations = 0;
    double iterate_change = 0;
    double certificate = 0;            // subgradient residual, infinity norm
    bool converged = false;
    std::vector<double> objective_history;  // incumbent objective, recorded cadence
};

/// First-order primal-dual splitting (loss handled through its conjugate prox
/// by Moreau decomposition, regularizer through its primal prox; steps from a
/// power-iteration estimate of ||X||). The returned point is the incumbent:
/// the best-objective primal iterate seen, so the recorded objective sequence
/// is nonincreasing by construction. Throws ConvergenceError if the iterate
/// change is still above 1e-5 at the iteration cap.
SolveResult solve_m_estimation(const ProblemInstance& inst, const TabulatedConvexFunction& rho,
                               const TabulatedConvexFunction& sigma,
                               const SolverOptions& opts = {});

/// Ridge closed form (X^T X + gamma I)^{-1} X^T y via LDLT.
Eigen::VectorXd ridge_analytic(const ProblemInstance& inst, double gamma);

/// Noiseless constrained program: minimize sum sigma(s_i) subject to X s = y,
/// by Douglas-Rachford splitting between the separable prox and the affine
/// projection (precomputed LDLT of X X^T). Requires N < P and eps = 0.
SolveResult solve_noiseless_constrained(const ProblemInstance& inst,
                                        const TabulatedConvexFunction& sigma,
                                        const SolverOptions& opts = {});

/// Objective of the M-estimation program at s.
double m_objective(const ProblemInstance& inst, const TabulatedConvexFunction& rho,
                   const TabulatedConvexFunction& sigma, const Eigen::VectorXd& s);

}  // namespace hidim
