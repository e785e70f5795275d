#pragma once

#include <optional>

#include "hidim/convex_fn.hpp"
#include "hidim/distribution.hpp"

namespace hidim {

/// Scalar estimation: one parameter, N noisy measurements y = s0 + eps.
struct ScalarInferenceSetting {
    ScalarDistribution noise;
    std::optional<ScalarDistribution> signal;
    int n_measurements = 1;
};

/// Large-N error of the unbiased M-estimator with loss rho:
/// (1/N) <rho'(eps)^2> / <rho''(eps)>^2. The mean curvature is taken in the
/// distributional sense: piecewise curvature integrated against the noise
/// density plus slope jumps weighted by the density at each kink.
/// Throws NumericalError when <rho''> vanishes (degenerate loss).
double asymptotic_error_unbiased(const TabulatedConvexFunction& rho,
                                 const ScalarInferenceSetting& s);

/// Mean distributional curvature <rho''(eps)>; exposed for tests.
double mean_curvature(const TabulatedConvexFunction& rho, const ScalarDistribution& noise);

struct CramerRaoBound {
    double value;
    bool divergent_fisher;
};

/// 1 / (N J[eps]); value 0 with the flag set when J is effectively infinite.
CramerRaoBound cramer_rao_bound(const ScalarInferenceSetting& s);

struct BayesAsymptotics {
    double q_d;  // effective gaussian variance 1 / (N J[eps])
    double q_s;  // scalar bayesian mmse at that variance
};

BayesAsymptotics bayes_asymptotics(const ScalarInferenceSetting& s);

/// 1 / (N J[eps] + J[s0]).
double bayes_lower_bound(const ScalarInferenceSetting& s);

}  // namespace hidim
