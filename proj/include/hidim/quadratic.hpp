#pragma once

#include <Eigen/Core>
#include <cstdint>

namespace hidim {

/// Quadratic (ridge) inference setting at the optimal regularization weight
/// gamma = 1/SNR; performance depends on the distributions only through SNR.
struct QuadSetting {
    double alpha;
    double snr;

    double phi() const { return 1.0 / snr; }
    double gamma() const { return 1.0 / snr; }
};

struct RidgeFixedPoint {
    double q_d;
    double qbar_s;  // fraction of unexplained variance q_s / <s^2>
};

/// Solves q_d = (<eps^2> + q_s)/alpha together with
/// qbar = 1 / (1 + <s^2>/q_d) by substitution to a quadratic in qbar
/// (numerically stable root form). Normalization <s^2> = 1.
RidgeFixedPoint ridge_rs_fixed_point(const QuadSetting& s);

/// qbar = (1 - alpha - phi + sqrt((phi + alpha - 1)^2 + 4 phi)) / 2.
double ridge_closed_form(const QuadSetting& s);

/// High-SNR limits: 1 - alpha below the critical density, SNR^{-1/2} at it,
/// 1/(SNR (alpha - 1)) above it. Requires snr >= 10.
double ridge_high_snr_asymptote(const QuadSetting& s);

/// Marchenko-Pastur eigenvalue density of X^T X for N/P = alpha designs with
/// entry variance 1/P.
struct MPDensity {
    double alpha;
    double lambda_minus;  // (sqrt(alpha) - 1)^2
    double lambda_plus;   // (sqrt(alpha) + 1)^2
    double atom_weight;   // max(0, 1 - alpha) at lambda = 0

    /// Continuous part only; zero outside [lambda_minus, lambda_plus].
    double density(double lambda) const;
};

MPDensity mp_density(double alpha);

/// qbar via the random-matrix route: integral of (1 + lambda SNR)^{-1} against
/// the MP density, the edge singularities removed by the substitution
/// lambda = lambda_- + (lambda_+ - lambda_-) sin^2(theta), plus the atom term.
double ridge_via_mp_integral(const QuadSetting& s);

/// Eigenvalues (ascending) of X^T X for one random N x P design,
/// N = round(alpha P), entries iid gaussian with variance 1/P. Dense
/// eigendecomposition; P above 2000 is rejected.
Eigen::ArrayXd empirical_spectrum(double alpha, int P, std::uint64_t seed);

}  // namespace hidim
