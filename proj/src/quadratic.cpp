#include "hidim/quadratic.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "hidim/errors.hpp"
#include "hidim/quadrature.hpp"
#include "hidim/rng.hpp"

namespace hidim {

namespace {
void check_setting(const QuadSetting& s) {
    if (!(s.alpha > 0) || !(s.snr > 0))
        throw DomainError("QuadSetting: alpha and snr must be positive");
}
}  // namespace

RidgeFixedPoint ridge_rs_fixed_point(const QuadSetting& s) {
    check_setting(s);
    // qbar^2 + (phi + alpha - 1) qbar - phi = 0; take the positive root in the
    // cancellation-free form
    const double phi = s.phi();
    const double b = phi + s.alpha - 1.0;
    const double disc = std::sqrt(b * b + 4.0 * phi);
    const double qbar = 2.0 * phi / (b + disc);
    return {(phi + qbar) / s.alpha, qbar};
}

double ridge_closed_form(const QuadSetting& s) {
    check_setting(s);
    const double phi = s.phi();
    return 0.5 * (1.0 - s.alpha - phi +
                  std::sqrt((phi + s.alpha - 1.0) * (phi + s.alpha - 1.0) + 4.0 * phi));
}

double ridge_high_snr_asymptote(const QuadSetting& s) {
    check_setting(s);
    if (!(s.snr >= 10.0))
        throw DomainError("ridge_high_snr_asymptote: requires snr >= 10");
    if (std::abs(s.alpha - 1.0) < 1e-12) return 1.0 / std::sqrt(s.snr);
    if (s.alpha < 1.0) return 1.0 - s.alpha;
    return 1.0 / (s.snr * (s.alpha - 1.0));
}

MPDensity mp_density(double alpha) {
    if (!(alpha > 0)) throw DomainError("mp_density: alpha must be positive");
    const double sa = std::sqrt(alpha);
    return {alpha, (sa - 1.0) * (sa - 1.0), (sa + 1.0) * (sa + 1.0),
            std::max(0.0, 1.0 - alpha)};
}

double MPDensity::density(double lambda) const {
    if (lambda <= lambda_minus || lambda >= lambda_plus) return 0.0;
    return std::sqrt((lambda_plus - lambda) * (lambda - lambda_minus)) / (2.0 * M_PI * lambda);
}

double ridge_via_mp_integral(const QuadSetting& s) {
    check_setting(s);
    const MPDensity mp = mp_density(s.alpha);
    const double span = mp.lambda_plus - mp.lambda_minus;
    // lambda = lambda_- + span sin^2(theta) removes both inverse-square-root
    // edge singularities exactly
    auto integrand = [&](double theta) {
        const double st = std::sin(theta), ct = std::cos(theta);
        const double lambda = mp.lambda_minus + span * st * st;
        const double delta = 1.0 / (1.0 + lambda * s.snr);
        return (span * span / M_PI) * st * st * ct * ct * delta / lambda;
    };
    double value;
    try {
        value = integrate_refined(integrand, 0.0, 0.5 * M_PI, 1e-9, 256, 8, 6);
    } catch (const NumericalError& e) {
        throw NumericalError(std::string("ridge_via_mp_integral: ") + e.what());
    }
    if (mp.atom_weight > 0) value += mp.atom_weight;  // Delta(0) = 1
    return value;
}

Eigen::ArrayXd empirical_spectrum(double alpha, int P, std::uint64_t seed) {
    if (P < 2) throw DomainError("empirical_spectrum: P must be >= 2");
    if (P > 2000) throw DomainError("empirical_spectrum: P above 2000 rejected (dense solver)");
    const int N = std::max(1, static_cast<int>(std::lround(alpha * P)));
    Rng rng(seed);
    Eigen::MatrixXd X(N, P);
    const double sd = 1.0 / std::sqrt(static_cast<double>(P));
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < P; ++j) X(i, j) = sd * rng.normal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(X.transpose() * X);
    if (es.info() != Eigen::Success)
        throw NumericalError("empirical_spectrum: eigendecomposition failed");
    return es.eigenvalues().array();
}

}  // namespace hidim
