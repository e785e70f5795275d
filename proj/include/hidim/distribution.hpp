#pragma once

#include <Eigen/Core>
#include <json.hpp>
#include <memory>

#include "hidim/convex_fn.hpp"
#include "hidim/rng.hpp"

namespace hidim {

enum class Family { Gaussian, Laplacian, Custom };

/// A zero-mean scalar prior or noise distribution with analytic Gaussian and
/// Laplacian families plus log-concave custom densities entered as tabulated
/// energies E = -log P (normalization computed at construction).
///
/// Immutable after construction; copies are cheap (custom tables are shared).
class ScalarDistribution {
  public:
    /// scale = standard deviation.
    static ScalarDistribution gaussian(double scale);

    /// scale = b in P(x) proportional to exp(-|x|/b); variance 2 b^2.
    static ScalarDistribution laplacian(double scale);

    /// Energy samples E(x) up to an additive constant; must be convex.
    static ScalarDistribution custom(const Eigen::ArrayXd& knots, const Eigen::ArrayXd& energy);

    double density(double x) const;
    double log_density(double x) const;

    /// -log density including the normalization constant.
    double energy(double x) const;

    /// d/dx log density; the Laplacian kink uses the a.e. value with sign(0)=0.
    double score(double x) const;

    double variance() const;

    /// J = integral of score^2 * density. Analytic for Gaussian; quadrature
    /// with refinement checking (NumericalError on non-convergence) otherwise.
    double fisher_information() const;

    double sample(Rng& rng) const;
    Eigen::ArrayXd sample(std::uint64_t seed, Eigen::Index n) const;

    /// The energy as a prox-capable convex function. Tagged Quadratic(1/s^2)
    /// for Gaussian and AbsoluteValue(1/b) for Laplacian; additive constants
    /// are dropped (argmins are unaffected).
    TabulatedConvexFunction energy_function() const;

    /// |x| beyond which the energy exceeds its minimum by at least `drop`.
    double support_radius(double drop = 80.0) const;

    /// Characteristic width of density features; used to size quadrature
    /// panels in convolutions.
    double smoothness_scale() const;

    /// Bound on |d/dx energy| over the effective support; controls how far a
    /// gaussian tilt can shift the mass of the distribution.
    double max_energy_slope() const;

    /// argmax_t [ log density(t) - (t - x)^2 / (2q) ]: the center of the
    /// distribution tilted by a gaussian likelihood at x (the energy's
    /// proximal point). The tilted integrand is log-concave around it.
    double tilt_center(double q, double x) const;

    /// Distribution of factor * X (same family, rescaled).
    ScalarDistribution rescaled(double factor) const;

    Family family() const { return family_; }
    double scale() const { return scale_; }

    nlohmann::json to_json() const;
    static ScalarDistribution from_json(const nlohmann::json& j);

  private:
    struct CustomData;
    ScalarDistribution(Family f, double s) : family_(f), scale_(s) {}

    Family family_;
    double scale_;
    std::shared_ptr<const CustomData> custom_;
};

/// Free-function spellings matching the module operation names.
inline double density(const ScalarDistribution& d, double x) { return d.density(x); }
inline Eigen::ArrayXd sample(const ScalarDistribution& d, std::uint64_t seed, Eigen::Index n) {
    return d.sample(seed, n);
}
inline double fisher_information(const ScalarDistribution& d) { return d.fisher_information(); }

}  // namespace hidim
