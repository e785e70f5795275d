#pragma once

#include <Eigen/Core>
#include <functional>
#include <vector>

#include "hidim/distribution.hpp"

namespace hidim {

/// Quadrature resolution knobs for ConvolvedDensity.
///
/// The default grid spans 13 standard deviations: it has to cover at least
/// +-10 sqrt(var + q), and the extra width keeps the tail mass of
/// exponential-tailed bases below the 1e-8 normalization tolerance.
struct ConvOptions {
    int panels = 128;            // tabulation panels over the support
    int nodes = 8;               // Gauss-Legendre points per panel
    double support_sigmas = 13;  // grid half-width in units of sqrt(var + q)
};

/// The law of t + sqrt(q) z with t drawn from a base distribution and z a
/// standard normal. Log-density, score and score derivative are tabulated on
/// a composite Gauss-Legendre grid over +-support_sigmas * sqrt(var + q), so
/// expectations against the density are weighted sums over the grid.
///
/// The Gaussian base uses closed forms; other bases are convolved by panel
/// quadrature of p(t) gauss(x - t; q) in log space, with panels adapted to
/// the smaller of sqrt(q) and the base feature scale and split at base kinks.
class ConvolvedDensity {
  public:
    ConvolvedDensity(ScalarDistribution base, double q, ConvOptions opt = {});

    const ScalarDistribution& base() const { return base_; }
    double q() const { return q_; }
    double half_width() const { return half_width_; }
    double variance() const { return base_.variance() + q_; }

    const Eigen::ArrayXd& grid() const { return x_; }
    const Eigen::ArrayXd& weights() const { return w_; }
    const Eigen::ArrayXd& log_density() const { return logp_; }
    const Eigen::ArrayXd& score() const { return score_; }
    const Eigen::ArrayXd& score_derivative() const { return score_deriv_; }

    /// Pointwise evaluation at arbitrary x (direct quadrature, not interpolation).
    double log_density_at(double x) const;
    double density_at(double x) const;
    double score_at(double x) const;
    double score_derivative_at(double x) const;

    /// All three pointwise quantities from a single quadrature pass.
    struct PointStats {
        double log_density;
        double score;
        double score_derivative;
    };
    PointStats stats_at(double x) const;

    /// Tweedie posterior mean <t | t + sqrt(q) z = x> = x + q score(x).
    /// Points beyond the grid use quadratic log-density extrapolation and are
    /// flagged in the _ex variant.
    double posterior_mean(double x) const;
    struct PosteriorMean {
        double value;
        bool outside_grid;
    };
    PosteriorMean posterior_mean_ex(double x) const;

    /// J = integral of score^2 * density (cached).
    double fisher_information() const;

    /// Quadrature normalization integral (diagnostic; ~1 by construction).
    double total_mass() const;

    /// E[g(X)] against the tabulated density.
    double expectation(const std::function<double(double)>& g) const;

    /// Same, with the panels containing the given breakpoints re-integrated
    /// on split sub-panels so kinked/discontinuous integrands keep full
    /// quadrature accuracy.
    double expectation(const std::function<double(double)>& g,
                       const std::vector<double>& breaks) const;

    /// Breakpoint-aware expectation where g also receives the grid index of
    /// the node (so integrands can read the tabulated score arrays), or -1
    /// for the off-grid nodes introduced by panel splitting.
    double expectation_indexed(const std::function<double(double, Eigen::Index)>& g,
                               const std::vector<double>& breaks) const;

    /// E[ Var(t | X) ]: the minimum mean squared error by direct double
    /// quadrature (outer grid, inner tilted moments).
    double mmse_via_conditional_variance() const;

    /// q (1 - q J): the same quantity through the Fisher identity.
    double mmse_via_fisher() const;

  private:
    struct Tilted {
        double logp;
        double mean_shift;  // E[t | x] - x
        double var;         // Var(t | x)
    };
    Tilted tilted_moments(double x) const;

    ScalarDistribution base_;
    double q_;
    ConvOptions opt_;
    double half_width_;
    bool gaussian_closed_ = false;
    Eigen::ArrayXd x_, w_, logp_, score_, score_deriv_, tilted_var_;
    std::vector<double> panel_edges_;
    double fisher_ = 0;
    double mass_ = 0;
};

/// Module operation spellings.
ConvolvedDensity convolve_with_gaussian(const ScalarDistribution& d, double q,
                                        ConvOptions opt = {});
inline double fisher_information(const ConvolvedDensity& c) { return c.fisher_information(); }
inline double posterior_mean(const ConvolvedDensity& c, double x) { return c.posterior_mean(x); }

/// q_s^MMSE(q): the scalar minimum mean squared error of estimating t from
/// t + sqrt(q) z. Computed by double quadrature and by the Fisher identity
/// q (1 - q J); the two must agree within 1e-6 or NumericalError is thrown.
double mmse(const ScalarDistribution& d, double q, ConvOptions opt = {});

}  // namespace hidim
