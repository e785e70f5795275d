#pragma once

#include <Eigen/Core>
#include <functional>
#include <vector>

namespace hidim {

/// Quadrature nodes and weights on some interval. Composite rules also carry
/// their panel boundaries (edges.size() == panel count + 1); nodes come in
/// contiguous groups of `nodes` per panel.
struct QuadRule {
    Eigen::ArrayXd x;
    Eigen::ArrayXd w;
    std::vector<double> edges;

    Eigen::Index size() const { return x.size(); }
};

/// n-point Gauss-Legendre rule on [-1, 1]. Nodes ascending.
QuadRule gauss_legendre(int n);

/// Composite Gauss-Legendre rule: `panels` equal panels over [a, b] with
/// `nodes` points per panel. Nodes globally ascending.
QuadRule composite_gauss_legendre(double a, double b, int panels, int nodes = 8);

/// Composite rule whose panel boundaries include every breakpoint in
/// `breaks` that lies strictly inside (a, b). Panel widths are near-uniform
/// between consecutive boundaries.
QuadRule composite_with_breakpoints(double a, double b, int panels,
                                    const std::vector<double>& breaks, int nodes = 8);

/// Integrate f over [a, b] with composite Gauss-Legendre panels, doubling the
/// panel count until the change between refinements drops below
/// rel_tol * max(abs_scale, |integral|). Throws NumericalError if the
/// tolerance is not reached within max_doublings refinements. Pass a positive
/// abs_scale when the integral itself may vanish (odd moments of symmetric
/// densities and the like).
double integrate_refined(const std::function<double(double)>& f, double a, double b,
                         double rel_tol = 1e-8, int initial_panels = 4000, int nodes = 4,
                         int max_doublings = 4,
                         const std::vector<double>& breaks = {}, double abs_scale = 0.0);

}  // namespace hidim
