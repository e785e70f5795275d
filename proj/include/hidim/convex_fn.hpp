#pragma once

#include <Eigen/Core>
#include <json.hpp>
#include <utility>
#include <vector>

namespace hidim {

/// Closed-form families recognized by the prox/Moreau fast paths.
enum class FunctionTag { Tabulated, Quadratic, AbsoluteValue, Zero };

/// A scalar convex function with proximal-map and Moreau-envelope oracles.
///
/// Tagged instances (Quadratic: c/2 x^2, AbsoluteValue: w |x|, Zero) use
/// closed forms throughout. Tabulated instances interpolate sampled values
/// with a shape-preserving piecewise-quadratic spline: the derivative is
/// piecewise linear and globally nondecreasing, knot values are reproduced
/// exactly, and kinks in the data survive as genuine subgradient jumps.
/// Beyond the grid the function continues as a quadratic matching value and
/// slope at the boundary knot.
class TabulatedConvexFunction {
  public:
    /// One quadratic piece: f(x) = v + g (x - x0) + c/2 (x - x0)^2 on [lo, hi].
    struct Piece {
        double lo, hi, x0, v, g, c;
    };

    static TabulatedConvexFunction quadratic(double curvature);
    static TabulatedConvexFunction absolute_value(double weight);
    static TabulatedConvexFunction zero();

    /// Build from knot samples; knot derivatives are estimated from secants.
    static TabulatedConvexFunction from_samples(const Eigen::ArrayXd& knots,
                                                const Eigen::ArrayXd& values);

    /// Build from knot samples with exact knot derivatives (clamped into the
    /// adjacent secant brackets when they disagree by rounding).
    static TabulatedConvexFunction from_samples(const Eigen::ArrayXd& knots,
                                                const Eigen::ArrayXd& values,
                                                const Eigen::ArrayXd& derivatives);

    double operator()(double x) const;

    /// Right derivative (the a.e. derivative; at kinks the right limit).
    double derivative(double x) const;

    /// Subdifferential [d-, d+] at x; a proper interval only at kinks.
    std::pair<double, double> subgradient(double x) const;

    /// Piecewise-constant second derivative (right limit at breakpoints).
    double second_derivative(double x) const;

    /// argmin_y [ (y-x)^2 / (2 lambda) + f(y) ].
    double prox(double lambda, double x) const;

    /// min_y  [ (y-x)^2 / (2 lambda) + f(y) ].
    double moreau(double lambda, double x) const;

    /// d/dx of the Moreau envelope: (x - prox) / lambda.
    double moreau_grad(double lambda, double x) const;

    /// d/dx of the proximal map, in [0, 1]. Closed form for tagged families,
    /// central difference with step 1e-5 (1 + |x|) otherwise.
    double prox_jacobian(double lambda, double x) const;

    /// Abscissae where x -> prox(lambda, x) or its Jacobian has a kink.
    /// Used to split expectation quadratures. Empty for smooth families.
    std::vector<double> prox_breakpoints(double lambda) const;

    double min_value() const;
    double argmin() const;

    /// Same function plus an additive constant.
    TabulatedConvexFunction shifted(double constant) const;

    FunctionTag tag() const { return tag_; }
    double coefficient() const { return coeff_; }
    const Eigen::ArrayXd& knots() const { return knots_; }
    const Eigen::ArrayXd& values() const { return values_; }
    const std::vector<Piece>& pieces() const { return pieces_; }

    nlohmann::json to_json() const;
    static TabulatedConvexFunction from_json(const nlohmann::json& j);

  private:
    TabulatedConvexFunction() = default;
    void build_pieces(const Eigen::ArrayXd& derivs);
    std::size_t piece_index(double x) const;
    const Piece& piece_at(double x) const;

    FunctionTag tag_ = FunctionTag::Zero;
    double coeff_ = 0.0;           // curvature or weight for tagged families
    Eigen::ArrayXd knots_;
    Eigen::ArrayXd values_;
    std::vector<Piece> pieces_;    // covers (-inf, inf) for Tabulated
};

/// Free-function spellings of the oracles.
inline double prox(const TabulatedConvexFunction& f, double lambda, double x) {
    return f.prox(lambda, x);
}
inline double moreau(const TabulatedConvexFunction& f, double lambda, double x) {
    return f.moreau(lambda, x);
}
inline double moreau_grad(const TabulatedConvexFunction& f, double lambda, double x) {
    return f.moreau_grad(lambda, x);
}
inline double prox_jacobian(const TabulatedConvexFunction& f, double lambda, double x) {
    return f.prox_jacobian(lambda, x);
}

/// The map x -> -min_y [ (y - x)^2 / (2 q) - E(y) ], i.e. the negated Moreau
/// envelope of -E at scale q, tabulated on the knot grid of E.
///
/// E is given by knot samples plus exact knot derivatives and is continued
/// beyond the grid by quadratics (curvature of the boundary interval). The
/// inner objective must be coercive: both tail curvatures of E must stay
/// below 1/(2q), checked before solving. Convexity of the result is verified;
/// violations below 1e-6 (relative to the slope scale) are repaired by
/// isotonic projection, larger ones raise ConvexityError.
TabulatedConvexFunction negate_and_envelope(const Eigen::ArrayXd& knots,
                                            const Eigen::ArrayXd& values,
                                            const Eigen::ArrayXd& derivatives, double q);

/// Same construction tabulated on a caller-chosen output grid. The energy
/// table must extend far enough that every output knot's inner maximizer is
/// interior; output knots whose maximizers would leave the table are the
/// caller's responsibility to avoid.
TabulatedConvexFunction negate_and_envelope(const Eigen::ArrayXd& knots,
                                            const Eigen::ArrayXd& values,
                                            const Eigen::ArrayXd& derivatives, double q,
                                            const Eigen::ArrayXd& out_knots);

TabulatedConvexFunction negate_and_envelope(const TabulatedConvexFunction& energy, double q);

}  // namespace hidim
