#include "hidim/classical.hpp"

#include <cmath>

#include "hidim/convolved.hpp"
#include "hidim/errors.hpp"
#include "hidim/quadrature.hpp"

namespace hidim {

namespace {

std::vector<double> noise_kinks(const ScalarDistribution& d) {
    if (d.family() == Family::Laplacian) return {0.0};
    return {};
}

// Integrate g(piece, x) * density(x) over the support, one spline piece at a
// time: within a piece the loss data are a single quadratic, so with panels
// sized to the density's feature scale the quadrature is effectively exact.
double integrate_over_pieces(
    const TabulatedConvexFunction& rho, const ScalarDistribution& noise,
    const std::function<double(const TabulatedConvexFunction::Piece&, double)>& g) {
    const double r = noise.support_radius(80.0);
    const auto kinks = noise_kinks(noise);
    const QuadRule cell = gauss_legendre(6);
    double acc = 0;
    for (const auto& p : rho.pieces()) {
        std::vector<double> bounds{std::max(p.lo, -r), std::min(p.hi, r)};
        if (!(bounds[0] < bounds[1])) continue;
        for (double k : kinks)
            if (k > bounds.front() && k < bounds.back()) bounds.insert(bounds.end() - 1, k);
        for (std::size_t s = 0; s + 1 < bounds.size(); ++s) {
            const double seg = bounds[s + 1] - bounds[s];
            const int panels = std::min(
                2000, std::max(1, static_cast<int>(
                                      std::ceil(seg / (0.25 * noise.smoothness_scale())))));
            const double h = seg / panels;
            for (int q = 0; q < panels; ++q) {
                const double mid = bounds[s] + (q + 0.5) * h;
                for (Eigen::Index k = 0; k < cell.size(); ++k) {
                    const double x = mid + 0.5 * h * cell.x[k];
                    acc += 0.5 * h * cell.w[k] * noise.density(x) * g(p, x);
                }
            }
        }
    }
    return acc;
}

}  // namespace

double mean_curvature(const TabulatedConvexFunction& rho, const ScalarDistribution& noise) {
    switch (rho.tag()) {
        case FunctionTag::Zero: return 0.0;
        case FunctionTag::Quadratic: return rho.coefficient();
        case FunctionTag::AbsoluteValue:
            // rho'' = 2 w delta(x)
            return 2.0 * rho.coefficient() * noise.density(0.0);
        case FunctionTag::Tabulated: break;
    }
    const double r = noise.support_radius(80.0);
    // absolutely continuous part: piecewise-constant curvature against p
    double acc = integrate_over_pieces(
        rho, noise,
        [](const TabulatedConvexFunction::Piece& p, double) { return p.c; });
    // singular part: slope jumps at piece boundaries
    const auto& pieces = rho.pieces();
    for (std::size_t i = 0; i + 1 < pieces.size(); ++i) {
        const auto& a = pieces[i];
        const auto& b = pieces[i + 1];
        const double jump = b.g - (a.g + a.c * (a.hi - a.x0));
        if (jump > 1e-12 && std::abs(b.lo) < r) acc += jump * noise.density(b.lo);
    }
    return acc;
}

double asymptotic_error_unbiased(const TabulatedConvexFunction& rho,
                                 const ScalarInferenceSetting& s) {
    double grad2 = 0;
    switch (rho.tag()) {
        case FunctionTag::Zero: break;
        case FunctionTag::Quadratic:
            grad2 = rho.coefficient() * rho.coefficient() * s.noise.variance();
            break;
        case FunctionTag::AbsoluteValue:
            grad2 = rho.coefficient() * rho.coefficient();
            break;
        case FunctionTag::Tabulated:
            grad2 = integrate_over_pieces(
                rho, s.noise, [](const TabulatedConvexFunction::Piece& p, double x) {
                    const double g = p.g + p.c * (x - p.x0);
                    return g * g;
                });
            break;
    }
    const double curv = mean_curvature(rho, s.noise);
    if (std::abs(curv) < 1e-12)
        throw NumericalError("asymptotic_error_unbiased: degenerate loss, <rho''> vanishes");
    return grad2 / (curv * curv) / s.n_measurements;
}

CramerRaoBound cramer_rao_bound(const ScalarInferenceSetting& s) {
    const double j = s.noise.fisher_information();
    if (!(j < 1e12)) return {0.0, true};
    return {1.0 / (s.n_measurements * j), false};
}

BayesAsymptotics bayes_asymptotics(const ScalarInferenceSetting& s) {
    if (!s.signal) throw DomainError("bayes_asymptotics: signal prior required");
    const double j = s.noise.fisher_information();
    if (!(j > 0) || !(j < 1e12))
        throw NumericalError("bayes_asymptotics: noise Fisher information not finite/positive");
    const double q_d = 1.0 / (s.n_measurements * j);
    return {q_d, mmse(*s.signal, q_d)};
}

double bayes_lower_bound(const ScalarInferenceSetting& s) {
    if (!s.signal) throw DomainError("bayes_lower_bound: signal prior required");
    return 1.0 / (s.n_measurements * s.noise.fisher_information() +
                  s.signal->fisher_information());
}

}  // namespace hidim
