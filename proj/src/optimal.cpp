#include "hidim/optimal.hpp"

#include <algorithm>
#include <cmath>

#include "hidim/errors.hpp"

namespace hidim {

TabulatedConvexFunction convolved_energy_function(const ConvolvedDensity& conv) {
    if (conv.base().family() == Family::Gaussian)
        return TabulatedConvexFunction::quadratic(1.0 / conv.variance());
    return TabulatedConvexFunction::from_samples(conv.grid(), (-conv.log_density()).eval(),
                                                 (-conv.score()).eval());
}

namespace {

// rho/sigma builder shared by the optimal constructions: the negated envelope
// of the negated energy of the q-convolved distribution, at the same scale q.
//
// For this matched-q case the envelope admits an exact characterization: the
// inner maximizer at x is the inverse image of x under the posterior-mean map
// m(y) = y + q score(y), which is strictly increasing. Solving m(y) = x by
// safeguarded bisection and evaluating the convolved energy at the root gives
// machine-accurate values and derivatives (the generic piece-scan construction
// loses the envelope near the critical density, where the shrinkage makes the
// inner objective almost flat and amplifies interpolation error).
TabulatedConvexFunction smoothed_energy(const ScalarDistribution& d, double q,
                                        ConvOptions conv) {
    if (d.family() == Family::Gaussian) {
        // closed form: quadratic with curvature 1/variance, independent of q
        return TabulatedConvexFunction::quadratic(1.0 / d.variance());
    }
    const ConvolvedDensity c(d, q, conv);
    const double half = 10.0 * std::sqrt(d.variance() + q);

    // knot grid: 4001 uniform plus refinement patches at base kinks when the
    // smoothing scale sqrt(q) is finer than the uniform spacing
    const int n_core = 4001;
    const double spacing = 2.0 * half / (n_core - 1);
    std::vector<double> grid;
    grid.reserve(n_core + 802);
    for (int i = 0; i < n_core; ++i) grid.push_back(-half + i * spacing);
    const double sq = std::sqrt(q);
    if (d.family() == Family::Laplacian && sq < 4.0 * spacing) {
        for (int i = 0; i <= 800; ++i) {
            const double x = -8.0 * sq + i * (16.0 * sq / 800.0);
            if (std::abs(x) < half) grid.push_back(x);
        }
        std::sort(grid.begin(), grid.end());
        grid.erase(std::unique(grid.begin(), grid.end(),
                               [&](double a, double b) { return b - a < 1e-9 * spacing; }),
                   grid.end());
    }

    const Eigen::Index n = static_cast<Eigen::Index>(grid.size());
    Eigen::ArrayXd knots = Eigen::Map<const Eigen::ArrayXd>(grid.data(), n);
    Eigen::ArrayXd values(n), derivs(n);
    // invert the posterior-mean map m(y) = y + q score(y) at each knot by
    // safeguarded Newton (m' = Var(t|y)/q is available from the same
    // quadrature pass); direct evaluation, the tabulated accessors would
    // extrapolate beyond the grid
    double y_prev = knots[0] - q * d.max_energy_slope() - 14.0 * std::sqrt(q);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double x = knots[i];
        double lo = y_prev;  // m monotone, knots ascending
        double hi = x + q * d.max_energy_slope() + 1.0;
        double y = std::min(std::max(x, lo), hi);
        ConvolvedDensity::PointStats st{};
        for (int it = 0; it < 80; ++it) {
            st = c.stats_at(y);
            const double m = y + q * st.score;
            const double mp = std::max(1.0 + q * st.score_derivative, 1e-12);
            if (m < x)
                lo = std::max(lo, y);
            else
                hi = std::min(hi, y);
            const double step = (x - m) / mp;
            if (std::abs(step) < 1e-13 * (1.0 + std::abs(y))) break;
            y += step;
            if (y <= lo || y >= hi) y = 0.5 * (lo + hi);  // bisection fallback
        }
        y_prev = std::min(y, lo);
        values[i] = -st.log_density - 0.5 * (y - x) * (y - x) / q;
        derivs[i] = (y - x) / q;
    }
    return TabulatedConvexFunction::from_samples(knots, values, derivs);
}

TabulatedConvexFunction normalized_at_min(const TabulatedConvexFunction& f) {
    if (f.tag() != FunctionTag::Tabulated) return f;
    return f.shifted(-f.min_value());
}

TabulatedConvexFunction normalized_at_zero(const TabulatedConvexFunction& f) {
    if (f.tag() != FunctionTag::Tabulated) return f;
    return f.shifted(-f(0.0));
}

}  // namespace

UnregularizedOptimal solve_qopt_unregularized(const ScalarDistribution& noise, double alpha,
                                              ConvOptions conv) {
    if (!(alpha > 1.0))
        throw DomainError("solve_qopt_unregularized: requires alpha > 1");
    const double j0 = noise.fisher_information();
    const double bound = 1.0 / ((alpha - 1.0) * j0);
    const double cap = 1e3 * noise.variance();

    auto g = [&](double q) {
        const ConvolvedDensity c(noise, q, conv);
        return q - 1.0 / (alpha * c.fisher_information());
    };
    // ascending search from the bound (where g <= 0 by the convolutional
    // Fisher inequality) to the first sign change
    double lo = bound;
    double hi = bound;
    double glo = g(lo);
    if (glo > 0.0) return {lo, bound};  // bound saturated (gaussian noise)
    bool found = false;
    while (hi < cap) {
        hi *= 1.5;
        if (g(hi) > 0.0) {
            found = true;
            break;
        }
        lo = hi;
    }
    if (!found)
        throw NumericalError("solve_qopt_unregularized: no sign change below 1e3 <eps^2>");
    for (int it = 0; it < 100 && (hi - lo) > 1e-12 * (1.0 + hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        if (g(mid) > 0.0)
            hi = mid;
        else
            lo = mid;
    }
    return {0.5 * (lo + hi), bound};
}

TabulatedConvexFunction build_rho_opt_unregularized(const ScalarDistribution& noise,
                                                    double q_opt_value, ConvOptions conv,
                                                    bool /*precomputed*/) {
    return normalized_at_zero(smoothed_energy(noise, q_opt_value, conv));
}

TabulatedConvexFunction build_rho_opt_unregularized(const ScalarDistribution& noise,
                                                    double alpha, ConvOptions conv) {
    const UnregularizedOptimal q = solve_qopt_unregularized(noise, alpha, conv);
    return build_rho_opt_unregularized(noise, q.q_opt, conv, true);
}

RegularizedOptimal solve_qopt_regularized(const ScalarDistribution& noise,
                                          const ScalarDistribution& signal, double alpha,
                                          ConvOptions conv) {
    if (!(alpha > 0)) throw DomainError("solve_qopt_regularized: alpha must be positive");
    double q_s = signal.variance();
    double q_d = 0;
    std::vector<double> trace;
    int iters = 0;
    bool settled = false;
    auto sweep = [&](double theta) {
        const ConvolvedDensity ce(noise, q_s, conv);
        const double q_d_new = 1.0 / (alpha * ce.fisher_information());
        const double q_s_new = mmse(signal, q_d_new, conv);
        const double change =
            std::max(std::abs(q_s_new - q_s) / (1.0 + std::abs(q_s)),
                     std::abs(q_d_new - q_d) / (1.0 + std::abs(q_d)));
        q_s += theta * (q_s_new - q_s);
        q_d = (q_d == 0) ? q_d_new : q_d + theta * (q_d_new - q_d);
        trace.push_back(q_s);
        return change;
    };
    for (; iters < 500; ++iters) {
        if (sweep(0.5) < 1e-8) {
            settled = true;
            ++iters;
            break;
        }
    }
    if (!settled)
        throw ConvergenceError("solve_qopt_regularized: no convergence after 500 iterations",
                               trace);
    for (int k = 0; k < 5; ++k) sweep(1.0);
    return {q_s, q_d, iters};
}

std::pair<TabulatedConvexFunction, TabulatedConvexFunction> build_optimal_pair(
    const ScalarDistribution& noise, const ScalarDistribution& signal, double q_s_opt,
    double q_d_opt, ConvOptions conv) {
    return {normalized_at_min(smoothed_energy(noise, q_s_opt, conv)),
            normalized_at_min(smoothed_energy(signal, q_d_opt, conv))};
}

std::pair<TabulatedConvexFunction, TabulatedConvexFunction> build_optimal_pair(
    const ScalarDistribution& noise, const ScalarDistribution& signal, double alpha,
    ConvOptions conv) {
    const RegularizedOptimal q = solve_qopt_regularized(noise, signal, alpha, conv);
    return build_optimal_pair(noise, signal, q.q_s_opt, q.q_d_opt, conv);
}

double high_dim_lower_bound(const ScalarDistribution& noise, const ScalarDistribution& signal,
                            double alpha, double q_s, ConvOptions conv) {
    const ConvolvedDensity ce(noise, q_s, conv);
    return 1.0 / (alpha * ce.fisher_information() + signal.fisher_information());
}

OptimalTrainGen optimal_train_gen(const ScalarDistribution& noise, double q_s_opt,
                                  ConvOptions conv) {
    const double e0 = noise.variance();
    const double q_eps = mmse(noise, q_s_opt, conv);
    return {q_eps, e0 - q_eps, e0 + q_s_opt};
}

OptimalTrainGen optimal_train_gen(const ScalarDistribution& noise,
                                  const ScalarDistribution& signal, double alpha,
                                  ConvOptions conv) {
    const RegularizedOptimal q = solve_qopt_regularized(noise, signal, alpha, conv);
    return optimal_train_gen(noise, q.q_s_opt, conv);
}

NoiselessOptimal noiseless_qopt(const ScalarDistribution& signal, double alpha,
                                ConvOptions conv) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw DomainError("noiseless_qopt: requires 0 < alpha < 1");
    double q_s = (1.0 - alpha) * signal.variance();
    std::vector<double> trace;
    int iters = 0;
    bool settled = false;
    auto step = [&](double q) {
        const double q_d = q / alpha;
        const ConvolvedDensity cs(signal, q_d, conv);
        return (q_d) * (1.0 - q_d * cs.fisher_information());
    };
    for (; iters < 500; ++iters) {
        const double q_new = step(q_s);
        if (q_new < 1e-12) return {0.0, 0.0, true, iters};
        const double change = std::abs(q_new - q_s) / (1.0 + std::abs(q_s));
        q_s += 0.5 * (q_new - q_s);
        trace.push_back(q_s);
        if (change < 1e-8) {
            settled = true;
            ++iters;
            break;
        }
    }
    if (!settled)
        throw ConvergenceError("noiseless_qopt: no convergence after 500 iterations", trace);
    for (int k = 0; k < 5; ++k) q_s = step(q_s);
    return {q_s, q_s / alpha, false, iters};
}

NoiselessBound noiseless_bound(const ScalarDistribution& signal, double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0))
        throw DomainError("noiseless_bound: requires 0 < alpha <= 1");
    const double j = signal.fisher_information();
    if (!(j < 1e12)) return {0.0, true};
    return {(1.0 - alpha) / j, false};
}

nlohmann::json OptimalSolution::to_json() const {
    nlohmann::json j;
    j["alpha"] = alpha;
    j["q_s_opt"] = q_s_opt;
    j["q_d_opt"] = q_d_opt;
    j["q_eps_opt"] = q_eps_opt;
    j["e_train"] = e_train;
    j["e_gen"] = e_gen;
    nlohmann::json bounds;
    bounds["unregularized_cr"] =
        bound_unregularized ? nlohmann::json(*bound_unregularized) : nlohmann::json();
    bounds["regularized_cr"] =
        bound_regularized ? nlohmann::json(*bound_regularized) : nlohmann::json();
    bounds["noiseless"] = bound_noiseless ? nlohmann::json(*bound_noiseless) : nlohmann::json();
    j["bounds"] = std::move(bounds);
    if (noiseless_hard_constraint)
        j["rho_opt"] = {{"tag", "affine_constraint"}};
    else if (rho_opt)
        j["rho_opt"] = rho_opt->to_json();
    if (sigma_opt) j["sigma_opt"] = sigma_opt->to_json();
    return j;
}

OptimalSolution solve_optimal_design(const ScalarDistribution& noise,
                                     const ScalarDistribution& signal, double alpha,
                                     ConvOptions conv) {
    OptimalSolution out;
    out.alpha = alpha;
    const RegularizedOptimal q = solve_qopt_regularized(noise, signal, alpha, conv);
    out.q_s_opt = q.q_s_opt;
    out.q_d_opt = q.q_d_opt;
    const OptimalTrainGen tg = optimal_train_gen(noise, q.q_s_opt, conv);
    out.q_eps_opt = tg.q_eps_opt;
    out.e_train = tg.e_train;
    out.e_gen = tg.e_gen;
    auto pair = build_optimal_pair(noise, signal, q.q_s_opt, q.q_d_opt, conv);
    out.rho_opt = std::move(pair.first);
    out.sigma_opt = std::move(pair.second);
    if (alpha > 1.0)
        out.bound_unregularized = 1.0 / ((alpha - 1.0) * noise.fisher_information());
    out.bound_regularized = high_dim_lower_bound(noise, signal, alpha, q.q_s_opt, conv);
    if (alpha < 1.0) out.bound_noiseless = noiseless_bound(signal, alpha).value;
    return out;
}

OptimalSolution solve_optimal_design_noiseless(const ScalarDistribution& signal, double alpha,
                                               ConvOptions conv) {
    OptimalSolution out;
    out.alpha = alpha;
    const NoiselessOptimal q = noiseless_qopt(signal, alpha, conv);
    out.q_s_opt = q.q_s_opt;
    out.q_d_opt = q.q_d_opt;
    out.noiseless_hard_constraint = true;
    out.q_eps_opt = 0;
    out.e_train = 0;
    out.e_gen = q.q_s_opt;
    if (!q.perfect_recovery && q.q_d_opt > 0)
        out.sigma_opt = normalized_at_min(smoothed_energy(signal, q.q_d_opt, conv));
    out.bound_noiseless = noiseless_bound(signal, alpha).value;
    return out;
}

}  // namespace hidim
