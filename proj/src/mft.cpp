#include "hidim/mft.hpp"

#include <algorithm>
#include <cmath>

#include "hidim/errors.hpp"
#include "hidim/rng.hpp"

namespace hidim {

namespace {

// Mean prox Jacobian under the convolved density, by parts:
// <prox'(x)> = -<prox(x) score(x)>. Needs only prox values and the exact
// tabulated score, so it avoids the O(h) staircase of differentiating a
// piecewise-quadratic interpolant.
double mean_prox_jacobian(const ConvolvedDensity& conv, const TabulatedConvexFunction& f,
                          double lam) {
    const Eigen::ArrayXd& score = conv.score();
    return -conv.expectation_indexed(
        [&](double x, Eigen::Index i) {
            const double sc = (i >= 0) ? score[i] : conv.score_at(x);
            return f.prox(lam, x) * sc;
        },
        f.prox_breakpoints(lam));
}

struct LossStats {
    double m2;    // <(x - prox)^2> = lambda^2 <M'^2>
    double jbar;  // <prox'>; (1 - jbar)/lambda = <M''>
};

LossStats loss_stats(const ConvolvedDensity& conv, const TabulatedConvexFunction& rho,
                     double lam) {
    const auto breaks = rho.prox_breakpoints(lam);
    LossStats out;
    out.m2 = conv.expectation(
        [&](double x) {
            const double p = rho.prox(lam, x);
            return (x - p) * (x - p);
        },
        breaks);
    out.jbar = mean_prox_jacobian(conv, rho, lam);
    return out;
}

struct SignalStats {
    double q_s;  // <(prox(x) - s0)^2>
    double r;    // <prox'>
};

SignalStats signal_stats(const ConvolvedDensity& conv, const TabulatedConvexFunction& sigma,
                         double lam) {
    const auto breaks = sigma.prox_breakpoints(lam);
    const double q = conv.q();
    const Eigen::ArrayXd& score = conv.score();
    // <(shat - s0)^2> = <shat^2> - 2 <shat <s0|x>> + <s0^2>, with the posterior
    // mean <s0|x> = x + q score(x) available on the grid
    const double cross = conv.expectation_indexed(
        [&](double x, Eigen::Index i) {
            const double sh = sigma.prox(lam, x);
            const double pm = (i >= 0) ? x + q * score[i] : conv.posterior_mean(x);
            return sh * (sh - 2.0 * pm);
        },
        breaks);
    SignalStats out;
    out.q_s = cross + conv.base().variance();
    out.r = mean_prox_jacobian(conv, sigma, lam);
    return out;
}

// Solve <prox_jacobian of rho at conv> = target by bisection on log lambda.
double solve_lambda_rho(const ConvolvedDensity& conv, const TabulatedConvexFunction& rho,
                        double target) {
    double la = std::log(1e-6), lb = std::log(1e6);
    auto phi = [&](double l) { return mean_prox_jacobian(conv, rho, std::exp(l)) - target; };
    double fa = phi(la), fb = phi(lb);
    if (fa < 0) return std::exp(la);  // jacobian everywhere below target: smallest scale
    if (fb > 0) return std::exp(lb);
    for (int it = 0; it < 100 && lb - la > 1e-13; ++it) {
        const double lm = 0.5 * (la + lb);
        const double fm = phi(lm);
        if (fm >= 0)
            la = lm, fa = fm;
        else
            lb = lm, fb = fm;
    }
    return std::exp(0.5 * (la + lb));
}

double rel_change(double a, double b) { return std::abs(a - b) / (1.0 + std::abs(b)); }

}  // namespace

OrderParameters solve_unregularized(const MFTProblem& pr, const RsOptions& opt) {
    if (!(pr.alpha > 1.0))
        throw DomainError(
            "solve_unregularized: no unregularized solution at or below critical density "
            "(alpha must exceed 1)");
    const double e0 = pr.noise.variance();
    const double target = 1.0 - 1.0 / pr.alpha;

    double q_s = e0 / (pr.alpha - 1.0);
    double lam = 1.0 / (pr.alpha - 1.0);
    std::vector<double> trace;
    bool settled = false;
    int sweeps = 0;
    auto sweep = [&](double theta) {
        const ConvolvedDensity conv(pr.noise, q_s, opt.conv);
        const double lam_new = solve_lambda_rho(conv, pr.loss, target);
        const LossStats st = loss_stats(conv, pr.loss, lam_new);
        const double q_new = st.m2 / (pr.alpha * (1.0 - st.jbar) * (1.0 - st.jbar));
        const double change = std::max(rel_change(q_new, q_s), rel_change(lam_new, lam));
        q_s += theta * (q_new - q_s);
        lam += theta * (lam_new - lam);
        q_s = std::max(q_s, 1e-14 * (1.0 + e0));
        trace.push_back(q_s);
        return change;
    };
    for (; sweeps < opt.max_sweeps; ++sweeps) {
        if (sweep(opt.damping) < opt.tol) {
            settled = true;
            ++sweeps;
            break;
        }
    }
    if (!settled)
        throw ConvergenceError("solve_unregularized: no convergence after " +
                                   std::to_string(opt.max_sweeps) + " sweeps",
                               trace);
    for (int k = 0; k < opt.polish_sweeps; ++k) sweep(1.0);

    OrderParameters out;
    out.q_s = q_s;
    out.q_d = q_s;
    out.lambda_rho = lam;
    out.lambda_sigma = lam;
    out.iterations = sweeps;
    MFTProblem full = pr;
    full.regularizer = TabulatedConvexFunction::zero();
    out.residual = rs_residual(full, out, 1, opt.conv);
    out.converged = out.residual < 1e-8;
    return out;
}

OrderParameters solve_rs_equations(const MFTProblem& pr, const RsOptions& opt) {
    if (!(pr.alpha > 0)) throw DomainError("solve_rs_equations: alpha must be positive");
    if (pr.regularizer.tag() == FunctionTag::Zero) return solve_unregularized(pr, opt);

    const double e0 = pr.noise.variance();
    const double s2 = pr.signal.variance();

    // initialization mirrors the quadratic-theory fixed point structure
    double q_s = s2;
    double q_d = (e0 + s2) / pr.alpha;
    double lambda_rho = 1.0;
    double r = 0.5;
    double lambda_sigma = lambda_rho / r;

    std::vector<double> trace;
    bool settled = false;
    int sweeps = 0;
    double prev_delta = 0;
    int flips = 0;
    auto sweep = [&](double theta) {
        const ConvolvedDensity conv_s(pr.signal, q_d, opt.conv);
        const SignalStats ss = signal_stats(conv_s, pr.regularizer, lambda_sigma);
        const double q_s_new = std::max(ss.q_s, 1e-14 * (1.0 + s2));
        const double r_new = std::min(std::max(ss.r, 1e-12), 1.0 - 1e-12);

        const ConvolvedDensity conv_e(pr.noise, q_s_new, opt.conv);
        const double target = std::max(1.0 - r_new / pr.alpha, 1e-12);
        const double lambda_rho_new = solve_lambda_rho(conv_e, pr.loss, target);
        const LossStats ls = loss_stats(conv_e, pr.loss, lambda_rho_new);
        const double q_d_new =
            ls.m2 / (pr.alpha * (1.0 - ls.jbar) * (1.0 - ls.jbar));
        const double lambda_sigma_new = lambda_rho_new / r_new;

        double change = rel_change(q_s_new, q_s);
        change = std::max(change, rel_change(q_d_new, q_d));
        change = std::max(change, rel_change(lambda_rho_new, lambda_rho));
        change = std::max(change, rel_change(lambda_sigma_new, lambda_sigma));

        const double delta = q_s_new - q_s;
        if (delta * prev_delta < 0) ++flips;
        else flips = 0;
        prev_delta = delta;

        q_s += theta * (q_s_new - q_s);
        q_d += theta * (q_d_new - q_d);
        // lambdas are scales; relax them multiplicatively so that clamped
        // bisection excursions cannot kick the iterate by orders of magnitude
        lambda_rho = std::exp((1.0 - theta) * std::log(lambda_rho) +
                              theta * std::log(lambda_rho_new));
        lambda_sigma = std::exp((1.0 - theta) * std::log(lambda_sigma) +
                                theta * std::log(lambda_sigma_new));
        q_d = std::max(q_d, 1e-14 * (1.0 + e0));
        trace.push_back(q_s);
        return change;
    };
    double theta = opt.damping;
    for (; sweeps < opt.max_sweeps; ++sweeps) {
        if (sweep(theta) < opt.tol) {
            settled = true;
            ++sweeps;
            break;
        }
        if (flips >= 4) {  // period-2 cycle: back off the relaxation
            theta = std::max(0.5 * theta, 0.05);
            flips = 0;
        }
    }
    if (!settled)
        throw ConvergenceError("solve_rs_equations: no convergence after " +
                                   std::to_string(opt.max_sweeps) + " sweeps",
                               trace);
    for (int k = 0; k < opt.polish_sweeps; ++k) sweep(1.0);

    OrderParameters out;
    out.q_s = q_s;
    out.q_d = q_d;
    out.lambda_rho = lambda_rho;
    out.lambda_sigma = lambda_sigma;
    out.iterations = sweeps;
    out.residual = rs_residual(pr, out, 1, opt.conv);
    out.converged = out.residual < 1e-8;
    return out;
}

double rs_residual(const MFTProblem& pr, const OrderParameters& p, int refine, ConvOptions conv) {
    conv.panels *= refine;
    const bool unreg = pr.regularizer.tag() == FunctionTag::Zero;
    const double r = p.lambda_rho / p.lambda_sigma;

    const ConvolvedDensity conv_e(pr.noise, p.q_s, conv);
    const LossStats ls = loss_stats(conv_e, pr.loss, p.lambda_rho);
    const double q_d_rhs = ls.m2 / (pr.alpha * (1.0 - ls.jbar) * (1.0 - ls.jbar));
    const double r1 = std::abs(p.q_d - q_d_rhs) / (1.0 + std::abs(p.q_d));
    const double r3 = std::abs((1.0 - r / pr.alpha) - ls.jbar);

    if (unreg) {
        const double r2 = std::abs(p.q_s - q_d_rhs) / (1.0 + std::abs(p.q_s));
        return std::max({r1, r2, r3});
    }
    const ConvolvedDensity conv_s(pr.signal, p.q_d, conv);
    const SignalStats ss = signal_stats(conv_s, pr.regularizer, p.lambda_sigma);
    const double r2 = std::abs(p.q_s - ss.q_s) / (1.0 + std::abs(p.q_s));
    const double r4 = std::abs(r - ss.r);
    return std::max({r1, r2, r3, r4});
}

PerformancePrediction predict_performance(const MFTProblem& pr, const OrderParameters& p,
                                          ConvOptions conv) {
    const ConvolvedDensity conv_e(pr.noise, p.q_s, conv);
    const auto breaks = pr.loss.prox_breakpoints(p.lambda_rho);
    const double q = conv_e.q();
    const Eigen::ArrayXd& score = conv_e.score();
    const double e_train = conv_e.expectation(
        [&](double x) {
            const double eh = pr.loss.prox(p.lambda_rho, x);
            return eh * eh;
        },
        breaks);
    const double cross = conv_e.expectation_indexed(
        [&](double x, Eigen::Index i) {
            const double eh = pr.loss.prox(p.lambda_rho, x);
            const double pm = (i >= 0) ? x + q * score[i] : conv_e.posterior_mean(x);
            return eh * pm;
        },
        breaks);
    PerformancePrediction out;
    out.q_s = p.q_s;
    out.e_train = e_train;
    out.q_eps = e_train - 2.0 * cross + pr.noise.variance();
    out.e_gen = p.q_s + pr.noise.variance();
    return out;
}

MfJointSamples mf_joint_samples(const MFTProblem& pr, const OrderParameters& p,
                                std::uint64_t seed, Eigen::Index n) {
    Rng rng(seed);
    MfJointSamples out;
    out.eps.resize(n);
    out.eps_hat.resize(n);
    out.s0.resize(n);
    out.s_hat.resize(n);
    const double sq_s = std::sqrt(p.q_s);
    const double sq_d = std::sqrt(p.q_d);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double eps = pr.noise.sample(rng);
        out.eps[i] = eps;
        out.eps_hat[i] = pr.loss.prox(p.lambda_rho, eps + sq_s * rng.normal());
        const double s0 = pr.signal.sample(rng);
        out.s0[i] = s0;
        out.s_hat[i] = pr.regularizer.prox(p.lambda_sigma, s0 + sq_d * rng.normal());
    }
    return out;
}

}  // namespace hidim
