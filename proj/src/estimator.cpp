#include "hidim/estimator.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "hidim/errors.hpp"
#include "hidim/rng.hpp"

namespace hidim {

ProblemInstance generate_instance(double alpha, double sqrt_NP,
                                  const std::optional<ScalarDistribution>& noise,
                                  const ScalarDistribution& signal, std::uint64_t seed,
                                  int test_rows) {
    if (!(alpha > 0)) throw DomainError("generate_instance: alpha must be positive");
    if (!(sqrt_NP >= 10)) throw DomainError("generate_instance: sqrt_NP must be >= 10");
    const int P = static_cast<int>(std::lround(sqrt_NP / std::sqrt(alpha)));
    const int N = static_cast<int>(std::lround(alpha * P));
    if (P < 2 || N < 2) throw DomainError("generate_instance: resulting N or P below 2");

    Rng rng(seed);
    ProblemInstance inst;
    inst.alpha = alpha;
    inst.seed = seed;
    const double sd = 1.0 / std::sqrt(static_cast<double>(P));
    inst.X.resize(N, P);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < P; ++j) inst.X(i, j) = sd * rng.normal();
    inst.s0.resize(P);
    for (int j = 0; j < P; ++j) inst.s0[j] = signal.sample(rng);
    inst.eps = Eigen::VectorXd::Zero(N);
    if (noise)
        for (int i = 0; i < N; ++i) inst.eps[i] = noise->sample(rng);
    inst.y = inst.X * inst.s0 + inst.eps;

    if (test_rows > 0) {
        inst.X_test.resize(test_rows, P);
        for (int i = 0; i < test_rows; ++i)
            for (int j = 0; j < P; ++j) inst.X_test(i, j) = sd * rng.normal();
        Eigen::VectorXd eps_test = Eigen::VectorXd::Zero(test_rows);
        if (noise)
            for (int i = 0; i < test_rows; ++i) eps_test[i] = noise->sample(rng);
        inst.y_test = inst.X_test * inst.s0 + eps_test;
    }
    return inst;
}

EstimateMetrics evaluate_estimate(const ProblemInstance& inst, const Eigen::VectorXd& s_hat) {
    if (s_hat.size() != inst.s0.size())
        throw DomainError("evaluate_estimate: estimate size mismatch");
    EstimateMetrics m;
    m.q_s_emp = (s_hat - inst.s0).squaredNorm() / inst.p();
    const Eigen::VectorXd eps_hat = inst.y - inst.X * s_hat;
    m.q_eps_emp = (eps_hat - inst.eps).squaredNorm() / inst.n();
    m.e_train_emp = eps_hat.squaredNorm() / inst.n();
    if (inst.X_test.rows() > 0) {
        m.e_gen_emp = (inst.y_test - inst.X_test * s_hat).squaredNorm() / inst.X_test.rows();
        m.has_e_gen = true;
    }
    return m;
}

double m_objective(const ProblemInstance& inst, const TabulatedConvexFunction& rho,
                   const TabulatedConvexFunction& sigma, const Eigen::VectorXd& s) {
    const Eigen::VectorXd r = inst.y - inst.X * s;
    double acc = 0;
    for (int i = 0; i < r.size(); ++i) acc += rho(r[i]);
    for (int j = 0; j < s.size(); ++j) acc += sigma(s[j]);
    return acc;
}

namespace {

double operator_norm_estimate(const Eigen::MatrixXd& X, std::uint64_t seed, int iters) {
    Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
    Eigen::VectorXd v(X.cols());
    for (int j = 0; j < v.size(); ++j) v[j] = rng.normal();
    v.normalize();
    for (int k = 0; k < iters; ++k) {
        v = X.transpose() * (X * v);
        const double n = v.norm();
        if (n == 0) break;
        v /= n;
    }
    return (X * v).norm();
}

// infinity-norm subgradient residual of the optimality condition at s_hat.
// The multiplier starts from the solver's dual estimate clamped into the loss
// subdifferential; if that is not already tight, it is polished by alternating
// box-constrained coordinate descent over both subdifferential selections,
// which reports the best certificate the primal point admits.
double kkt_certificate(const ProblemInstance& inst, const TabulatedConvexFunction& rho,
                       const TabulatedConvexFunction& sigma, const Eigen::VectorXd& s_hat,
                       const Eigen::VectorXd& u_in) {
    const int N = static_cast<int>(inst.X.rows());
    const int P = static_cast<int>(inst.X.cols());
    const Eigen::VectorXd r = inst.y - inst.X * s_hat;
    // epsilon-subdifferential boxes: an approximate primal point sits within
    // eta of the kinks its exact counterpart is pinned to, so kink boxes must
    // open for residuals that close
    const double eta_r = 1e-6 * (1.0 + r.lpNorm<Eigen::Infinity>());
    const double eta_s = 1e-6 * (1.0 + s_hat.lpNorm<Eigen::Infinity>());
    Eigen::VectorXd ulo(N), uhi(N), u(N);
    for (int i = 0; i < N; ++i) {
        ulo[i] = rho.subgradient(r[i] - eta_r).first;
        uhi[i] = rho.subgradient(r[i] + eta_r).second;
        u[i] = std::min(std::max(u_in[i], ulo[i]), uhi[i]);
    }
    Eigen::VectorXd vlo(P), vhi(P);
    for (int j = 0; j < P; ++j) {
        vlo[j] = sigma.subgradient(s_hat[j] - eta_s).first;
        vhi[j] = sigma.subgradient(s_hat[j] + eta_s).second;
    }
    auto residual = [&](const Eigen::VectorXd& g) {
        double res = 0;
        for (int j = 0; j < P; ++j)
            res = std::max(res, std::max(0.0, std::max(vlo[j] - g[j], g[j] - vhi[j])));
        return res;
    };
    Eigen::VectorXd g = inst.X.transpose() * u;
    double best = residual(g);
    if (best < 1e-10) return best;

    Eigen::VectorXd row_sq(N);
    for (int i = 0; i < N; ++i) row_sq[i] = inst.X.row(i).squaredNorm();
    double prev = best;
    for (int sweep = 0; sweep < 200; ++sweep) {
        for (int i = 0; i < N; ++i) {
            if (row_sq[i] == 0 || ulo[i] == uhi[i]) continue;
            double grad = 0;  // d/du_i of 0.5 sum_j dist^2(g_j, [vlo, vhi])
            for (int j = 0; j < P; ++j) {
                const double hj = g[j] - std::min(std::max(g[j], vlo[j]), vhi[j]);
                grad += inst.X(i, j) * hj;
            }
            const double unew =
                std::min(std::max(u[i] - grad / row_sq[i], ulo[i]), uhi[i]);
            const double du = unew - u[i];
            if (du != 0.0) {
                g += du * inst.X.row(i).transpose();
                u[i] = unew;
            }
        }
        const double cur = residual(g);
        best = std::min(best, cur);
        if (best < 1e-10 || cur > prev * (1.0 - 1e-4)) break;
        prev = cur;
    }
    return best;
}

}  // namespace

SolveResult solve_m_estimation(const ProblemInstance& inst, const TabulatedConvexFunction& rho,
                               const TabulatedConvexFunction& sigma,
                               const SolverOptions& opts) {
    const int N = inst.n(), P = inst.p();
    const double L =
        opts.step_safety * std::max(1e-12, operator_norm_estimate(inst.X, inst.seed,
                                                                  opts.power_iters));
    const double tau = 1.0 / L;
    const double sig = 1.0 / L;

    Eigen::VectorXd s = Eigen::VectorXd::Zero(P);
    Eigen::VectorXd sbar = s;
    Eigen::VectorXd z = Eigen::VectorXd::Zero(N);

    SolveResult out;
    double best_obj = std::numeric_limits<double>::infinity();
    double change = std::numeric_limits<double>::infinity();
    int small_streak = 0;
    int it = 0;
    for (; it < opts.max_iters; ++it) {
        // dual ascent on the conjugate of the loss term (Moreau decomposition)
        Eigen::VectorXd u = z + sig * (inst.X * sbar);
        for (int i = 0; i < N; ++i) {
            const double w = inst.y[i] - rho.prox(1.0 / sig, inst.y[i] - u[i] / sig);
            z[i] = u[i] - sig * w;
        }
        // primal descent through the regularizer prox
        Eigen::VectorXd v = s - tau * (inst.X.transpose() * z);
        Eigen::VectorXd s_new(P);
        for (int j = 0; j < P; ++j) s_new[j] = sigma.prox(tau, v[j]);
        sbar = 2.0 * s_new - s;
        change = (s_new - s).norm() / std::max(1.0, s_new.norm());
        s = s_new;
        // a single small step can be a fluke of the extrapolation; require a
        // short streak before declaring the fixed point reached
        small_streak = (change < opts.tol) ? small_streak + 1 : 0;

        if (it % opts.record_every == 0 || small_streak >= 3) {
            const double obj = m_objective(inst, rho, sigma, s);
            if (obj <= best_obj * (1.0 + 1e-12) + 1e-300) {
                if (obj < best_obj) best_obj = obj;
                out.s_hat = s;
            }
            out.objective_history.push_back(best_obj);
        }
        if (small_streak >= 3) {
            ++it;
            break;
        }
    }
    if (out.s_hat.size() == 0) out.s_hat = s;
    out.iterations = it;
    out.iterate_change = change;
    out.converged = small_streak >= 3;
    if (!out.converged && change > 1e-5)
        throw ConvergenceError("solve_m_estimation: iteration cap hit with residual " +
                                   std::to_string(change),
                               out.objective_history);
    out.certificate = kkt_certificate(inst, rho, sigma, out.s_hat, (-z).eval());
    out.metrics = evaluate_estimate(inst, out.s_hat);
    out.metrics.solver_iterations = out.iterations;
    out.metrics.solver_residual = out.iterate_change;
    return out;
}

Eigen::VectorXd ridge_analytic(const ProblemInstance& inst, double gamma) {
    if (!(gamma > 0)) throw DomainError("ridge_analytic: gamma must be positive");
    const int P = inst.p();
    Eigen::MatrixXd A = inst.X.transpose() * inst.X;
    A.diagonal().array() += gamma;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
    if (ldlt.info() != Eigen::Success)
        throw NumericalError("ridge_analytic: factorization failed");
    return ldlt.solve(inst.X.transpose() * inst.y);
}

SolveResult solve_noiseless_constrained(const ProblemInstance& inst,
                                        const TabulatedConvexFunction& sigma,
                                        const SolverOptions& opts) {
    const int N = inst.n(), P = inst.p();
    if (N >= P) throw DomainError("solve_noiseless_constrained: requires N < P");
    if (inst.eps.lpNorm<Eigen::Infinity>() != 0.0)
        throw DomainError("solve_noiseless_constrained: instance must be noiseless");

    Eigen::MatrixXd G = inst.X * inst.X.transpose();
    Eigen::LDLT<Eigen::MatrixXd> ldlt(G);
    if (ldlt.info() != Eigen::Success || (ldlt.vectorD().array() <= 0).any())
        throw NumericalError("solve_noiseless_constrained: degenerate design (X X^T singular)");
    auto project = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
        return v - inst.X.transpose() * ldlt.solve(inst.X * v - inst.y);
    };

    const double tau = 1.0;
    Eigen::VectorXd zvar = project(Eigen::VectorXd::Zero(P));
    Eigen::VectorXd xk(P), w(P);
    SolveResult out;
    double best_obj = std::numeric_limits<double>::infinity();
    double change = std::numeric_limits<double>::infinity();
    int small_streak = 0;
    int it = 0;
    const TabulatedConvexFunction rho_zero = TabulatedConvexFunction::zero();
    for (; it < opts.max_iters; ++it) {
        for (int j = 0; j < P; ++j) xk[j] = sigma.prox(tau, zvar[j]);
        w = project(2.0 * xk - zvar);
        const Eigen::VectorXd step = w - xk;
        zvar += step;
        change = step.norm() / std::max(1.0, xk.norm());
        small_streak = (change < opts.tol) ? small_streak + 1 : 0;
        if (it % opts.record_every == 0 || small_streak >= 3) {
            const Eigen::VectorXd cand = project(xk);
            const double obj = m_objective(inst, rho_zero, sigma, cand);
            if (obj <= best_obj * (1.0 + 1e-12) + 1e-300) {
                if (obj < best_obj) best_obj = obj;
                out.s_hat = cand;
            }
            out.objective_history.push_back(best_obj);
        }
        if (small_streak >= 3) {
            ++it;
            break;
        }
    }
    if (out.s_hat.size() == 0) out.s_hat = project(xk);
    out.iterations = it;
    out.iterate_change = change;
    out.converged = small_streak >= 3;
    if (!out.converged && change > 1e-5)
        throw ConvergenceError("solve_noiseless_constrained: iteration cap hit with residual " +
                                   std::to_string(change),
                               out.objective_history);

    // stationarity: the sigma subgradient held by the prox step must lie in
    // the row space of X; feasibility is exact up to the projection solve
    Eigen::VectorXd sub = (zvar - xk) / tau;
    const Eigen::VectorXd tangential = sub - inst.X.transpose() * ldlt.solve(inst.X * sub);
    const double feas = (inst.X * out.s_hat - inst.y).lpNorm<Eigen::Infinity>();
    out.certificate = std::max(feas, tangential.lpNorm<Eigen::Infinity>());
    out.metrics = evaluate_estimate(inst, out.s_hat);
    out.metrics.solver_iterations = out.iterations;
    out.metrics.solver_residual = out.iterate_change;
    return out;
}

}  // namespace hidim
