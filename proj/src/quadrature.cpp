#include "hidim/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

#include "hidim/errors.hpp"

namespace hidim {

namespace {

// Newton iteration on Legendre polynomials; nodes are the roots of P_n.
QuadRule compute_gauss_legendre(int n) {
    QuadRule rule;
    rule.x.resize(n);
    rule.w.resize(n);
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        // Chebyshev-based initial guess for the i-th root.
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
            }
            pp = n * (x * p0 - p1) / (x * x - 1.0);
            const double dx = p0 / pp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        rule.x[i] = -x;
        rule.x[n - 1 - i] = x;
        const double w = 2.0 / ((1.0 - x * x) * pp * pp);
        rule.w[i] = w;
        rule.w[n - 1 - i] = w;
    }
    return rule;
}

const QuadRule& cached_gauss_legendre(int n) {
    static std::map<int, QuadRule> cache;
    static std::mutex mtx;
    std::lock_guard<std::mutex> lock(mtx);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, compute_gauss_legendre(n)).first;
    return it->second;
}

}  // namespace

QuadRule gauss_legendre(int n) {
    if (n < 1) throw DomainError("gauss_legendre: need n >= 1");
    return cached_gauss_legendre(n);
}

QuadRule composite_gauss_legendre(double a, double b, int panels, int nodes) {
    if (!(b > a)) throw DomainError("composite_gauss_legendre: need b > a");
    if (panels < 1 || nodes < 1) throw DomainError("composite_gauss_legendre: bad sizes");
    const QuadRule& base = cached_gauss_legendre(nodes);
    QuadRule rule;
    rule.x.resize(static_cast<Eigen::Index>(panels) * nodes);
    rule.w.resize(rule.x.size());
    rule.edges.resize(panels + 1);
    const double h = (b - a) / panels;
    for (int p = 0; p < panels; ++p) {
        const double lo = a + p * h;
        const double mid = lo + 0.5 * h;
        rule.edges[p] = lo;
        for (int k = 0; k < nodes; ++k) {
            rule.x[p * nodes + k] = mid + 0.5 * h * base.x[k];
            rule.w[p * nodes + k] = 0.5 * h * base.w[k];
        }
    }
    rule.edges[panels] = b;
    return rule;
}

QuadRule composite_with_breakpoints(double a, double b, int panels,
                                    const std::vector<double>& breaks, int nodes) {
    std::vector<double> bounds{a, b};
    for (double t : breaks)
        if (t > a && t < b) bounds.push_back(t);
    std::sort(bounds.begin(), bounds.end());
    bounds.erase(std::unique(bounds.begin(), bounds.end()), bounds.end());

    const double total = b - a;
    std::vector<Eigen::ArrayXd> xs, ws;
    std::vector<std::vector<double>> es;
    Eigen::Index count = 0;
    for (std::size_t s = 0; s + 1 < bounds.size(); ++s) {
        const double lo = bounds[s], hi = bounds[s + 1];
        const int np = std::max(1, static_cast<int>(std::lround(panels * (hi - lo) / total)));
        QuadRule piece = composite_gauss_legendre(lo, hi, np, nodes);
        count += piece.size();
        xs.push_back(std::move(piece.x));
        ws.push_back(std::move(piece.w));
        es.push_back(std::move(piece.edges));
    }
    QuadRule rule;
    rule.x.resize(count);
    rule.w.resize(count);
    rule.edges.push_back(a);
    Eigen::Index at = 0;
    for (std::size_t s = 0; s < xs.size(); ++s) {
        rule.x.segment(at, xs[s].size()) = xs[s];
        rule.w.segment(at, xs[s].size()) = ws[s];
        at += xs[s].size();
        rule.edges.insert(rule.edges.end(), es[s].begin() + 1, es[s].end());
    }
    return rule;
}

double integrate_refined(const std::function<double(double)>& f, double a, double b,
                         double rel_tol, int initial_panels, int nodes, int max_doublings,
                         const std::vector<double>& breaks, double abs_scale) {
    auto eval = [&](int panels) {
        QuadRule rule = breaks.empty() ? composite_gauss_legendre(a, b, panels, nodes)
                                       : composite_with_breakpoints(a, b, panels, breaks, nodes);
        double acc = 0.0;
        for (Eigen::Index i = 0; i < rule.size(); ++i) acc += rule.w[i] * f(rule.x[i]);
        return acc;
    };
    int panels = initial_panels;
    double prev = eval(panels);
    for (int d = 0; d < max_doublings; ++d) {
        panels *= 2;
        const double cur = eval(panels);
        const double change = std::abs(cur - prev) / std::max({1e-300, abs_scale, std::abs(cur)});
        if (change < rel_tol) return cur;
        prev = cur;
    }
    throw NumericalError("integrate_refined: quadrature did not converge to tolerance " +
                         std::to_string(rel_tol) + " after " + std::to_string(max_doublings) +
                         " refinements on [" + std::to_string(a) + ", " + std::to_string(b) + "]");
}

}  // namespace hidim
