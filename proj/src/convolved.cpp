#include "hidim/convolved.hpp"

#include <algorithm>
#include <cmath>

#include "hidim/errors.hpp"
#include "hidim/quadrature.hpp"

namespace hidim {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kLogTiny = -745.0;

std::vector<double> base_kinks(const ScalarDistribution& d) {
    if (d.family() == Family::Laplacian) return {0.0};
    return {};
}
}  // namespace

ConvolvedDensity::ConvolvedDensity(ScalarDistribution base, double q, ConvOptions opt)
    : base_(std::move(base)), q_(q), opt_(opt) {
    if (!(q >= 0) || !std::isfinite(q)) throw DomainError("convolve_with_gaussian: q must be >= 0");
    const double v = base_.variance();
    // the grid must cover both the gaussian spread and the base's own decay
    // length: exponential tails carry x^2-moment mass far beyond a fixed
    // multiple of the total standard deviation
    const double sigma_width = opt_.support_sigmas * std::sqrt(v + q_);
    half_width_ = std::max(sigma_width, base_.support_radius(38.0) + 14.0 * std::sqrt(q_));
    gaussian_closed_ = (base_.family() == Family::Gaussian);

    // panel count scales with any widening so the core resolution is kept
    const int panels = static_cast<int>(std::ceil(opt_.panels * half_width_ / sigma_width));

    // Tabulation grid: composite GL panels, split near base kinks so the
    // residual non-smoothness at scale sqrt(q) is resolved.
    std::vector<double> breaks;
    if (q_ > 0) {
        const double s = std::sqrt(q_);
        for (double t0 : base_kinks(base_))
            for (double f : {-6.0, -3.0, -1.5, 0.0, 1.5, 3.0, 6.0}) breaks.push_back(t0 + f * s);
    } else {
        breaks = base_kinks(base_);
    }
    QuadRule rule = breaks.empty()
                        ? composite_gauss_legendre(-half_width_, half_width_, panels, opt_.nodes)
                        : composite_with_breakpoints(-half_width_, half_width_, panels,
                                                     breaks, opt_.nodes);
    x_ = std::move(rule.x);
    w_ = std::move(rule.w);
    panel_edges_ = std::move(rule.edges);

    const Eigen::Index n = x_.size();
    logp_.resize(n);
    score_.resize(n);
    score_deriv_.resize(n);
    tilted_var_.resize(n);

    if (q_ == 0.0) {
        for (Eigen::Index i = 0; i < n; ++i) {
            logp_[i] = base_.log_density(x_[i]);
            score_[i] = base_.score(x_[i]);
        }
        if (base_.family() == Family::Gaussian)
            score_deriv_.setConstant(-1.0 / v);
        else if (base_.family() == Family::Laplacian)
            score_deriv_.setZero();
        else
            for (Eigen::Index i = 0; i < n; ++i)
                score_deriv_[i] = -base_.energy_function().second_derivative(x_[i]);
        tilted_var_.setZero();
    } else if (gaussian_closed_) {
        const double tv = v + q_;
        logp_ = -0.5 * x_ * x_ / tv - 0.5 * std::log(tv) - 0.5 * kLog2Pi;
        score_ = -x_ / tv;
        score_deriv_.setConstant(-1.0 / tv);
        tilted_var_.setConstant(v * q_ / tv);
    } else {
        for (Eigen::Index i = 0; i < n; ++i) {
            const Tilted t = tilted_moments(x_[i]);
            logp_[i] = t.logp;
            score_[i] = t.mean_shift / q_;
            tilted_var_[i] = t.var;
            score_deriv_[i] = (t.var / q_ - 1.0) / q_;
        }
    }

    const Eigen::ArrayXd p = logp_.exp();
    mass_ = (w_ * p).sum();
    fisher_ = (w_ * p * score_ * score_).sum();
}

ConvolvedDensity::Tilted ConvolvedDensity::tilted_moments(double x) const {
    const double s = std::sqrt(q_);
    // the integrand p(t) gauss(x - t; q) is log-concave with its maximum at
    // the tilt center; 14 sigma of the gaussian factor on each side bounds
    // everything visible in double precision
    const double center = base_.tilt_center(q_, x);
    const double wa = center - 14.0 * s;
    const double wb = center + 14.0 * s;

    // panels resolve the gaussian scale and the base's smooth feature scale
    // everywhere, with extra refinement at kinks
    const double hint = base_.smoothness_scale();
    const auto kinks = base_kinks(base_);
    std::vector<double> edges{wa, wb};
    for (double k : kinks)
        for (double e : {k - 8.0 * std::min(hint, s), k, k + 8.0 * std::min(hint, s)})
            if (e > wa && e < wb) edges.push_back(e);
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

    QuadRule rule;
    {
        std::vector<double> xs, ws;
        const QuadRule& cell = gauss_legendre(8);
        const double coarse = 0.45 * std::min(s, 2.0 * hint);
        for (std::size_t seg = 0; seg + 1 < edges.size(); ++seg) {
            const double lo = edges[seg], hi = edges[seg + 1];
            double target = coarse;
            for (double k : kinks)
                if (lo >= k - 8.0 * std::min(hint, s) - 1e-300 &&
                    hi <= k + 8.0 * std::min(hint, s) + 1e-300)
                    target = 0.45 * std::min(s, hint);
            int panels = static_cast<int>(std::ceil((hi - lo) / target));
            panels = std::min(std::max(panels, 2), 4096);
            const double h = (hi - lo) / panels;
            for (int p = 0; p < panels; ++p) {
                const double mid = lo + (p + 0.5) * h;
                for (Eigen::Index kk = 0; kk < cell.size(); ++kk) {
                    xs.push_back(mid + 0.5 * h * cell.x[kk]);
                    ws.push_back(0.5 * h * cell.w[kk]);
                }
            }
        }
        rule.x = Eigen::Map<const Eigen::ArrayXd>(xs.data(), static_cast<Eigen::Index>(xs.size()));
        rule.w = Eigen::Map<const Eigen::ArrayXd>(ws.data(), static_cast<Eigen::Index>(ws.size()));
    }

    const Eigen::Index n = rule.size();
    Eigen::ArrayXd li(n);
    for (Eigen::Index i = 0; i < n; ++i) li[i] = base_.log_density(rule.x[i]);
    li += -0.5 * (x - rule.x) * (x - rule.x) / q_ - 0.5 * std::log(q_) - 0.5 * kLog2Pi;

    const double m = li.maxCoeff();
    if (!std::isfinite(m)) return {kLogTiny, 0.0, q_};
    const Eigen::ArrayXd e = rule.w * (li - m).exp();
    const Eigen::ArrayXd d = rule.x - x;
    const double s0 = e.sum();
    const double s1 = (e * d).sum();
    const double s2 = (e * d * d).sum();
    if (!(s0 > 0)) return {kLogTiny, 0.0, q_};
    const double mean_shift = s1 / s0;
    const double var = std::max(0.0, s2 / s0 - mean_shift * mean_shift);
    return {m + std::log(s0), mean_shift, var};
}

double ConvolvedDensity::log_density_at(double x) const {
    if (q_ == 0.0) return base_.log_density(x);
    if (gaussian_closed_) {
        const double tv = variance();
        return -0.5 * x * x / tv - 0.5 * std::log(tv) - 0.5 * kLog2Pi;
    }
    return tilted_moments(x).logp;
}

double ConvolvedDensity::density_at(double x) const { return std::exp(log_density_at(x)); }

double ConvolvedDensity::score_at(double x) const {
    if (q_ == 0.0) return base_.score(x);
    if (gaussian_closed_) return -x / variance();
    return tilted_moments(x).mean_shift / q_;
}

double ConvolvedDensity::score_derivative_at(double x) const {
    if (q_ == 0.0) {
        if (base_.family() == Family::Laplacian) return 0.0;
        if (base_.family() == Family::Gaussian) return -1.0 / variance();
        return -base_.energy_function().second_derivative(x);
    }
    if (gaussian_closed_) return -1.0 / variance();
    const Tilted t = tilted_moments(x);
    return (t.var / q_ - 1.0) / q_;
}

ConvolvedDensity::PointStats ConvolvedDensity::stats_at(double x) const {
    if (q_ == 0.0 || gaussian_closed_)
        return {log_density_at(x), score_at(x), score_derivative_at(x)};
    const Tilted t = tilted_moments(x);
    return {t.logp, t.mean_shift / q_, (t.var / q_ - 1.0) / q_};
}

ConvolvedDensity::PosteriorMean ConvolvedDensity::posterior_mean_ex(double x) const {
    if (!(q_ > 0)) throw DomainError("posterior_mean: requires q > 0");
    if (std::abs(x) <= half_width_) return {x + q_ * score_at(x), false};
    // quadratic log-density extrapolation = linear score continuation
    const double edge = x > 0 ? half_width_ : -half_width_;
    const double sc = score_at(edge) + score_derivative_at(edge) * (x - edge);
    return {x + q_ * sc, true};
}

double ConvolvedDensity::posterior_mean(double x) const { return posterior_mean_ex(x).value; }

double ConvolvedDensity::fisher_information() const { return fisher_; }

double ConvolvedDensity::total_mass() const { return mass_; }

double ConvolvedDensity::expectation(const std::function<double(double)>& g) const {
    double acc = 0;
    for (Eigen::Index i = 0; i < x_.size(); ++i)
        acc += w_[i] * std::exp(logp_[i]) * g(x_[i]);
    return acc;
}

double ConvolvedDensity::expectation(const std::function<double(double)>& g,
                                     const std::vector<double>& breaks) const {
    return expectation_indexed([&](double x, Eigen::Index) { return g(x); }, breaks);
}

double ConvolvedDensity::expectation_indexed(
    const std::function<double(double, Eigen::Index)>& g,
    const std::vector<double>& breaks) const {
    double acc = 0;
    for (Eigen::Index i = 0; i < x_.size(); ++i)
        acc += w_[i] * std::exp(logp_[i]) * g(x_[i], i);
    if (breaks.empty()) return acc;

    // Group interior breakpoints by the panel that contains them.
    std::vector<std::pair<std::size_t, double>> hits;
    for (double b : breaks) {
        if (b <= panel_edges_.front() || b >= panel_edges_.back()) continue;
        const auto it = std::upper_bound(panel_edges_.begin(), panel_edges_.end(), b);
        hits.emplace_back(static_cast<std::size_t>(it - panel_edges_.begin()) - 1, b);
    }
    if (hits.empty()) return acc;
    std::sort(hits.begin(), hits.end());

    std::size_t k = 0;
    while (k < hits.size()) {
        const std::size_t panel = hits[k].first;
        std::vector<double> inner;
        while (k < hits.size() && hits[k].first == panel) inner.push_back(hits[k++].second);

        const double lo = panel_edges_[panel], hi = panel_edges_[panel + 1];
        const Eigen::Index at = static_cast<Eigen::Index>(panel) * opt_.nodes;
        for (Eigen::Index i = 0; i < opt_.nodes; ++i)
            acc -= w_[at + i] * std::exp(logp_[at + i]) * g(x_[at + i], at + i);

        const QuadRule sub = composite_with_breakpoints(lo, hi, 2, inner, opt_.nodes);
        for (Eigen::Index i = 0; i < sub.size(); ++i)
            acc += sub.w[i] * density_at(sub.x[i]) * g(sub.x[i], Eigen::Index(-1));
    }
    return acc;
}

double ConvolvedDensity::mmse_via_conditional_variance() const {
    return (w_ * logp_.exp() * tilted_var_).sum();
}

double ConvolvedDensity::mmse_via_fisher() const { return q_ * (1.0 - q_ * fisher_); }

ConvolvedDensity convolve_with_gaussian(const ScalarDistribution& d, double q, ConvOptions opt) {
    return ConvolvedDensity(d, q, opt);
}

double mmse(const ScalarDistribution& d, double q, ConvOptions opt) {
    if (!(q > 0)) throw DomainError("mmse: q must be > 0");
    const ConvolvedDensity conv(d, q, opt);
    const double a = conv.mmse_via_conditional_variance();
    const double b = conv.mmse_via_fisher();
    const double tol = 1e-6 * (1.0 + std::min(q, d.variance()));
    if (std::abs(a - b) > tol)
        throw NumericalError("mmse: double-quadrature and Fisher-identity routes disagree (" +
                             std::to_string(a) + " vs " + std::to_string(b) + ")");
    return a;
}

}  // namespace hidim
