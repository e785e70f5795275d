#include "hidim/convex_fn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hidim/errors.hpp"

namespace hidim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double soft_threshold(double x, double t) {
    if (x > t) return x - t;
    if (x < -t) return x + t;
    return 0.0;
}

// Pool-adjacent-violators projection onto nondecreasing sequences.
Eigen::ArrayXd isotonic_nondecreasing(const Eigen::ArrayXd& m) {
    const Eigen::Index n = m.size();
    Eigen::ArrayXd out(n);
    std::vector<double> sum(n), cnt(n);
    std::vector<Eigen::Index> len(n);
    Eigen::Index blocks = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        sum[blocks] = m[i];
        cnt[blocks] = 1;
        len[blocks] = 1;
        ++blocks;
        while (blocks > 1 &&
               sum[blocks - 2] / cnt[blocks - 2] > sum[blocks - 1] / cnt[blocks - 1]) {
            sum[blocks - 2] += sum[blocks - 1];
            cnt[blocks - 2] += cnt[blocks - 1];
            len[blocks - 2] += len[blocks - 1];
            --blocks;
        }
    }
    Eigen::Index at = 0;
    for (Eigen::Index b = 0; b < blocks; ++b) {
        const double level = sum[b] / cnt[b];
        for (Eigen::Index k = 0; k < len[b]; ++k) out[at++] = level;
    }
    return out;
}

}  // namespace

TabulatedConvexFunction TabulatedConvexFunction::quadratic(double curvature) {
    if (!(curvature >= 0.0) || !std::isfinite(curvature))
        throw DomainError("TabulatedConvexFunction::quadratic: curvature must be >= 0");
    TabulatedConvexFunction f;
    f.tag_ = FunctionTag::Quadratic;
    f.coeff_ = curvature;
    return f;
}

TabulatedConvexFunction TabulatedConvexFunction::absolute_value(double weight) {
    if (!(weight > 0.0) || !std::isfinite(weight))
        throw DomainError("TabulatedConvexFunction::absolute_value: weight must be > 0");
    TabulatedConvexFunction f;
    f.tag_ = FunctionTag::AbsoluteValue;
    f.coeff_ = weight;
    return f;
}

TabulatedConvexFunction TabulatedConvexFunction::zero() {
    TabulatedConvexFunction f;
    f.tag_ = FunctionTag::Zero;
    return f;
}

TabulatedConvexFunction TabulatedConvexFunction::from_samples(const Eigen::ArrayXd& knots,
                                                              const Eigen::ArrayXd& values) {
    return from_samples(knots, values, Eigen::ArrayXd());
}

TabulatedConvexFunction TabulatedConvexFunction::from_samples(const Eigen::ArrayXd& knots,
                                                              const Eigen::ArrayXd& values,
                                                              const Eigen::ArrayXd& derivatives) {
    const Eigen::Index n = knots.size();
    if (n < 2 || values.size() != n)
        throw DomainError("from_samples: need >= 2 knots and matching values");
    if (derivatives.size() != 0 && derivatives.size() != n)
        throw DomainError("from_samples: derivative array size mismatch");
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!std::isfinite(knots[i]) || !std::isfinite(values[i]))
            throw DomainError("from_samples: non-finite input");
        if (i > 0 && !(knots[i] > knots[i - 1]))
            throw DomainError("from_samples: knots must be strictly increasing");
    }

    Eigen::ArrayXd m(n - 1);
    for (Eigen::Index i = 0; i + 1 < n; ++i)
        m[i] = (values[i + 1] - values[i]) / (knots[i + 1] - knots[i]);

    const double slope_scale = std::max(1.0, m.abs().maxCoeff());
    double worst = 0.0;
    Eigen::Index worst_at = 0;
    for (Eigen::Index i = 0; i + 2 < n; ++i) {
        const double gap = m[i] - m[i + 1];
        if (gap > worst) {
            worst = gap;
            worst_at = i;
        }
    }
    if (worst > 1e-6 * slope_scale)
        throw ConvexityError("from_samples: slope decrease " + std::to_string(worst) +
                                 " exceeds the repairable tolerance",
                             knots[worst_at], knots[std::min(worst_at + 2, n - 1)]);

    TabulatedConvexFunction f;
    f.tag_ = FunctionTag::Tabulated;
    f.knots_ = knots;
    f.values_ = values;
    if (worst > 0.0) {
        m = isotonic_nondecreasing(m);
        for (Eigen::Index i = 0; i + 1 < n; ++i)
            f.values_[i + 1] = f.values_[i] + m[i] * (knots[i + 1] - knots[i]);
    }

    Eigen::ArrayXd g(n);
    if (derivatives.size() == n) {
        for (Eigen::Index i = 0; i < n; ++i) {
            double lo = (i == 0) ? -kInf : m[i - 1];
            double hi = (i + 1 == n) ? kInf : m[i];
            g[i] = std::min(std::max(derivatives[i], lo), hi);
        }
    } else {
        g[0] = m[0];
        for (Eigen::Index i = 1; i + 1 < n; ++i) g[i] = 0.5 * (m[i - 1] + m[i]);
        g[n - 1] = m[n - 2];
    }
    f.build_pieces(g);
    return f;
}

// Shape-preserving quadratic spline pieces. The interval data satisfy
// g0 <= m <= g1; exactness of knot values is kept by splitting the interval
// into a linear sliver plus a quadratic where a single quadratic cannot match
// value and both end derivatives simultaneously.
void TabulatedConvexFunction::build_pieces(const Eigen::ArrayXd& g) {
    const Eigen::Index n = knots_.size();
    pieces_.clear();
    pieces_.reserve(static_cast<std::size_t>(2 * n));

    std::vector<Piece> body;
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
        const double x0 = knots_[i], x1 = knots_[i + 1];
        const double h = x1 - x0;
        const double v0 = values_[i];
        const double mi = (values_[i + 1] - v0) / h;
        const double g0 = g[i], g1 = g[i + 1];
        const double dg = g1 - g0;
        const double tiny = 1e-13 * (std::abs(g0) + std::abs(g1) + 1.0);
        if (dg <= tiny) {
            body.push_back({x0, x1, x0, v0, mi, 0.0});
            continue;
        }
        const double avg = 0.5 * (g0 + g1);
        if (avg >= mi) {
            // low-slope linear sliver first, then the quadratic ramp
            double t = h * (avg - mi) / (0.5 * dg);
            t = std::min(std::max(t, 0.0), h);
            if (h - t < 1e-12 * h) {
                body.push_back({x0, x1, x0, v0, mi, 0.0});
            } else {
                if (t > 1e-12 * h) body.push_back({x0, x0 + t, x0, v0, g0, 0.0});
                const double xa = x0 + t;
                const double va = v0 + g0 * t;
                body.push_back({xa, x1, xa, va, g0, dg / (h - t)});
            }
        } else {
            double s = h * (mi - avg) / (0.5 * dg);
            s = std::min(std::max(s, 0.0), h);
            if (h - s < 1e-12 * h) {
                body.push_back({x0, x1, x0, v0, mi, 0.0});
            } else {
                const double xb = x1 - s;
                const double c = dg / (h - s);
                body.push_back({x0, xb, x0, v0, g0, c});
                if (s > 1e-12 * h) {
                    const double vb = v0 + g0 * (xb - x0) + 0.5 * c * (xb - x0) * (xb - x0);
                    body.push_back({xb, x1, xb, vb, g1, 0.0});
                }
            }
        }
    }

    pieces_.push_back({-kInf, knots_[0], knots_[0], values_[0], g[0], body.front().c});
    for (auto& p : body) pieces_.push_back(p);
    const Piece& last = body.back();
    const double end_g = last.g + last.c * (last.hi - last.x0);
    pieces_.push_back({knots_[n - 1], kInf, knots_[n - 1], values_[n - 1], end_g, last.c});
}

std::size_t TabulatedConvexFunction::piece_index(double x) const {
    // first piece whose upper bound exceeds x (right-continuous convention)
    std::size_t lo = 0, hi = pieces_.size() - 1;
    while (lo < hi) {
        const std::size_t mid = (lo + hi) / 2;
        if (pieces_[mid].hi > x)
            hi = mid;
        else
            lo = mid + 1;
    }
    return lo;
}

const TabulatedConvexFunction::Piece& TabulatedConvexFunction::piece_at(double x) const {
    return pieces_[piece_index(x)];
}

double TabulatedConvexFunction::operator()(double x) const {
    switch (tag_) {
        case FunctionTag::Zero: return 0.0;
        case FunctionTag::Quadratic: return 0.5 * coeff_ * x * x;
        case FunctionTag::AbsoluteValue: return coeff_ * std::abs(x);
        case FunctionTag::Tabulated: break;
    }
    const Piece& p = piece_at(x);
    const double d = x - p.x0;
    return p.v + p.g * d + 0.5 * p.c * d * d;
}

double TabulatedConvexFunction::derivative(double x) const {
    switch (tag_) {
        case FunctionTag::Zero: return 0.0;
        case FunctionTag::Quadratic: return coeff_ * x;
        case FunctionTag::AbsoluteValue: return x >= 0.0 ? coeff_ : -coeff_;
        case FunctionTag::Tabulated: break;
    }
    const Piece& p = piece_at(x);
    return p.g + p.c * (x - p.x0);
}

std::pair<double, double> TabulatedConvexFunction::subgradient(double x) const {
    switch (tag_) {
        case FunctionTag::Zero: return {0.0, 0.0};
        case FunctionTag::Quadratic: return {coeff_ * x, coeff_ * x};
        case FunctionTag::AbsoluteValue:
            if (x > 0.0) return {coeff_, coeff_};
            if (x < 0.0) return {-coeff_, -coeff_};
            return {-coeff_, coeff_};
        case FunctionTag::Tabulated: break;
    }
    const std::size_t idx = piece_index(x);
    const Piece& p = pieces_[idx];
    const double right = p.g + p.c * (x - p.x0);
    double left = right;
    if (idx > 0 && x == p.lo) {
        const Piece& q = pieces_[idx - 1];
        left = q.g + q.c * (q.hi - q.x0);
    }
    return {std::min(left, right), std::max(left, right)};
}

double TabulatedConvexFunction::second_derivative(double x) const {
    switch (tag_) {
        case FunctionTag::Zero: return 0.0;
        case FunctionTag::Quadratic: return coeff_;
        case FunctionTag::AbsoluteValue: return 0.0;
        case FunctionTag::Tabulated: break;
    }
    return piece_at(x).c;
}

double TabulatedConvexFunction::prox(double lambda, double x) const {
    if (!(lambda > 0.0)) throw DomainError("prox: lambda must be > 0");
    switch (tag_) {
        case FunctionTag::Zero: return x;
        case FunctionTag::Quadratic: return x / (1.0 + lambda * coeff_);
        case FunctionTag::AbsoluteValue: return soft_threshold(x, lambda * coeff_);
        case FunctionTag::Tabulated: break;
    }
    // monotone optimality condition psi(y) = (y - x)/lambda + f'(y); locate
    // the piece where it crosses zero, then solve the linear equation exactly
    const auto hi_val = [&](const Piece& p) {
        if (p.hi == kInf) return kInf;
        return (p.hi - x) / lambda + p.g + p.c * (p.hi - p.x0);
    };
    std::size_t lo = 0, hi = pieces_.size() - 1;
    while (lo < hi) {
        const std::size_t mid = (lo + hi) / 2;
        if (hi_val(pieces_[mid]) >= 0.0)
            hi = mid;
        else
            lo = mid + 1;
    }
    const Piece& p = pieces_[lo];
    if (p.lo != -kInf) {
        const double at_lo = (p.lo - x) / lambda + p.g;  // right derivative at p.lo
        if (at_lo >= 0.0) return p.lo;                   // subgradient jump holds the point
    }
    double y = (x / lambda - p.g + p.c * p.x0) / (1.0 / lambda + p.c);
    if (p.lo != -kInf) y = std::max(y, p.lo);
    if (p.hi != kInf) y = std::min(y, p.hi);
    return y;
}

double TabulatedConvexFunction::moreau(double lambda, double x) const {
    switch (tag_) {
        case FunctionTag::Zero: return 0.0;
        case FunctionTag::Quadratic: return 0.5 * coeff_ * x * x / (1.0 + lambda * coeff_);
        case FunctionTag::AbsoluteValue: {
            const double t = lambda * coeff_;
            if (std::abs(x) <= t) return 0.5 * x * x / lambda;
            return coeff_ * std::abs(x) - 0.5 * coeff_ * t;
        }
        case FunctionTag::Tabulated: break;
    }
    const double y = prox(lambda, x);
    return 0.5 * (y - x) * (y - x) / lambda + (*this)(y);
}

double TabulatedConvexFunction::moreau_grad(double lambda, double x) const {
    return (x - prox(lambda, x)) / lambda;
}

double TabulatedConvexFunction::prox_jacobian(double lambda, double x) const {
    switch (tag_) {
        case FunctionTag::Zero: return 1.0;
        case FunctionTag::Quadratic: return 1.0 / (1.0 + lambda * coeff_);
        case FunctionTag::AbsoluteValue: return std::abs(x) > lambda * coeff_ ? 1.0 : 0.0;
        case FunctionTag::Tabulated: break;
    }
    const double h = 1e-5 * (1.0 + std::abs(x));
    const double j = (prox(lambda, x + h) - prox(lambda, x - h)) / (2.0 * h);
    return std::min(std::max(j, 0.0), 1.0);
}

std::vector<double> TabulatedConvexFunction::prox_breakpoints(double lambda) const {
    if (tag_ == FunctionTag::AbsoluteValue)
        return {-lambda * coeff_, lambda * coeff_};
    return {};
}

double TabulatedConvexFunction::argmin() const {
    switch (tag_) {
        case FunctionTag::Zero: return 0.0;
        case FunctionTag::Quadratic: return 0.0;
        case FunctionTag::AbsoluteValue: return 0.0;
        case FunctionTag::Tabulated: break;
    }
    const auto deriv_hi = [&](const Piece& p) {
        if (p.hi == kInf) return p.c > 0.0 ? kInf : p.g;
        return p.g + p.c * (p.hi - p.x0);
    };
    std::size_t lo = 0, hi = pieces_.size() - 1;
    while (lo < hi) {
        const std::size_t mid = (lo + hi) / 2;
        if (deriv_hi(pieces_[mid]) >= 0.0)
            hi = mid;
        else
            lo = mid + 1;
    }
    const Piece& p = pieces_[lo];
    if (p.lo != -kInf && p.g + p.c * (p.lo - p.x0) >= 0.0) return p.lo;
    if (p.c > 0.0) {
        double y = p.x0 - p.g / p.c;
        if (p.lo != -kInf) y = std::max(y, p.lo);
        if (p.hi != kInf) y = std::min(y, p.hi);
        return y;
    }
    return p.hi == kInf ? p.x0 : p.hi;
}

double TabulatedConvexFunction::min_value() const {
    if (tag_ != FunctionTag::Tabulated) return 0.0;
    return (*this)(argmin());
}

TabulatedConvexFunction TabulatedConvexFunction::shifted(double constant) const {
    TabulatedConvexFunction f = *this;
    if (tag_ == FunctionTag::Tabulated) {
        f.values_ += constant;
        for (auto& p : f.pieces_) p.v += constant;
    }
    // tagged families absorb additive constants silently: argmins of
    // objectives built from them are unaffected
    return f;
}

nlohmann::json TabulatedConvexFunction::to_json() const {
    nlohmann::json j;
    switch (tag_) {
        case FunctionTag::Zero: j["tag"] = "zero"; break;
        case FunctionTag::Quadratic:
            j["tag"] = "quadratic";
            j["coefficient"] = coeff_;
            break;
        case FunctionTag::AbsoluteValue:
            j["tag"] = "absolute_value";
            j["coefficient"] = coeff_;
            break;
        case FunctionTag::Tabulated: {
            j["tag"] = "tabulated";
            j["knots"] = std::vector<double>(knots_.begin(), knots_.end());
            j["values"] = std::vector<double>(values_.begin(), values_.end());
            break;
        }
    }
    return j;
}

TabulatedConvexFunction TabulatedConvexFunction::from_json(const nlohmann::json& j) {
    const std::string tag = j.at("tag").get<std::string>();
    if (tag == "zero") return zero();
    if (tag == "quadratic") return quadratic(j.at("coefficient").get<double>());
    if (tag == "absolute_value") return absolute_value(j.at("coefficient").get<double>());
    if (tag == "tabulated") {
        const auto kv = j.at("knots").get<std::vector<double>>();
        const auto vv = j.at("values").get<std::vector<double>>();
        Eigen::ArrayXd k = Eigen::Map<const Eigen::ArrayXd>(kv.data(), kv.size());
        Eigen::ArrayXd v = Eigen::Map<const Eigen::ArrayXd>(vv.data(), vv.size());
        return from_samples(k, v);
    }
    throw ConfigError("TabulatedConvexFunction::from_json: unknown tag '" + tag + "'");
}

namespace {

// Plain (possibly nonconvex) interval quadratics for the envelope input:
// matches both knot values, curvature from the knot-derivative difference.
std::vector<TabulatedConvexFunction::Piece> plain_pieces(const Eigen::ArrayXd& knots,
                                                         const Eigen::ArrayXd& values,
                                                         const Eigen::ArrayXd& derivs) {
    const Eigen::Index n = knots.size();
    std::vector<TabulatedConvexFunction::Piece> pieces;
    pieces.reserve(static_cast<std::size_t>(n + 1));
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
        const double h = knots[i + 1] - knots[i];
        const double m = (values[i + 1] - values[i]) / h;
        const double c = (derivs[i + 1] - derivs[i]) / h;
        pieces.push_back({knots[i], knots[i + 1], knots[i], values[i], m - 0.5 * c * h, c});
    }
    const auto& first = pieces.front();
    const auto& last = pieces.back();
    const double gl = first.g;  // derivative at the left boundary knot
    const double gr = last.g + last.c * (last.hi - last.x0);
    std::vector<TabulatedConvexFunction::Piece> out;
    out.reserve(pieces.size() + 2);
    out.push_back({-kInf, knots[0], knots[0], values[0], gl, std::max(first.c, 0.0)});
    for (auto& p : pieces) out.push_back(p);
    out.push_back({knots[n - 1], kInf, knots[n - 1], values[n - 1], gr, std::max(last.c, 0.0)});
    return out;
}

}  // namespace

TabulatedConvexFunction negate_and_envelope(const Eigen::ArrayXd& knots,
                                            const Eigen::ArrayXd& values,
                                            const Eigen::ArrayXd& derivatives, double q) {
    return negate_and_envelope(knots, values, derivatives, q, knots);
}

TabulatedConvexFunction negate_and_envelope(const Eigen::ArrayXd& knots,
                                            const Eigen::ArrayXd& values,
                                            const Eigen::ArrayXd& derivatives, double q,
                                            const Eigen::ArrayXd& out_knots) {
    if (!(q > 0.0)) throw DomainError("negate_and_envelope: q must be > 0");
    const Eigen::Index n_in = knots.size();
    if (n_in < 2 || values.size() != n_in || derivatives.size() != n_in)
        throw DomainError("negate_and_envelope: inconsistent table sizes");

    const auto pieces = plain_pieces(knots, values, derivatives);
    const double inv_q = 1.0 / q;
    if (pieces.front().c >= inv_q * (1.0 - 1e-12) || pieces.back().c >= inv_q * (1.0 - 1e-12))
        throw DomainError(
            "negate_and_envelope: inner objective not coercive (tail curvature of E reaches "
            "1/q at a grid end)");

    const Eigen::Index n = out_knots.size();
    Eigen::ArrayXd env(n), env_deriv(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const double x = out_knots[k];
        double best = -kInf, best_y = x;
        auto consider = [&](const TabulatedConvexFunction::Piece& p, double y) {
            const double d = y - p.x0;
            const double val = p.v + p.g * d + 0.5 * p.c * d * d -
                               0.5 * (y - x) * (y - x) * inv_q;
            if (val > best) {
                best = val;
                best_y = y;
            }
        };
        for (const auto& p : pieces) {
            const double a2 = 0.5 * (p.c - inv_q);
            if (a2 < 0.0) {
                // vertex of E(y) - (y-x)^2/(2q) on this piece
                const double b1 = p.g - p.c * p.x0 + x * inv_q;
                const double yv = -b1 / (2.0 * a2);
                if (yv >= p.lo && yv <= p.hi) consider(p, yv);
            }
            if (p.lo != -kInf) consider(p, p.lo);
            if (p.hi != kInf) consider(p, p.hi);
        }
        env[k] = best;
        env_deriv[k] = (best_y - x) * inv_q;
    }
    return TabulatedConvexFunction::from_samples(out_knots, env, env_deriv);
}

TabulatedConvexFunction negate_and_envelope(const TabulatedConvexFunction& energy, double q) {
    if (!(q > 0.0)) throw DomainError("negate_and_envelope: q must be > 0");
    switch (energy.tag()) {
        case FunctionTag::Zero: return TabulatedConvexFunction::zero();
        case FunctionTag::Quadratic: {
            const double c = energy.coefficient();
            if (c * q >= 1.0 - 1e-12)
                throw DomainError("negate_and_envelope: quadratic energy too steep for q");
            return TabulatedConvexFunction::quadratic(c / (1.0 - c * q));
        }
        case FunctionTag::AbsoluteValue:
            // max_y [ w|y| - (y-x)^2/(2q) ] = w|x| + w^2 q / 2; the constant
            // is dropped (callers re-normalize additive constants anyway)
            return TabulatedConvexFunction::absolute_value(energy.coefficient());
        case FunctionTag::Tabulated: break;
    }
    const Eigen::Index n = energy.knots().size();
    Eigen::ArrayXd derivs(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto sg = energy.subgradient(energy.knots()[i]);
        derivs[i] = 0.5 * (sg.first + sg.second);
    }
    return negate_and_envelope(energy.knots(), energy.values(), derivs, q);
}

}  // namespace hidim
