#include "hidim/distribution.hpp"

#include <cmath>

#include "hidim/errors.hpp"
#include "hidim/quadrature.hpp"

namespace hidim {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
}

struct ScalarDistribution::CustomData {
    Eigen::ArrayXd raw_knots;     // as provided (for serialization / rescale)
    Eigen::ArrayXd raw_energy;
    // normalized: density = exp(-energy)
    TabulatedConvexFunction energy = TabulatedConvexFunction::zero();
    double variance = 0;
    double radius80 = 0;          // energy >= min + 80 outside +-radius80
    double scale_hint = 1;
    Eigen::ArrayXd cdf_x, cdf_p;  // sampling table
};

ScalarDistribution ScalarDistribution::gaussian(double scale) {
    if (!(scale > 0) || !std::isfinite(scale))
        throw DomainError("ScalarDistribution::gaussian: scale must be positive");
    return ScalarDistribution(Family::Gaussian, scale);
}

ScalarDistribution ScalarDistribution::laplacian(double scale) {
    if (!(scale > 0) || !std::isfinite(scale))
        throw DomainError("ScalarDistribution::laplacian: scale must be positive");
    return ScalarDistribution(Family::Laplacian, scale);
}

ScalarDistribution ScalarDistribution::custom(const Eigen::ArrayXd& knots,
                                              const Eigen::ArrayXd& energy) {
    TabulatedConvexFunction raw = TabulatedConvexFunction::from_samples(knots, energy);

    auto data = std::make_shared<CustomData>();
    data->raw_knots = knots;
    data->raw_energy = energy;

    // Integration range: out to energy = min + 80 (density ~ 1e-35 relative).
    const double emin = raw.min_value();
    auto radius_for = [&](double drop) {
        double r = std::max(std::abs(knots[0]), std::abs(knots[knots.size() - 1]));
        while (raw(r) - emin < drop || raw(-r) - emin < drop) r *= 1.5;
        return r;
    };
    data->radius80 = radius_for(80.0);
    const double r = data->radius80;

    const auto expe = [&](double x) { return std::exp(-(raw(x) - emin)); };
    const double z0 = integrate_refined(expe, -r, r, 1e-10, 4000, 4);
    if (!(z0 > 0) || !std::isfinite(z0))
        throw DomainError("ScalarDistribution::custom: energy table does not normalize");
    const double log_z = std::log(z0) - emin;  // density = exp(-(raw + log_z))
    data->energy = raw.shifted(log_z);

    const auto dens = [&](double x) { return std::exp(-(raw(x) - emin)) / z0; };
    const double m2 =
        integrate_refined([&](double x) { return x * x * dens(x); }, -r, r, 1e-9, 4000, 4);
    const double mean = integrate_refined([&](double x) { return x * dens(x); }, -r, r, 1e-9,
                                          4000, 4, 4, {}, std::sqrt(m2));
    data->variance =
        integrate_refined([&](double x) { return (x - mean) * (x - mean) * dens(x); }, -r, r,
                          1e-9, 4000, 4);
    data->scale_hint = 0.5 * std::sqrt(data->variance);

    // Sampling table: cumulative density on a fine uniform grid.
    const int ncdf = 4096;
    data->cdf_x.resize(ncdf + 1);
    data->cdf_p.resize(ncdf + 1);
    const double h = 2.0 * r / ncdf;
    const QuadRule cell = gauss_legendre(4);
    double acc = 0;
    data->cdf_x[0] = -r;
    data->cdf_p[0] = 0;
    for (int i = 0; i < ncdf; ++i) {
        const double lo = -r + i * h;
        for (Eigen::Index k = 0; k < cell.size(); ++k)
            acc += 0.5 * h * cell.w[k] * dens(lo + 0.5 * h * (1.0 + cell.x[k]));
        data->cdf_x[i + 1] = lo + h;
        data->cdf_p[i + 1] = acc;
    }
    data->cdf_p /= acc;

    ScalarDistribution d(Family::Custom, 1.0);
    d.custom_ = std::move(data);
    return d;
}

double ScalarDistribution::log_density(double x) const {
    if (!std::isfinite(x)) throw DomainError("density: non-finite x");
    switch (family_) {
        case Family::Gaussian:
            return -0.5 * x * x / (scale_ * scale_) - std::log(scale_) - 0.5 * kLog2Pi;
        case Family::Laplacian:
            return -std::abs(x) / scale_ - std::log(2.0 * scale_);
        case Family::Custom:
            return -custom_->energy(x);
    }
    return 0;
}

double ScalarDistribution::density(double x) const { return std::exp(log_density(x)); }

double ScalarDistribution::energy(double x) const { return -log_density(x); }

double ScalarDistribution::score(double x) const {
    switch (family_) {
        case Family::Gaussian: return -x / (scale_ * scale_);
        case Family::Laplacian: return x > 0 ? -1.0 / scale_ : (x < 0 ? 1.0 / scale_ : 0.0);
        case Family::Custom: {
            const auto sg = custom_->energy.subgradient(x);
            return -0.5 * (sg.first + sg.second);
        }
    }
    return 0;
}

double ScalarDistribution::variance() const {
    switch (family_) {
        case Family::Gaussian: return scale_ * scale_;
        case Family::Laplacian: return 2.0 * scale_ * scale_;
        case Family::Custom: return custom_->variance;
    }
    return 0;
}

double ScalarDistribution::fisher_information() const {
    if (family_ == Family::Gaussian) return 1.0 / (scale_ * scale_);
    const double r = support_radius(80.0);
    std::vector<double> breaks;
    if (family_ == Family::Laplacian) breaks.push_back(0.0);
    try {
        return integrate_refined(
            [&](double x) {
                const double s = score(x);
                return s * s * density(x);
            },
            -r, r, 1e-8, 4000, 4, 5, breaks);
    } catch (const NumericalError& e) {
        throw NumericalError(std::string("fisher_information: ") + e.what());
    }
}

double ScalarDistribution::sample(Rng& rng) const {
    switch (family_) {
        case Family::Gaussian: return scale_ * rng.normal();
        case Family::Laplacian: return rng.laplace(scale_);
        case Family::Custom: {
            const double u = rng.uniform();
            const auto& p = custom_->cdf_p;
            const auto& xs = custom_->cdf_x;
            Eigen::Index lo = 0, hi = p.size() - 1;
            while (lo + 1 < hi) {
                const Eigen::Index mid = (lo + hi) / 2;
                if (p[mid] <= u)
                    lo = mid;
                else
                    hi = mid;
            }
            const double span = p[hi] - p[lo];
            const double f = span > 0 ? (u - p[lo]) / span : 0.5;
            return xs[lo] + f * (xs[hi] - xs[lo]);
        }
    }
    return 0;
}

Eigen::ArrayXd ScalarDistribution::sample(std::uint64_t seed, Eigen::Index n) const {
    if (n < 1) throw DomainError("sample: n must be >= 1");
    Rng rng(seed);
    Eigen::ArrayXd out(n);
    for (Eigen::Index i = 0; i < n; ++i) out[i] = sample(rng);
    return out;
}

TabulatedConvexFunction ScalarDistribution::energy_function() const {
    switch (family_) {
        case Family::Gaussian:
            return TabulatedConvexFunction::quadratic(1.0 / (scale_ * scale_));
        case Family::Laplacian:
            return TabulatedConvexFunction::absolute_value(1.0 / scale_);
        case Family::Custom:
            return custom_->energy;
    }
    return TabulatedConvexFunction::zero();
}

double ScalarDistribution::support_radius(double drop) const {
    switch (family_) {
        case Family::Gaussian: return scale_ * std::sqrt(2.0 * drop);
        case Family::Laplacian: return scale_ * drop;
        case Family::Custom: {
            if (drop <= 80.0) return custom_->radius80;
            double r = custom_->radius80;
            const double emin = custom_->energy.min_value();
            while (custom_->energy(r) - emin < drop || custom_->energy(-r) - emin < drop)
                r *= 1.5;
            return r;
        }
    }
    return 0;
}

double ScalarDistribution::smoothness_scale() const {
    switch (family_) {
        case Family::Gaussian: return scale_;
        case Family::Laplacian: return scale_;
        case Family::Custom: return custom_->scale_hint;
    }
    return 1.0;
}

double ScalarDistribution::max_energy_slope() const {
    switch (family_) {
        case Family::Gaussian: return support_radius(80.0) / (scale_ * scale_);
        case Family::Laplacian: return 1.0 / scale_;
        case Family::Custom: {
            const double r = support_radius(80.0);
            return std::max(std::abs(custom_->energy.derivative(-r)),
                            std::abs(custom_->energy.derivative(r)));
        }
    }
    return 1.0;
}

double ScalarDistribution::tilt_center(double q, double x) const {
    switch (family_) {
        case Family::Gaussian: {
            const double v = scale_ * scale_;
            return x * v / (v + q);
        }
        case Family::Laplacian: {
            const double shift = q / scale_;
            if (x > shift) return x - shift;
            if (x < -shift) return x + shift;
            return 0.0;
        }
        case Family::Custom:
            return custom_->energy.prox(q, x);
    }
    return x;
}

ScalarDistribution ScalarDistribution::rescaled(double factor) const {
    if (!(factor > 0) || !std::isfinite(factor))
        throw DomainError("rescaled: factor must be positive");
    switch (family_) {
        case Family::Gaussian: return gaussian(scale_ * factor);
        case Family::Laplacian: return laplacian(scale_ * factor);
        case Family::Custom:
            return custom(custom_->raw_knots * factor, custom_->raw_energy);
    }
    return *this;
}

nlohmann::json ScalarDistribution::to_json() const {
    nlohmann::json j;
    switch (family_) {
        case Family::Gaussian:
            j["family"] = "gaussian";
            j["scale"] = scale_;
            break;
        case Family::Laplacian:
            j["family"] = "laplacian";
            j["scale"] = scale_;
            break;
        case Family::Custom: {
            j["family"] = "custom";
            nlohmann::json grid = nlohmann::json::array();
            for (Eigen::Index i = 0; i < custom_->raw_knots.size(); ++i)
                grid.push_back({custom_->raw_knots[i], custom_->raw_energy[i]});
            j["energy_grid"] = std::move(grid);
            break;
        }
    }
    return j;
}

ScalarDistribution ScalarDistribution::from_json(const nlohmann::json& j) {
    const std::string family = j.at("family").get<std::string>();
    if (family == "gaussian") return gaussian(j.at("scale").get<double>());
    if (family == "laplacian") return laplacian(j.at("scale").get<double>());
    if (family == "custom") {
        const auto& grid = j.at("energy_grid");
        Eigen::ArrayXd k(grid.size()), e(grid.size());
        for (std::size_t i = 0; i < grid.size(); ++i) {
            k[static_cast<Eigen::Index>(i)] = grid[i].at(0).get<double>();
            e[static_cast<Eigen::Index>(i)] = grid[i].at(1).get<double>();
        }
        return custom(k, e);
    }
    throw ConfigError("ScalarDistribution::from_json: unknown family '" + family + "'");
}

}  // namespace hidim
