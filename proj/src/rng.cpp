#include "hidim/rng.hpp"

#include <cmath>

namespace hidim {

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
}

double Rng::laplace(double b) {
    const double u = uniform() - 0.5;
    const double s = (u >= 0.0) ? 1.0 : -1.0;
    return -b * s * std::log1p(-2.0 * std::abs(u));
}

Eigen::ArrayXd Rng::normal_array(Eigen::Index n) {
    Eigen::ArrayXd out(n);
    for (Eigen::Index i = 0; i < n; ++i) out[i] = normal();
    return out;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
    // One splitmix64 scramble of the combined words; avoids correlated streams
    // for adjacent indices.
    std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace hidim
