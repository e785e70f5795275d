#pragma once

#include <Eigen/Core>
#include <cstdint>

namespace hidim {

/// Deterministic pseudo-random stream built on splitmix64.
///
/// All samplers in the library draw through this class so that a given seed
/// produces bit-identical output on every platform, which std:: distribution
/// adaptors do not guarantee.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform on (0, 1); never returns 0 or 1.
    double uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller, one spare cached.
    double normal();

    /// Zero-mean Laplacian with scale b (variance 2 b^2).
    double laplace(double b);

    Eigen::ArrayXd normal_array(Eigen::Index n);

  private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Stable derivation of per-trial seeds from a base seed and a trial index.
/// Independent of thread scheduling and of the order trials are launched in.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

}  // namespace hidim
