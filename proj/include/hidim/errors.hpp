#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace hidim {

/// Invalid argument or precondition violation (bad q, alpha out of range, ...).
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

/// A quadrature or linear-algebra routine failed to reach its tolerance.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A function that must be convex is not, beyond the repairable tolerance.
/// Carries the abscissa range where the violation was detected.
struct ConvexityError : std::runtime_error {
    ConvexityError(const std::string& what, double lo, double hi)
        : std::runtime_error(what), region_lo(lo), region_hi(hi) {}
    double region_lo = 0;
    double region_hi = 0;
};

/// An iterative solver hit its iteration cap. Carries the iterate trace.
struct ConvergenceError : std::runtime_error {
    ConvergenceError(const std::string& what, std::vector<double> trace_in)
        : std::runtime_error(what), trace(std::move(trace_in)) {}
    std::vector<double> trace;
};

/// Malformed or inconsistent configuration input.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace hidim
