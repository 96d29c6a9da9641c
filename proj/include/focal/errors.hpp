#pragma once

#include <stdexcept>
#include <string>

namespace focal {

/// Thrown when an iterative solver exhausts its budget before reaching
/// the requested tolerance. Carries the last residual so callers can
/// decide whether the partial answer is still usable.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, double residual, long iterations)
        : std::runtime_error(what + " (residual " + std::to_string(residual) +
                             " after " + std::to_string(iterations) + " iterations)"),
          residual_(residual),
          iterations_(iterations) {}

    double residual() const noexcept { return residual_; }
    long iterations() const noexcept { return iterations_; }

private:
    double residual_;
    long iterations_;
};

}  // namespace focal
