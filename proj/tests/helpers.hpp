#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "focal/pmf.hpp"
#include "focal/rng.hpp"

namespace testutil {

// Random support-n pmf. A quarter of the draws are sharpened to produce
// small p_min instances; entries below 1e-7 are resampled so sweeps stay
// inside the numerically interesting band rather than the denormal tail.
inline focal::Pmf random_pmf(focal::Rng& rng, std::size_t n) {
    for (int attempt = 0; attempt < 100; ++attempt) {
        std::vector<double> v = rng.simplex(n);
        if (rng.unit() < 0.25) {
            double s = 0.0;
            for (double& x : v) {
                x *= x;
                s += x;
            }
            for (double& x : v) x /= s;
        }
        double lo = 1.0;
        for (double x : v) lo = std::fmin(lo, x);
        if (lo >= 1e-7) return focal::Pmf(v);
    }
    return focal::Pmf(std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

// Log-uniform focus parameter over [1e-2, 50].
inline double random_gamma(focal::Rng& rng) {
    return std::exp(std::log(0.01) + rng.unit() * (std::log(50.0) - std::log(0.01)));
}

}  // namespace testutil
