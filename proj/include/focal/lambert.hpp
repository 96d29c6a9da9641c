#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

#include "focal/errors.hpp"

// Real branches of the Lambert W function, the inverse of w -> w * exp(w).
// W0 covers [-1/e, inf), W-1 covers [-1/e, 0). Both use a branch-appropriate
// initial guess followed by Halley (W0) or log-form Newton (W-1) refinement.

namespace focal {

namespace detail {

inline constexpr double kNegInvE = -0.36787944117144233;

// Series expansion about the branch point x = -1/e, shared by both branches.
// p is +sqrt(2(e*x+1)) on the principal branch and -sqrt(...) on the lower one.
inline double branch_point_series(double p) {
    return -1.0 + p * (1.0 + p * (-1.0 / 3.0 + p * (11.0 / 72.0)));
}

inline void check_residual(double w, double x, const char* who) {
    double r = w * std::exp(w) - x;
    double scale = std::fmax(std::fabs(x), std::numeric_limits<double>::min());
    if (!(std::fabs(r) <= 1e-13 * scale + 1e-300)) {
        throw ConvergenceError(who, std::fabs(r), 0);
    }
}

}  // namespace detail

/// Principal branch W0(x) for x >= -1/e.
inline double lambert_w0(double x) {
    using detail::kNegInvE;
    if (!std::isfinite(x)) throw std::domain_error("lambert_w0: non-finite argument");
    if (x < kNegInvE) {
        if (kNegInvE - x > 1e-15) throw std::domain_error("lambert_w0: argument below -1/e");
        x = kNegInvE;
    }
    if (x == 0.0) return 0.0;

    double w;
    if (x < -0.3) {
        double p = std::sqrt(std::fmax(0.0, 2.0 * (std::exp(1.0) * x + 1.0)));
        w = detail::branch_point_series(p);
    } else if (x < 1.0) {
        w = x;
    } else {
        w = std::log(x);
        if (w > 1.0) w -= std::log(w);
    }

    for (int it = 0; it < 50; ++it) {
        double ew = std::exp(w);
        double f = w * ew - x;
        double fp = (w + 1.0) * ew;
        if (fp == 0.0) break;
        // Halley update; the quadratic correction keeps the branch-point
        // region from stalling.
        double step = f / (fp - f * (w + 2.0) / (2.0 * (w + 1.0)));
        if (!std::isfinite(step)) step = f / fp;
        w -= step;
        if (w < -1.0) w = -1.0;
        if (std::fabs(step) <= 1e-16 * (1.0 + std::fabs(w))) break;
    }
    detail::check_residual(w, x, "lambert_w0");
    return w;
}

/// Lower branch W-1(x) for x in [-1/e, 0).
inline double lambert_wm1(double x) {
    using detail::kNegInvE;
    if (!std::isfinite(x)) throw std::domain_error("lambert_wm1: non-finite argument");
    if (x >= 0.0) throw std::domain_error("lambert_wm1: argument must be negative");
    if (x < kNegInvE) {
        if (kNegInvE - x > 1e-15) throw std::domain_error("lambert_wm1: argument below -1/e");
        x = kNegInvE;
    }
    if (x - kNegInvE < 4e-17) return -1.0;

    double w;
    if (x < -0.27) {
        double p = -std::sqrt(std::fmax(0.0, 2.0 * (std::exp(1.0) * x + 1.0)));
        w = detail::branch_point_series(p);
        if (w >= -1.0) w = -1.0 - 1e-12;
    } else {
        double l1 = std::log(-x);
        double l2 = std::log(-l1);
        w = l1 - l2 + l2 / l1;
    }

    // Newton on g(w) = w + log(-w) - log(-x); g is increasing for w < -1 and
    // stays well conditioned as x -> 0- where exp(w) underflows.
    double target = std::log(-x);
    for (int it = 0; it < 60; ++it) {
        double g = w + std::log(-w) - target;
        double step = g * w / (w + 1.0);
        if (!std::isfinite(step)) break;
        double next = w - step;
        if (next >= -1.0) next = 0.5 * (w - 1.0);
        w = next;
        if (std::fabs(step) <= 1e-16 * std::fabs(w)) break;
    }
    detail::check_residual(w, x, "lambert_wm1");
    return w;
}

namespace detail {

/// W0(exp(z)) without forming exp(z); needed once z exceeds the overflow
/// threshold of double. Solves W + log W = z.
inline double lambert_w0_of_exp(double z) {
    if (z <= 30.0) return lambert_w0(std::exp(z));
    double w = z - std::log(z);
    for (int it = 0; it < 30; ++it) {
        double h = w + std::log(w) - z;
        double step = h * w / (w + 1.0);
        w -= step;
        if (std::fabs(step) <= 1e-16 * w) break;
    }
    return w;
}

}  // namespace detail

}  // namespace focal
