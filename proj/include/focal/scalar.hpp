#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>

#include "focal/errors.hpp"
#include "focal/lambert.hpp"

// Scalar calculus of the focal loss
//
//     L_g(p) = (1-p)^g * log(1/p),   p in (0,1], g >= 0,
//
// together with its first two derivatives, the inverse of the first
// derivative, and the weight function phi(p) = -p * L_g'(p) whose peak
// location drives the regime analysis downstream. Natural logarithms
// throughout.

namespace focal {

/// Focusing parameter. Non-negative and finite; zero recovers log-loss.
class FocusParam {
public:
    explicit FocusParam(double gamma) : gamma_(gamma) {
        if (!(std::isfinite(gamma) && gamma >= 0.0)) {
            throw std::domain_error("FocusParam: gamma must be finite and >= 0");
        }
    }
    double value() const noexcept { return gamma_; }

private:
    double gamma_;
};

/// A probability in (0,1]. Zero is rejected; the loss diverges there.
class Prob {
public:
    explicit Prob(double p) : p_(p) {
        if (!(std::isfinite(p) && p > 0.0 && p <= 1.0)) {
            throw std::domain_error("Prob: value must lie in (0,1]");
        }
    }
    double value() const noexcept { return p_; }

private:
    double p_;
};

namespace detail {

// log(1/p). Above 1/2 the difference p - 1 is exact and log1p keeps the
// p -> 1 tail precise; below 1/2 a plain log avoids the cancellation that
// forming 1 - p would cost small p.
inline double log_inv(double p) { return p >= 0.5 ? -std::log1p(p - 1.0) : -std::log(p); }

inline void require_open_unit(double p, const char* who) {
    if (!(std::isfinite(p) && p > 0.0 && p < 1.0)) {
        throw std::domain_error(std::string(who) + ": p must lie in (0,1)");
    }
}

}  // namespace detail

/// L_g(p) = (1-p)^g * log(1/p). Returns 0 exactly at p = 1.
inline double focal_loss(FocusParam gamma, Prob p) {
    double pv = p.value();
    if (pv == 1.0) return 0.0;
    return std::pow(1.0 - pv, gamma.value()) * detail::log_inv(pv);
}

/// First derivative d/dp L_g(p) = -(1-p)^(g-1) (g log(1/p) + (1-p)/p).
/// Strictly negative on (0,1); rejects both endpoints.
inline double focal_loss_d1(FocusParam gamma, Prob p) {
    double pv = p.value();
    detail::require_open_unit(pv, "focal_loss_d1");
    double g = gamma.value();
    if (g == 0.0) return -1.0 / pv;
    double d = 1.0 - pv;
    double lg = detail::log_inv(pv);
    // Factored as -(1-p)^g * (g*log(1/p)/(1-p) + 1/p) so the power stays
    // bounded for g < 1 as p -> 1.
    return -std::pow(d, g) * (g * lg / d + 1.0 / pv);
}

/// log(-L_g'(p)). Stays finite at focusing strengths where the power in
/// focal_loss_d1 itself would underflow to zero.
inline double focal_loss_d1_log_abs(FocusParam gamma, Prob p) {
    double pv = p.value();
    detail::require_open_unit(pv, "focal_loss_d1_log_abs");
    double g = gamma.value();
    if (g == 0.0) return detail::log_inv(pv);
    double d = 1.0 - pv;
    double lg = detail::log_inv(pv);
    return g * std::log(d) + std::log(g * lg / d + 1.0 / pv);
}

/// Second derivative; strictly positive on (0,1) for every g >= 0.
inline double focal_loss_d2(FocusParam gamma, Prob p) {
    double pv = p.value();
    detail::require_open_unit(pv, "focal_loss_d2");
    double g = gamma.value();
    if (g == 0.0) return 1.0 / (pv * pv);
    double d = 1.0 - pv;
    double lg = detail::log_inv(pv);
    double bracket = -g * (1.0 - g) * pv * pv * lg + 2.0 * g * pv * d + d * d;
    if (d > 1e-12) {
        return std::pow(d, g - 2.0) * bracket / (pv * pv);
    }
    // Log-space fallback where (1-p)^(g-2) and d^2 would over/underflow.
    return std::exp((g - 2.0) * std::log(d) + std::log(bracket) - 2.0 * std::log(pv));
}

/// phi(p) = -p * L_g'(p) = (1-p)^(g-1) (g p log(1/p) + (1-p)).
/// Continuously extended with phi(1) = 0 for g > 0; identically 1 at g = 0.
inline double phi(FocusParam gamma, double p) {
    if (!(std::isfinite(p) && p > 0.0 && p <= 1.0)) {
        throw std::domain_error("phi: p must lie in (0,1]");
    }
    double g = gamma.value();
    if (g == 0.0) return 1.0;
    if (p == 1.0) return 0.0;
    double d = 1.0 - p;
    double lg = detail::log_inv(p);
    return std::pow(d, g) * (g * p * lg / d + 1.0);
}

/// kappa(p) = 1/p - 2(1-p)/(p log(1/p)); strictly decreasing, +inf at 0+,
/// -1 at 1-. Inputs below 1e-300 are clamped to keep the limit printable.
inline double kappa(double p) {
    if (!(std::isfinite(p) && p > 0.0 && p < 1.0)) {
        throw std::domain_error("kappa: p must lie in (0,1)");
    }
    if (p < 1e-300) p = 1e-300;
    double d = 1.0 - p;
    double lg = detail::log_inv(p);
    return 1.0 / p - 2.0 * d / (p * lg);
}

/// Location and value of the maximum of phi over (0,1).
struct PhiPeak {
    std::optional<double> p_plus;  // empty at g = 0 where phi is constant
    double phi_max = 1.0;
};

namespace detail {

// w = -W0(-2/e^2)/2, the unique root of kappa in (0,1).
inline double kappa_root() {
    static const double w = -0.5 * lambert_w0(-2.0 * std::exp(-2.0));
    return w;
}

}  // namespace detail

/// Solves kappa(p) = gamma for the peak location p_plus of phi, then
/// evaluates the peak. kappa is strictly decreasing, so plain bisection
/// on a log grid suffices.
inline PhiPeak phi_peak(FocusParam gamma) {
    double g = gamma.value();
    if (g == 0.0) return PhiPeak{std::nullopt, 1.0};

    double hi = detail::kappa_root();  // kappa(hi) = 0 <= g
    double lo = hi * 1e-3;
    int guard = 0;
    while (kappa(lo) < g) {
        lo *= 1e-3;
        if (++guard > 120) throw ConvergenceError("phi_peak: no bracket", g, guard);
    }
    double ulo = std::log(lo), uhi = std::log(hi);
    while (uhi - ulo > 1e-13) {
        double um = 0.5 * (ulo + uhi);
        if (kappa(std::exp(um)) >= g) {
            ulo = um;
        } else {
            uhi = um;
        }
    }
    double p_plus = std::exp(0.5 * (ulo + uhi));
    return PhiPeak{p_plus, phi(gamma, p_plus)};
}

/// Inverse of p -> log(-L_g'(p)) for g > 0. That map decreases strictly
/// from +inf at 0+ to -inf at 1-, so every real value has one preimage.
/// Safeguarded Newton in u = log p; the log-derivative cancels the
/// (1-p)^g factors, so the iteration is immune to the over/underflow that
/// rules out solving L_g'(p) = t directly at extreme focusing strengths.
/// Roots closer than 1e-15 to either endpoint are clamped to the edge.
inline double focal_d1_inverse_log(FocusParam gamma, double log_abs_t) {
    double g = gamma.value();
    if (!(g > 0.0)) {
        throw std::domain_error("focal_d1_inverse_log: gamma must be positive");
    }
    if (!std::isfinite(log_abs_t)) {
        throw std::domain_error("focal_d1_inverse_log: log|t| must be finite");
    }

    auto psi = [g](double p) { return focal_loss_d1_log_abs(FocusParam{g}, Prob{p}); };

    double ulo = std::log(1e-15);
    double uhi = std::log1p(-1e-15);
    if (psi(std::exp(uhi)) > log_abs_t) return std::exp(uhi);
    while (psi(std::exp(ulo)) < log_abs_t) {
        if (ulo <= -690.0) return std::exp(ulo);
        ulo = std::fmax(ulo * 2.0, -690.5);
    }

    double u = 0.5 * (ulo + uhi);
    double best_u = u;
    double best_absf = HUGE_VAL;
    for (int it = 0; it < 200; ++it) {
        double p = std::exp(u);
        double f = psi(p) - log_abs_t;
        if (f == 0.0) return p;
        if (std::fabs(f) < best_absf) {
            best_absf = std::fabs(f);
            best_u = u;
        }
        if (f > 0.0) {
            ulo = u;
        } else {
            uhi = u;
        }
        if (uhi - ulo <= 1e-14) break;
        double d = 1.0 - p;
        double lg = detail::log_inv(p);
        double bracket = -g * (1.0 - g) * p * p * lg + 2.0 * g * p * d + d * d;
        double dpsi = -bracket / (d * (g * p * lg + d));
        double unext = u - f / dpsi;
        // Doubles in u oversample p near 1, so a Newton step too small to
        // move exp(u) means p already sits within one ulp of the root;
        // iterating further would creep along u without ever changing f.
        if (std::exp(unext) == p) return p;
        // A vanishing Newton increment at a bracket edge would loop in
        // place; the midpoint fallback keeps the width shrinking.
        if (!(unext > ulo && unext < uhi) || unext == u) unext = 0.5 * (ulo + uhi);
        u = unext;
    }
    if (uhi - ulo <= 1e-14) return std::exp(0.5 * (ulo + uhi));
    return std::exp(best_u);
}

/// Inverse of focal_loss_d1 in its second argument: the unique p in (0,1)
/// with L_g'(p) = t, for t < 0. Closed forms at g = 0 (p = -1/t, needs
/// t < -1) and g = 1 (p = 1/W0(e^(1-t))); every other g delegates to the
/// log-space solver.
inline double focal_d1_inverse(FocusParam gamma, double t) {
    if (!(std::isfinite(t) && t < 0.0)) {
        throw std::domain_error("focal_d1_inverse: t must be finite and negative");
    }
    double g = gamma.value();
    if (g == 0.0) {
        if (t >= -1.0) {
            throw std::domain_error("focal_d1_inverse: gamma=0 requires t < -1");
        }
        return -1.0 / t;
    }
    if (g == 1.0) {
        return 1.0 / detail::lambert_w0_of_exp(1.0 - t);
    }
    return focal_d1_inverse_log(gamma, std::log(-t));
}

}  // namespace focal
