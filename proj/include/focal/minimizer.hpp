#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "focal/errors.hpp"
#include "focal/pmf.hpp"
#include "focal/scalar.hpp"

// The focal-entropy minimizer. For a fixed target distribution p and
// focusing parameter g, the unique minimizer of q -> H_g(p, q) is
//
//     P*(x) = inv_d1(-alpha / p(x))   on the support of p,
//
// where inv_d1 is the inverse of the loss derivative and alpha > 0 is the
// root of the normalization function F(alpha) = sum_x inv_d1(-alpha/p(x)) = 1.
// This header provides F, provable alpha brackets, the root solve, the
// closed-form inverse operator, the recursion experiment, the large-g
// asymptotic for alpha, and an independent brute-force minimizer used as a
// cross-checking oracle.

namespace focal {

struct MinimizerResult {
    Pmf p_star;
    double alpha_star;
    double residual;    // |F(alpha_star) - 1|
    long iterations;    // outer bisection steps
    double bracket_lo;
    double bracket_hi;
};

/// Brackets for the normalization root. The box [box_lo, box_hi] always
/// contains alpha_star; the phi interval applies only when the whole
/// support sits on one side of phi's peak.
struct AlphaBounds {
    double c_n_gamma;       // -L_g'(1/N)
    double box_lo;          // p_min * c_n_gamma
    double box_hi;          // p_max * c_n_gamma
    bool all_above_peak;    // gamma > kappa(p_min): phi(p_max) <= alpha* <= phi(p_min)
    bool all_below_peak;    // gamma < kappa(p_max): phi(p_min) <  alpha* <  phi(p_max)
    std::optional<double> phi_lo;
    std::optional<double> phi_hi;
    double cap;             // max phi <= 1 + gamma
};

/// F parametrized by log alpha. At strong focusing alpha itself can sit
/// below the smallest subnormal while F stays perfectly well behaved, so
/// the whole normalization search runs on this scale.
inline double normalization_F_log(FocusParam gamma, const Pmf& p, double log_alpha) {
    if (!std::isfinite(log_alpha)) {
        throw std::domain_error("normalization_F: alpha must be positive");
    }
    double s = 0.0;
    for (std::size_t i : p.support()) {
        s += focal_d1_inverse_log(gamma, log_alpha - std::log(p.prob(i)));
    }
    return s;
}

/// F(alpha) = sum over the support of inv_d1(-alpha/p(x)). Strictly
/// decreasing, from |S| at alpha -> 0+ down to 0.
inline double normalization_F(FocusParam gamma, const Pmf& p, double alpha) {
    if (!(std::isfinite(alpha) && alpha > 0.0)) {
        throw std::domain_error("normalization_F: alpha must be positive");
    }
    if (gamma.value() == 0.0) {
        double s = 0.0;
        for (std::size_t i : p.support()) {
            s += focal_d1_inverse(gamma, -alpha / p.prob(i));
        }
        return s;
    }
    return normalization_F_log(gamma, p, std::log(alpha));
}

inline AlphaBounds alpha_bounds(FocusParam gamma, const Pmf& p) {
    double n = static_cast<double>(p.support_size());
    double c = std::exp(focal_loss_d1_log_abs(gamma, Prob{1.0 / n}));
    AlphaBounds b{};
    b.c_n_gamma = c;
    b.box_lo = p.p_min() * c;
    b.box_hi = p.p_max() * c;
    b.cap = phi_peak(gamma).phi_max;
    double g = gamma.value();
    b.all_above_peak = p.p_min() < 1.0 && g > kappa(p.p_min());
    b.all_below_peak = p.p_max() < 1.0 && g < kappa(p.p_max());
    if (b.all_above_peak) {
        b.phi_lo = phi(gamma, p.p_max());
        b.phi_hi = phi(gamma, p.p_min());
    } else if (b.all_below_peak) {
        b.phi_lo = phi(gamma, p.p_min());
        b.phi_hi = phi(gamma, p.p_max());
    }
    return b;
}

/// Solves F(alpha) = 1 by plain bisection inside the provable box,
/// expanding geometrically in the rare case rounding pushes the root past
/// a box edge, then assembles P* and renormalizes the residual mass.
/// gamma = 0 short-circuits to the identity (alpha = 1); a point-mass
/// support reports the degenerate boundary value alpha = 0.
inline MinimizerResult solve_minimizer(FocusParam gamma, const Pmf& p) {
    if (gamma.value() == 0.0) {
        return MinimizerResult{p, 1.0, 0.0, 0, 1.0, 1.0};
    }
    if (p.support_size() == 1) {
        return MinimizerResult{p, 0.0, 0.0, 0, 0.0, 0.0};
    }

    // The provable box [p_min c, p_max c] on the log scale, where the
    // search stays finite even when alpha itself underflows a double.
    double lc = focal_loss_d1_log_abs(gamma, Prob{1.0 / static_cast<double>(p.support_size())});
    double blo = std::log(p.p_min()) + lc;
    double bhi = std::log(p.p_max()) + lc;
    auto F = [&](double b) { return normalization_F_log(gamma, p, b); };

    const double step = std::log(4.0);
    int expansions = 0;
    while (F(blo) < 1.0) {
        blo -= step;
        if (++expansions > 60) throw ConvergenceError("solve_minimizer: no lower bracket", F(blo) - 1.0, expansions);
    }
    while (F(bhi) > 1.0) {
        bhi += step;
        if (++expansions > 60) throw ConvergenceError("solve_minimizer: no upper bracket", F(bhi) - 1.0, expansions);
    }

    // Bisect log alpha to width 1e-14, i.e. relative width 1e-14 in alpha.
    // F can be extremely flat in alpha at large gamma, so a residual-only
    // stop would leave alpha with several digits of slack; the width stop
    // pins it regardless of conditioning.
    double beta = 0.5 * (blo + bhi);
    long iterations = 0;
    while (bhi - blo > 1e-14 && iterations < 200) {
        if (F(beta) > 1.0) {
            blo = beta;
        } else {
            bhi = beta;
        }
        beta = 0.5 * (blo + bhi);
        ++iterations;
    }
    double residual = std::fabs(F(beta) - 1.0);
    if (residual > 1e-10) {
        throw ConvergenceError("solve_minimizer: bisection stalled", residual, iterations);
    }

    std::vector<double> star(p.size(), 0.0);
    double sum = 0.0;
    for (std::size_t i : p.support()) {
        star[i] = focal_d1_inverse_log(gamma, beta - std::log(p.prob(i)));
        sum += star[i];
    }
    for (double& v : star) v /= sum;
    return MinimizerResult{Pmf(p.labels(), star), std::exp(beta), residual, iterations,
                           std::exp(blo), std::exp(bhi)};
}

/// Recovers the unique p whose minimizer is p_star:
/// p(x) = beta / L_g'(p_star(x)) with beta normalizing the sum to 1.
inline Pmf inverse_operator(FocusParam gamma, const Pmf& p_star) {
    if (gamma.value() == 0.0) return p_star;
    std::vector<double> inv(p_star.size(), 0.0);
    double sum = 0.0;
    for (std::size_t i : p_star.support()) {
        double v = p_star.prob(i);
        if (v >= 1.0) {
            throw std::domain_error("inverse_operator: entry at 1 is degenerate");
        }
        inv[i] = 1.0 / focal_loss_d1(gamma, Prob{v});
        sum += inv[i];
    }
    // beta = 1/sum is negative, as is each derivative, so entries are positive.
    for (double& v : inv) v /= sum;
    return Pmf(p_star.labels(), inv);
}

/// Iterates the minimizer from p0 and returns the trajectory
/// [p_1, ..., p_steps]. The map is not idempotent: successive iterates
/// keep moving for non-uniform input and gamma > 0.
inline std::vector<Pmf> recurse_minimizer(FocusParam gamma, const Pmf& p0, int steps) {
    if (steps < 1) throw std::invalid_argument("recurse_minimizer: steps must be >= 1");
    std::vector<Pmf> out;
    out.reserve(static_cast<std::size_t>(steps));
    Pmf cur = p0;
    for (int k = 0; k < steps; ++k) {
        cur = solve_minimizer(gamma, cur).p_star;
        out.push_back(cur);
    }
    return out;
}

/// Large-gamma approximation alpha* ~ -L_g'(1/|S|) * harmonic_mean(p).
inline double alpha_asymptotic(FocusParam gamma, const Pmf& p) {
    if (!(gamma.value() > 0.0)) {
        throw std::domain_error("alpha_asymptotic: gamma must be positive");
    }
    double n = static_cast<double>(p.support_size());
    return -focal_loss_d1(gamma, Prob{1.0 / n}) * harmonic_mean(p);
}

struct BruteForceOptions {
    enum class Mode { lattice, descent };
    Mode mode = Mode::descent;
    int resolution = 60;          // lattice mode
    long max_iterations = 500000; // descent mode
    double stationarity = 1e-8;   // descent mode
};

namespace detail {

// H_g(p, q) evaluated directly from the definition; q given on the support
// index set of p. Used by the brute-force oracle so that it never touches
// the inverse/normalization machinery it cross-checks.
inline double focal_objective(double g, const std::vector<double>& psup, const std::vector<double>& qsup) {
    double h = 0.0;
    for (std::size_t i = 0; i < psup.size(); ++i) {
        h += psup[i] * std::pow(1.0 - qsup[i], g) * log_inv(qsup[i]);
    }
    return h;
}

inline Pmf lattice_minimize(FocusParam gamma, const Pmf& p, int resolution, long budget) {
    std::size_t n = p.support_size();
    if (n > 6) throw std::invalid_argument("brute_force_minimizer: lattice mode needs |S| <= 6");
    double g = gamma.value();
    std::vector<double> psup(n);
    for (std::size_t i = 0; i < n; ++i) psup[i] = p.prob(p.support()[i]);

    std::vector<int> counts(n);
    std::vector<double> q(n), best_q(n);
    double best_h = std::numeric_limits<double>::infinity();
    long visited = 0;

    // Enumerates compositions of `total` into n positive parts with
    // per-coordinate bounds, evaluating the objective at each cell.
    std::function<void(std::size_t, int, int, const std::vector<int>&, const std::vector<int>&)> walk =
        [&](std::size_t idx, int remaining, int denom, const std::vector<int>& lo, const std::vector<int>& hi) {
            if (++visited > budget) {
                throw ConvergenceError("brute_force_minimizer: lattice budget exhausted", best_h, visited);
            }
            if (idx + 1 == counts.size()) {
                if (remaining < lo[idx] || remaining > hi[idx]) return;
                counts[idx] = remaining;
                for (std::size_t i = 0; i < counts.size(); ++i) {
                    q[i] = static_cast<double>(counts[i]) / denom;
                }
                double h = focal_objective(g, psup, q);
                if (h < best_h) {
                    best_h = h;
                    best_q = q;
                }
                return;
            }
            int tail_lo = 0, tail_hi = 0;
            for (std::size_t j = idx + 1; j < counts.size(); ++j) {
                tail_lo += lo[j];
                tail_hi += hi[j];
            }
            int from = std::max(lo[idx], remaining - tail_hi);
            int to = std::min(hi[idx], remaining - tail_lo);
            for (int k = from; k <= to; ++k) {
                counts[idx] = k;
                walk(idx + 1, remaining - k, denom, lo, hi);
            }
        };

    std::vector<int> lo(n, 1), hi(n, resolution);
    walk(0, resolution, resolution, lo, hi);

    // One refinement pass: re-search the +-1 cell neighborhood of the best
    // point at resolution^2.
    std::vector<int> coarse(n);
    for (std::size_t i = 0; i < n; ++i) coarse[i] = static_cast<int>(std::lround(best_q[i] * resolution));
    int fine = resolution * resolution;
    for (std::size_t i = 0; i < n; ++i) {
        lo[i] = std::max(1, (coarse[i] - 1) * resolution);
        hi[i] = std::min(fine - 1, (coarse[i] + 1) * resolution);
    }
    walk(0, fine, fine, lo, hi);

    std::vector<double> full(p.size(), 0.0);
    for (std::size_t i = 0; i < n; ++i) full[p.support()[i]] = best_q[i];
    return Pmf(p.labels(), full);
}

inline double descent_stationarity(FocusParam gamma, const std::vector<double>& psup,
                                   const std::vector<double>& q, std::vector<double>& gvec) {
    double gbar = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        gvec[i] = psup[i] * focal_loss_d1(gamma, Prob{q[i]});
        gbar += q[i] * gvec[i];
    }
    double stat = 0.0;
    for (double v : gvec) stat = std::fmax(stat, std::fabs(v - gbar));
    return stat / std::fmax(std::fabs(gbar), 1e-300);
}

inline Pmf descent_minimize(FocusParam gamma, const Pmf& p, long max_iterations, double tol) {
    std::size_t n = p.support_size();
    double g = gamma.value();
    std::vector<double> psup(n), q(n), gvec(n), trial(n);
    for (std::size_t i = 0; i < n; ++i) {
        psup[i] = p.prob(p.support()[i]);
        q[i] = psup[i];
    }

    std::vector<double> full(p.size(), 0.0);
    if (n == 1) {
        full[p.support()[0]] = 1.0;
        return Pmf(p.labels(), full);
    }

    // Phase one: multiplicative (mirror) steps with backtracking, accepted
    // only on a strict objective decrease so rounding-flat moves cannot
    // wander. This only needs to reach the Newton basin.
    double h = focal_objective(g, psup, q);
    double eta = 1.0;
    double stat = descent_stationarity(gamma, psup, q, gvec);
    long phase1 = std::min<long>(max_iterations, 5000);
    for (long it = 0; it < phase1 && stat > 1e-3; ++it) {
        double gbar = 0.0;
        for (std::size_t i = 0; i < n; ++i) gbar += q[i] * gvec[i];
        bool accepted = false;
        for (int bt = 0; bt < 60; ++bt) {
            double z = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                double e = std::clamp(-eta * (gvec[i] - gbar), -50.0, 50.0);
                trial[i] = q[i] * std::exp(e);
                z += trial[i];
            }
            for (std::size_t i = 0; i < n; ++i) trial[i] /= z;
            double ht = focal_objective(g, psup, trial);
            if (ht < h) {
                q = trial;
                h = ht;
                eta *= 1.25;
                accepted = true;
                break;
            }
            eta *= 0.5;
        }
        if (!accepted) break;  // at the rounding floor of the objective
        stat = descent_stationarity(gamma, psup, q, gvec);
    }

    // Phase two: damped Newton on the first n-1 coordinates. The Hessian is
    // diag(p_i L'') + c 11^T with c = p_n L''(q_n), inverted in closed form,
    // and a step is accepted when it strictly shrinks the residual norm.
    std::vector<double> r(n - 1), dinv(n - 1), qn(n);
    auto residual_norm = [&](const std::vector<double>& x) {
        double tail = psup[n - 1] * focal_loss_d1(gamma, Prob{x[n - 1]});
        double m = 0.0;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            m = std::fmax(m, std::fabs(psup[i] * focal_loss_d1(gamma, Prob{x[i]}) - tail));
        }
        return m;
    };
    double rnorm = residual_norm(q);
    for (int it = 0; it < 200 && stat > tol; ++it) {
        double tail_d1 = psup[n - 1] * focal_loss_d1(gamma, Prob{q[n - 1]});
        double c = psup[n - 1] * focal_loss_d2(gamma, Prob{q[n - 1]});
        double sum_dr = 0.0, sum_d = 0.0;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            r[i] = psup[i] * focal_loss_d1(gamma, Prob{q[i]}) - tail_d1;
            dinv[i] = 1.0 / (psup[i] * focal_loss_d2(gamma, Prob{q[i]}));
            sum_dr += dinv[i] * r[i];
            sum_d += dinv[i];
        }
        double correction = c * sum_dr / (1.0 + c * sum_d);

        bool moved = false;
        for (double lambda = 1.0; lambda > 1e-12; lambda *= 0.5) {
            double tail = 1.0;
            bool feasible = true;
            for (std::size_t i = 0; i + 1 < n; ++i) {
                qn[i] = q[i] - lambda * dinv[i] * (r[i] - correction);
                if (!(qn[i] > 0.0 && qn[i] < 1.0)) {
                    feasible = false;
                    break;
                }
                tail -= qn[i];
            }
            if (!feasible || !(tail > 0.0 && tail < 1.0)) continue;
            qn[n - 1] = tail;
            double rn = residual_norm(qn);
            if (rn < rnorm) {
                q = qn;
                rnorm = rn;
                moved = true;
                break;
            }
        }
        if (!moved) break;  // residual at its rounding floor
        stat = descent_stationarity(gamma, psup, q, gvec);
    }

    if (stat > tol) {
        throw ConvergenceError("brute_force_minimizer: descent budget exhausted", stat, max_iterations);
    }

    for (std::size_t i = 0; i < n; ++i) full[p.support()[i]] = q[i];
    return Pmf(p.labels(), full);
}

}  // namespace detail

/// Minimizes H_g(p, .) without the inverse-derivative machinery: either an
/// exhaustive simplex-lattice search (refined once) or multiplicative
/// gradient descent run to gradient stationarity. Serves as the
/// independent oracle for solve_minimizer.
inline Pmf brute_force_minimizer(FocusParam gamma, const Pmf& p, const BruteForceOptions& opt = {}) {
    if (opt.mode == BruteForceOptions::Mode::lattice) {
        if (opt.resolution < 2) throw std::invalid_argument("brute_force_minimizer: resolution too small");
        return detail::lattice_minimize(gamma, p, opt.resolution, 20'000'000);
    }
    return detail::descent_minimize(gamma, p, opt.max_iterations, opt.stationarity);
}

/// Total variation distance, used by the oracle-equivalence checks.
inline double total_variation(const Pmf& a, const Pmf& b) {
    if (a.size() != b.size()) throw std::invalid_argument("total_variation: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::fabs(a.prob(i) - b.prob(i));
    return 0.5 * s;
}

}  // namespace focal
