#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "focal/errors.hpp"
#include "focal/minimizer.hpp"
#include "focal/pmf.hpp"
#include "focal/scalar.hpp"

// Regime analysis: how the minimizer reshapes its input. The level set
// phi(p) = alpha* cuts (0,1) into three probability bands. Entries of p in
// the low band shrink further (over-suppression), entries in the middle
// band grow toward uniform (amplification), entries in the high band
// shrink (suppression). This header classifies inputs against those bands,
// evaluates the sufficient conditions that rule the low band out, provides
// the closed-form binary envelope, the large-gamma limit diagnostic, and
// the ternary-simplex scan used as evidence that the smallest entry never
// falls in the low band.

namespace focal {

enum class RegimeTag { over_suppressed, amplified, suppressed_high };

inline const char* to_string(RegimeTag t) {
    switch (t) {
        case RegimeTag::over_suppressed: return "OVER_SUPPRESSED";
        case RegimeTag::amplified: return "AMPLIFIED";
        case RegimeTag::suppressed_high: return "SUPPRESSED_HIGH";
    }
    return "?";
}

struct RegimeReport {
    std::vector<double> d;       // p_(i) - p*_(i) over descending support entries
    double p_gamma_a;            // low root of phi = alpha*, 0 when alpha* < 1
    double p_gamma_b;            // high root of phi = alpha*
    double p_plus;               // peak location of phi
    double alpha_star;
    std::vector<RegimeTag> tags; // aligned with d
    bool over_suppression;
    int sign_changes;            // of the zero-compressed d sequence
    bool majorizes_flag;         // p majorizes p*
};

struct PhiRoots {
    double p_a;
    double p_b;
};

/// Solves phi(gamma, p) = alpha_star on each side of the peak. The high
/// root always exists; the low root exists only when alpha_star >= 1
/// (phi tends to 1 at 0+), otherwise p_a = 0 by convention. The existence
/// test absorbs root-finder slack of 1e-12 in alpha_star.
inline PhiRoots phi_roots(FocusParam gamma, double alpha_star) {
    if (!(gamma.value() > 0.0)) {
        throw std::domain_error("phi_roots: gamma must be positive");
    }
    if (!(std::isfinite(alpha_star) && alpha_star > 0.0)) {
        throw std::domain_error("phi_roots: alpha_star must be positive");
    }
    PhiPeak peak = phi_peak(gamma);
    double pp = *peak.p_plus;
    if (alpha_star > peak.phi_max * (1.0 + 1e-9) + 1e-12) {
        throw std::invalid_argument("phi_roots: alpha_star exceeds the phi maximum");
    }
    double a = std::fmin(alpha_star, peak.phi_max);

    auto bisect = [&](double lo, double hi, bool increasing) {
        for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
            double mid = 0.5 * (lo + hi);
            bool below = phi(gamma, mid) < a;
            if (below == increasing) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        return 0.5 * (lo + hi);
    };

    PhiRoots roots{};
    roots.p_b = bisect(pp, 1.0 - 1e-16, false);
    roots.p_a = alpha_star >= 1.0 - 1e-12 ? bisect(1e-300, pp, true) : 0.0;
    return roots;
}

namespace detail {

inline std::vector<double> descending_values(const Pmf& p) {
    std::vector<double> v;
    v.reserve(p.support_size());
    for (std::size_t i : p.support()) v.push_back(p.prob(i));
    std::stable_sort(v.begin(), v.end(), std::greater<double>());
    return v;
}

inline int count_sign_changes(const std::vector<double>& d) {
    int changes = 0;
    int prev = 0;
    for (double v : d) {
        if (std::fabs(v) <= 1e-10) continue;
        int s = v > 0.0 ? 1 : -1;
        if (prev != 0 && s != prev) ++changes;
        prev = s;
    }
    return changes;
}

}  // namespace detail

/// Full regime classification of p under the minimizer at gamma > 0.
/// d and tags run over the descending-sorted support entries. Uniform
/// input is a fixed point: every entry sits exactly on the level set, so
/// d is all zeros and no over-suppression is reported. The flag requires
/// an entry strictly inside (0, p_a); boundary contact keeps the tag but
/// not the flag.
inline RegimeReport analyze(FocusParam gamma, const Pmf& p) {
    if (!(gamma.value() > 0.0)) {
        throw std::domain_error("analyze: gamma must be positive");
    }
    RegimeReport rep{};
    PhiPeak peak = phi_peak(gamma);
    rep.p_plus = *peak.p_plus;

    if (p.support_size() == 1) {
        rep.d = {0.0};
        rep.tags = {RegimeTag::suppressed_high};
        rep.p_gamma_a = 0.0;
        rep.p_gamma_b = 1.0;
        rep.alpha_star = 0.0;
        rep.over_suppression = false;
        rep.sign_changes = 0;
        rep.majorizes_flag = true;
        return rep;
    }

    MinimizerResult res = solve_minimizer(gamma, p);
    rep.alpha_star = res.alpha_star;
    PhiRoots roots = phi_roots(gamma, res.alpha_star);
    rep.p_gamma_a = roots.p_a;
    rep.p_gamma_b = roots.p_b;

    std::vector<double> pv = detail::descending_values(p);
    std::vector<double> sv = detail::descending_values(res.p_star);
    rep.d.resize(pv.size());
    rep.tags.resize(pv.size());
    rep.over_suppression = false;
    for (std::size_t i = 0; i < pv.size(); ++i) {
        rep.d[i] = pv[i] - sv[i];
        double v = pv[i];
        if (v <= roots.p_a * (1.0 + 1e-12) + 1e-15) {
            rep.tags[i] = RegimeTag::over_suppressed;
            if (v < roots.p_a - 1e-12) rep.over_suppression = true;
        } else if (v >= roots.p_b * (1.0 - 1e-12)) {
            rep.tags[i] = RegimeTag::suppressed_high;
        } else {
            rep.tags[i] = RegimeTag::amplified;
        }
    }
    rep.sign_changes = detail::count_sign_changes(rep.d);
    rep.majorizes_flag = majorizes(p, res.p_star);
    return rep;
}

/// Checkable conditions that localize the input away from the
/// over-suppression band, with the quantities they compare against.
struct SufficientConditions {
    bool low_band_empty;       // -p_max * L_g'(1/N) < 1: alpha* < 1, so p_a = 0
    bool support_above_peak;   // gamma > kappa(p_min): every entry right of the peak
    bool top_entry_suppressed; // gamma > gamma0: d_1 >= 0
    double gamma0;
    double kappa_pmin;
};

/// gamma0 is the focusing threshold above which the largest entry is
/// guaranteed weakly suppressed: gamma0 = -1 - W_{-1}(-n e^{-n})/n with
/// n = log(N/(N-1)).
inline SufficientConditions sufficient_conditions(FocusParam gamma, const Pmf& p) {
    double nn = static_cast<double>(p.support_size());
    SufficientConditions out{};
    if (p.support_size() == 1) {
        out.low_band_empty = true;
        out.support_above_peak = true;
        out.top_entry_suppressed = true;
        out.gamma0 = 0.0;
        out.kappa_pmin = -std::numeric_limits<double>::infinity();
        return out;
    }
    out.kappa_pmin = kappa(p.p_min());
    out.low_band_empty = -p.p_max() * focal_loss_d1(gamma, Prob{1.0 / nn}) < 1.0;
    out.support_above_peak = gamma.value() > out.kappa_pmin;
    double n = std::log(nn / (nn - 1.0));
    out.gamma0 = -1.0 - lambert_wm1(-n * std::exp(-n)) / n;
    out.top_entry_suppressed = gamma.value() > out.gamma0;
    return out;
}

struct BinaryBoundsResult {
    double p;              // true probability of the rare class, in (0, 1/2]
    double q_gamma;        // power-law lower envelope
    double q_gamma_plus1;  // power-law upper envelope
    double p_star_1;       // exact optimizer mass on the class with probability p
    double gap_bound;      // envelope width bound |log(p/(1-p))| / (4 gamma^2)
};

/// Two-point envelope: with q_g = p^{1/g} / (p^{1/g} + (1-p)^{1/g}),
/// the exact optimizer mass sits between q_gamma and q_{gamma+1}, and the
/// envelope width is bounded by |logit(p)| / (4 gamma^2).
inline BinaryBoundsResult binary_bounds(FocusParam gamma, double p) {
    if (!(gamma.value() > 0.0)) {
        throw std::domain_error("binary_bounds: gamma must be positive");
    }
    if (!(std::isfinite(p) && p > 0.0 && p <= 0.5)) {
        throw std::domain_error("binary_bounds: p must lie in (0, 1/2]");
    }
    auto power_law = [&](double g) {
        double a = std::pow(p, 1.0 / g);
        double b = std::pow(1.0 - p, 1.0 / g);
        return a / (a + b);
    };
    BinaryBoundsResult out{};
    out.p = p;
    out.q_gamma = power_law(gamma.value());
    out.q_gamma_plus1 = power_law(gamma.value() + 1.0);
    out.p_star_1 = solve_minimizer(gamma, Pmf({p, 1.0 - p})).p_star.prob(0);
    out.gap_bound = std::fabs(std::log(p / (1.0 - p))) / (4.0 * gamma.value() * gamma.value());
    return out;
}

/// Evaluates H_gamma(p, q)^{1/gamma} over a gamma grid. The values
/// approach max over the support of p of (1 - q(x)) as gamma grows.
/// Absolute-continuity failures propagate as infinity.
inline std::vector<std::pair<double, double>> limit_diagnostic(const Pmf& p, const Pmf& q,
                                                               const std::vector<double>& gamma_grid) {
    std::vector<std::pair<double, double>> out;
    out.reserve(gamma_grid.size());
    for (double g : gamma_grid) {
        if (!(std::isfinite(g) && g > 0.0)) {
            throw std::domain_error("limit_diagnostic: grid values must be positive");
        }
        EntropyValue h = focal_entropy(FocusParam{g}, p, q);
        double v = h.is_finite() ? std::pow(h.value(), 1.0 / g)
                                 : std::numeric_limits<double>::infinity();
        out.emplace_back(g, v);
    }
    return out;
}

struct ScanRow {
    double p1, p2, p3;
    double alpha_star;
    double p_gamma_a;
    double pmin_minus_pa;
    double d1;
};

struct ScanResult {
    std::vector<ScanRow> rows;        // lattice order
    double min_pmin_minus_pa;
    double min_d1;
    std::vector<std::string> failures;
};

/// Scans the interior lattice of the ternary simplex (k_i >= 1,
/// sum k_i = resolution), solving the minimizer at every cell and
/// recording p_min - p_a. Boundary cells (any coordinate below
/// 1/(2 resolution)) never occur on this lattice. Per-cell solver
/// failures are recorded in the result, not thrown. Cells are
/// independent; `jobs` fans them out with deterministic assembly.
inline ScanResult simplex_scan(FocusParam gamma, int resolution, int jobs = 1) {
    if (resolution < 10) throw std::invalid_argument("simplex_scan: resolution must be >= 10");
    if (jobs < 1) throw std::invalid_argument("simplex_scan: jobs must be >= 1");

    std::vector<std::pair<int, int>> cells;
    for (int k1 = 1; k1 <= resolution - 2; ++k1) {
        for (int k2 = 1; k2 <= resolution - 1 - k1; ++k2) {
            cells.emplace_back(k1, k2);
        }
    }

    struct Slot {
        bool ok = false;
        ScanRow row{};
        std::string error;
    };
    std::vector<Slot> slots(cells.size());

    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t c = begin; c < end; ++c) {
            double r = static_cast<double>(resolution);
            double p1 = cells[c].first / r;
            double p2 = cells[c].second / r;
            double p3 = (resolution - cells[c].first - cells[c].second) / r;
            try {
                RegimeReport rep = analyze(gamma, Pmf({p1, p2, p3}));
                double pmin = std::min({p1, p2, p3});
                slots[c].row = ScanRow{p1, p2, p3, rep.alpha_star, rep.p_gamma_a,
                                       pmin - rep.p_gamma_a, rep.d[0]};
                slots[c].ok = true;
            } catch (const std::exception& e) {
                slots[c].error = e.what();
            }
        }
    };

    if (jobs == 1) {
        work(0, cells.size());
    } else {
        std::vector<std::thread> threads;
        std::size_t chunk = (cells.size() + jobs - 1) / jobs;
        for (int j = 0; j < jobs; ++j) {
            std::size_t begin = std::min(cells.size(), j * chunk);
            std::size_t end = std::min(cells.size(), begin + chunk);
            if (begin < end) threads.emplace_back(work, begin, end);
        }
        for (auto& t : threads) t.join();
    }

    ScanResult out{};
    out.min_pmin_minus_pa = std::numeric_limits<double>::infinity();
    out.min_d1 = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cells.size(); ++c) {
        if (slots[c].ok) {
            out.rows.push_back(slots[c].row);
            out.min_pmin_minus_pa = std::fmin(out.min_pmin_minus_pa, slots[c].row.pmin_minus_pa);
            out.min_d1 = std::fmin(out.min_d1, slots[c].row.d1);
        } else {
            char buf[64];
            std::snprintf(buf, sizeof buf, "cell %d/%d: ", cells[c].first, cells[c].second);
            out.failures.push_back(buf + slots[c].error);
        }
    }
    return out;
}

struct EntropyConsequences {
    bool entropy_increase;  // H(P*) >= H(p)
    bool kl_decrease;       // KL(p || U) >= KL(P* || U)
    bool premise_holds;     // p_min > p_a, the regime where both are guaranteed
};

/// Majorization consequences of the minimizer when the whole support
/// clears the low band: Shannon entropy rises and the KL distance to the
/// uniform distribution on the support falls. Outside the premise the
/// flags are still reported, just not guaranteed.
inline EntropyConsequences entropy_consequences(FocusParam gamma, const Pmf& p) {
    EntropyConsequences out{};
    if (gamma.value() == 0.0) {
        out.entropy_increase = true;
        out.kl_decrease = true;
        out.premise_holds = true;
        return out;
    }
    MinimizerResult res = solve_minimizer(gamma, p);
    if (p.support_size() == 1) {
        out.entropy_increase = true;
        out.kl_decrease = true;
        out.premise_holds = true;
        return out;
    }
    PhiRoots roots = phi_roots(gamma, res.alpha_star);
    out.premise_holds = p.p_min() > roots.p_a;

    std::vector<double> uniform(p.size(), 0.0);
    for (std::size_t i : p.support()) uniform[i] = 1.0 / static_cast<double>(p.support_size());
    Pmf u(p.labels(), uniform);

    out.entropy_increase = shannon_entropy(res.p_star) >= shannon_entropy(p) - 1e-12;
    out.kl_decrease = kl_divergence(p, u).as_double() >= kl_divergence(res.p_star, u).as_double() - 1e-12;
    return out;
}

}  // namespace focal
