#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "focal/scalar.hpp"

// Finite probability mass functions and the distribution-level functionals
// built on the focal loss: Shannon/cross/focal entropy, KL divergence,
// derivatives of the focal entropy in the focusing parameter, the tilted
// distribution, its normalizer h_gamma, the rho/R decomposition, harmonic
// mean, and majorization.

namespace focal {

/// Immutable finite pmf. Labels are opaque; zero-probability labels are
/// kept in the entry list but excluded from the support, and every
/// functional in this module sums over the support only.
class Pmf {
public:
    struct Entry {
        std::string label;
        double prob;
    };

    /// Labels default to "0", "1", ... when only probabilities are given.
    explicit Pmf(const std::vector<double>& probs) : Pmf(default_labels(probs.size()), probs) {}

    Pmf(std::vector<std::string> labels, const std::vector<double>& probs) {
        if (labels.size() != probs.size()) {
            throw std::invalid_argument("Pmf: labels and probs length mismatch");
        }
        if (probs.empty()) throw std::invalid_argument("Pmf: empty");
        double sum = 0.0;
        for (double v : probs) {
            if (!(std::isfinite(v) && v >= 0.0)) {
                throw std::invalid_argument("Pmf: probabilities must be finite and >= 0");
            }
            sum += v;
        }
        // Tolerate rounded inputs (re-normalized below); reject anything
        // further from 1 as a likely caller bug.
        if (std::fabs(sum - 1.0) > 1e-9) {
            throw std::invalid_argument("Pmf: probabilities sum to " + std::to_string(sum));
        }
        entries_.reserve(probs.size());
        for (std::size_t i = 0; i < probs.size(); ++i) {
            entries_.push_back(Entry{std::move(labels[i]), probs[i] / sum});
        }
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            if (entries_[i].prob > 0.0) support_.push_back(i);
        }
        if (support_.empty()) throw std::invalid_argument("Pmf: empty support");

        descending_.resize(entries_.size());
        std::vector<std::size_t> order(entries_.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [this](std::size_t a, std::size_t b) {
            return entries_[a].prob > entries_[b].prob;
        });
        for (std::size_t i = 0; i < order.size(); ++i) descending_[i] = entries_[order[i]].prob;

        p_min_ = std::numeric_limits<double>::infinity();
        p_max_ = 0.0;
        for (std::size_t i : support_) {
            p_min_ = std::fmin(p_min_, entries_[i].prob);
            p_max_ = std::fmax(p_max_, entries_[i].prob);
        }
    }

    std::size_t size() const noexcept { return entries_.size(); }
    const Entry& entry(std::size_t i) const { return entries_.at(i); }
    double prob(std::size_t i) const { return entries_.at(i).prob; }
    const std::string& label(std::size_t i) const { return entries_.at(i).label; }

    /// Indices of the support, in entry order.
    const std::vector<std::size_t>& support() const noexcept { return support_; }
    std::size_t support_size() const noexcept { return support_.size(); }

    double p_min() const noexcept { return p_min_; }
    double p_max() const noexcept { return p_max_; }

    /// All probabilities sorted descending (stable under ties); zeros,
    /// when present, trail the support values.
    const std::vector<double>& descending() const noexcept { return descending_; }

    bool is_uniform() const noexcept { return p_max_ - p_min_ <= 1e-12; }

    std::vector<double> probs() const {
        std::vector<double> out(entries_.size());
        for (std::size_t i = 0; i < entries_.size(); ++i) out[i] = entries_[i].prob;
        return out;
    }

    std::vector<std::string> labels() const {
        std::vector<std::string> out(entries_.size());
        for (std::size_t i = 0; i < entries_.size(); ++i) out[i] = entries_[i].label;
        return out;
    }

    bool same_labels(const Pmf& other) const {
        if (entries_.size() != other.entries_.size()) return false;
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            if (entries_[i].label != other.entries_[i].label) return false;
        }
        return true;
    }

    static std::vector<std::string> default_labels(std::size_t n) {
        std::vector<std::string> out(n);
        for (std::size_t i = 0; i < n; ++i) out[i] = std::to_string(i);
        return out;
    }

private:
    std::vector<Entry> entries_;
    std::vector<std::size_t> support_;
    std::vector<double> descending_;
    double p_min_ = 0.0;
    double p_max_ = 0.0;
};

/// Extended non-negative real. Infinity is a tagged state, produced
/// exactly when absolute continuity fails, never by overflow.
class EntropyValue {
public:
    static EntropyValue finite(double v) { return EntropyValue(v, true); }
    static EntropyValue infinity() { return EntropyValue(0.0, false); }

    bool is_finite() const noexcept { return finite_; }

    /// Finite value; throws when the sentinel is set.
    double value() const {
        if (!finite_) throw std::logic_error("EntropyValue: infinite");
        return value_;
    }

    double as_double() const noexcept {
        return finite_ ? value_ : std::numeric_limits<double>::infinity();
    }

private:
    EntropyValue(double v, bool f) : value_(v), finite_(f) {}
    double value_;
    bool finite_;
};

namespace detail {

inline void require_same_labels(const Pmf& p, const Pmf& q, const char* who) {
    if (!p.same_labels(q)) {
        throw std::invalid_argument(std::string(who) + ": label sets differ");
    }
}

inline bool absolutely_continuous(const Pmf& p, const Pmf& q) {
    for (std::size_t i : p.support()) {
        if (q.prob(i) <= 0.0) return false;
    }
    return true;
}

}  // namespace detail

inline double shannon_entropy(const Pmf& p) {
    double h = 0.0;
    for (std::size_t i : p.support()) {
        double v = p.prob(i);
        h += v * detail::log_inv(v);
    }
    return h;
}

inline EntropyValue cross_entropy(const Pmf& p, const Pmf& q) {
    detail::require_same_labels(p, q, "cross_entropy");
    if (!detail::absolutely_continuous(p, q)) return EntropyValue::infinity();
    double h = 0.0;
    for (std::size_t i : p.support()) {
        h += p.prob(i) * detail::log_inv(q.prob(i));
    }
    return EntropyValue::finite(h);
}

inline EntropyValue focal_entropy(FocusParam gamma, const Pmf& p, const Pmf& q) {
    detail::require_same_labels(p, q, "focal_entropy");
    if (!detail::absolutely_continuous(p, q)) return EntropyValue::infinity();
    double g = gamma.value();
    double h = 0.0;
    for (std::size_t i : p.support()) {
        double qi = q.prob(i);
        if (qi == 1.0) continue;
        h += p.prob(i) * std::pow(1.0 - qi, g) * detail::log_inv(qi);
    }
    return EntropyValue::finite(h);
}

/// First and second derivatives of the focal entropy in gamma:
/// (E[log(1-Q) L_g(Q)], E[(log(1-Q))^2 L_g(Q)]). The first is <= 0 and
/// the second >= 0; terms with q(x)=1 contribute zero. Returns
/// (-inf, +inf) when absolute continuity fails.
inline std::pair<double, double> focal_entropy_dgamma(FocusParam gamma, const Pmf& p, const Pmf& q) {
    detail::require_same_labels(p, q, "focal_entropy_dgamma");
    if (!detail::absolutely_continuous(p, q)) {
        return {-std::numeric_limits<double>::infinity(),
                std::numeric_limits<double>::infinity()};
    }
    double g = gamma.value();
    double first = 0.0, second = 0.0;
    for (std::size_t i : p.support()) {
        double qi = q.prob(i);
        if (qi == 1.0) continue;
        double lq = std::log1p(-qi);  // log(1-q)
        double term = p.prob(i) * std::pow(1.0 - qi, g) * detail::log_inv(qi);
        first += lq * term;
        second += lq * lq * term;
    }
    return {first, second};
}

inline EntropyValue kl_divergence(const Pmf& p, const Pmf& q) {
    detail::require_same_labels(p, q, "kl_divergence");
    if (!detail::absolutely_continuous(p, q)) return EntropyValue::infinity();
    double d = 0.0;
    for (std::size_t i : p.support()) {
        double pi = p.prob(i);
        d += pi * std::log(pi / q.prob(i));
    }
    if (d < 0.0 && d > -1e-12) d = 0.0;  // rounding of a provably non-negative sum
    return EntropyValue::finite(d);
}

/// h_g(p) = log sum_x p(x)^((1-p(x))^g). Grows from 0 at g=0, bounded by
/// e^(1/e) * g.
inline double h_gamma(FocusParam gamma, const Pmf& p) {
    double g = gamma.value();
    double s = 0.0;
    for (std::size_t i : p.support()) {
        double v = p.prob(i);
        s += std::pow(v, std::pow(1.0 - v, g));
    }
    double h = std::log(s);
    if (h < 0.0 && h > -1e-12) h = 0.0;
    return h;
}

/// Tilted distribution x -> q(x)^((1-q(x))^g) / exp(h_g(q)). Zero entries
/// stay zero and keep their labels.
inline Pmf tilt(FocusParam gamma, const Pmf& q) {
    double g = gamma.value();
    std::vector<double> w(q.size(), 0.0);
    double sum = 0.0;
    for (std::size_t i : q.support()) {
        double v = q.prob(i);
        w[i] = std::pow(v, std::pow(1.0 - v, g));
        sum += w[i];
    }
    for (double& v : w) v /= sum;
    return Pmf(q.labels(), w);
}

struct RhoR {
    double rho;
    Pmf r;
};

/// The reweighting behind the identity H_g(p,q) = rho * (KL(r||q) + H(r)):
/// rho = sum p(x)(1-q(x))^g and r(x) proportional to p(x)(1-q(x))^g.
inline RhoR rho_and_r(FocusParam gamma, const Pmf& p, const Pmf& q) {
    detail::require_same_labels(p, q, "rho_and_r");
    if (!detail::absolutely_continuous(p, q)) {
        throw std::domain_error("rho_and_r: absolute continuity fails");
    }
    double g = gamma.value();
    std::vector<double> w(p.size(), 0.0);
    double rho = 0.0;
    for (std::size_t i : p.support()) {
        w[i] = p.prob(i) * std::pow(1.0 - q.prob(i), g);
        rho += w[i];
    }
    if (!(rho > 0.0)) {
        throw std::domain_error("rho_and_r: degenerate reweighting (rho = 0)");
    }
    for (double& v : w) v /= rho;
    return RhoR{rho, Pmf(p.labels(), w)};
}

inline double harmonic_mean(const Pmf& p) {
    double s = 0.0;
    for (std::size_t i : p.support()) s += 1.0 / p.prob(i);
    return static_cast<double>(p.support_size()) / s;
}

/// True iff p majorizes q: every prefix sum of the descending-sorted
/// probabilities of p is >= the matching prefix of q (slack 1e-12).
/// Shorter vectors are padded with zeros.
inline bool majorizes(const Pmf& p, const Pmf& q) {
    const auto& a = p.descending();
    const auto& b = q.descending();
    std::size_t n = std::max(a.size(), b.size());
    double pa = 0.0, pb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        pa += i < a.size() ? a[i] : 0.0;
        pb += i < b.size() ? b[i] : 0.0;
        if (pa < pb - 1e-12) return false;
    }
    return true;
}

}  // namespace focal
