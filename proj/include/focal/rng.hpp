#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

// Deterministic random primitives. The engine is the standard 64-bit
// Mersenne twister, whose output sequence is fixed by the C++ standard,
// but all derived draws (doubles, bounded integers, shuffles) are
// implemented here rather than taken from <random> distributions, whose
// algorithms are implementation-defined. Identical seeds therefore give
// bit-identical streams on every platform.

namespace focal {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    /// Uniform double in [0, 1) with 53 random bits.
    double unit() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

    /// Uniform integer in [0, n) by rejection, bias-free.
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("Rng::below: n must be positive");
        std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = eng_();
        } while (x >= limit);
        return x % n;
    }

    /// Fisher-Yates shuffle, descending index order.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    /// Draws an index according to the given probability weights.
    std::size_t categorical(const double* probs, std::size_t n) {
        double u = unit();
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            acc += probs[i];
            if (u < acc) return i;
        }
        return n - 1;
    }

    /// Uniform point on the interior of the probability simplex
    /// (flat Dirichlet via normalized exponentials).
    std::vector<double> simplex(std::size_t n) {
        std::vector<double> v(n);
        double sum = 0.0;
        for (double& x : v) {
            x = -std::log(1.0 - unit());
            sum += x;
        }
        for (double& x : v) x /= sum;
        return v;
    }

    std::uint64_t raw() { return eng_(); }

private:
    std::mt19937_64 eng_;
};

}  // namespace focal
