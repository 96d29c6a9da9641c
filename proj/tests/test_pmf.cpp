#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "focal/pmf.hpp"
#include "focal/rng.hpp"
#include "focal/serialize.hpp"

#include "helpers.hpp"

using focal::EntropyValue;
using focal::FocusParam;
using focal::Pmf;
using focal::Rng;

TEST_CASE("pmf construction validates and normalizes") {
    REQUIRE_THROWS_AS(Pmf(std::vector<double>{0.5, 0.4}), std::invalid_argument);
    REQUIRE_THROWS_AS(Pmf(std::vector<double>{1.2, -0.2}), std::invalid_argument);
    REQUIRE_THROWS_AS(Pmf(std::vector<double>{}), std::invalid_argument);
    REQUIRE_THROWS_AS(Pmf({"a"}, {0.5, 0.5}), std::invalid_argument);

    Pmf p({0.25, 0.5, 0.25 + 4e-10});
    REQUIRE(std::fabs(p.prob(0) + p.prob(1) + p.prob(2) - 1.0) <= 1e-16);

    Pmf q({0.5, 0.0, 0.5});
    REQUIRE(q.support() == std::vector<std::size_t>{0, 2});
    REQUIRE(q.support_size() == 2);
    REQUIRE(q.p_min() == 0.5);
    REQUIRE(q.p_max() == 0.5);
    REQUIRE(q.is_uniform());
    REQUIRE(q.label(1) == "1");

    Pmf r({0.2, 0.5, 0.3});
    REQUIRE(r.descending() == std::vector<double>{0.5, 0.3, 0.2});
    REQUIRE(!r.is_uniform());
}

TEST_CASE("shannon and cross entropy behave classically") {
    Pmf u({0.25, 0.25, 0.25, 0.25});
    REQUIRE(std::fabs(focal::shannon_entropy(u) - std::log(4.0)) <= 1e-14);

    Pmf p({0.7, 0.3});
    REQUIRE(std::fabs(focal::cross_entropy(p, p).value() - focal::shannon_entropy(p)) <= 1e-15);

    Pmf q({0.0, 1.0});
    EntropyValue inf = focal::cross_entropy(p, q);
    REQUIRE(!inf.is_finite());
    REQUIRE(std::isinf(inf.as_double()));
    REQUIRE_THROWS_AS(inf.value(), std::logic_error);

    Rng rng(201);
    for (int k = 0; k < 500; ++k) {
        Pmf a = testutil::random_pmf(rng, 2 + rng.below(5));
        Pmf b = testutil::random_pmf(rng, a.size());
        double gibbs = focal::cross_entropy(a, b).value() - focal::shannon_entropy(a);
        REQUIRE(gibbs >= -1e-12);
        REQUIRE(std::fabs(focal::kl_divergence(a, b).value() - gibbs) <= 1e-10);
    }
}

TEST_CASE("focal entropy reduces to cross entropy at gamma zero") {
    Rng rng(202);
    for (int k = 0; k < 200; ++k) {
        Pmf p = testutil::random_pmf(rng, 2 + rng.below(4));
        Pmf q = testutil::random_pmf(rng, p.size());
        REQUIRE(std::fabs(focal::focal_entropy(FocusParam{0.0}, p, q).value() -
                          focal::cross_entropy(p, q).value()) <= 1e-14);
    }
}

TEST_CASE("focal entropy is sandwiched and monotone in gamma") {
    Rng rng(203);
    for (int k = 0; k < 1000; ++k) {
        Pmf p = testutil::random_pmf(rng, 2 + rng.below(5));
        Pmf q = testutil::random_pmf(rng, p.size());
        double g = testutil::random_gamma(rng);
        double hg = focal::focal_entropy(FocusParam{g}, p, q).value();
        double h0 = focal::cross_entropy(p, q).value();
        REQUIRE(hg >= 0.0);
        REQUIRE(hg <= h0 + 1e-12);

        double g2 = g + rng.uniform(0.01, 3.0);
        REQUIRE(focal::focal_entropy(FocusParam{g2}, p, q).value() <= hg + 1e-12);

        double mid = 0.5 * (g + g2);
        double hm = focal::focal_entropy(FocusParam{mid}, p, q).value();
        double h2 = focal::focal_entropy(FocusParam{g2}, p, q).value();
        REQUIRE(hm <= 0.5 * (hg + h2) + 1e-12);
    }
}

TEST_CASE("gamma derivatives of the entropy have fixed signs") {
    Rng rng(204);
    for (int k = 0; k < 1000; ++k) {
        Pmf p = testutil::random_pmf(rng, 2 + rng.below(5));
        Pmf q = testutil::random_pmf(rng, p.size());
        double g = testutil::random_gamma(rng);
        auto [first, second] = focal::focal_entropy_dgamma(FocusParam{g}, p, q);
        REQUIRE(first <= 0.0);
        REQUIRE(second >= 0.0);

        double h = 1e-5 * std::fmax(g, 0.1);
        double up = focal::focal_entropy(FocusParam{g + h}, p, q).value();
        double dn = focal::focal_entropy(FocusParam{g - h > 0 ? g - h : 0.0}, p, q).value();
        double fd = (up - dn) / (h + std::fmin(g, h));
        REQUIRE(std::fabs(first - fd) <= 1e-3 * std::fabs(first) + 1e-6);
    }
}

TEST_CASE("finiteness agrees across orders and tracks absolute continuity") {
    Rng rng(205);
    for (int k = 0; k < 1000; ++k) {
        std::size_t n = 2 + rng.below(5);
        Pmf p = testutil::random_pmf(rng, n);
        std::vector<double> qv = rng.simplex(n);
        if (rng.unit() < 0.5) {
            std::size_t z = rng.below(n);
            double freed = qv[z];
            qv[z] = 0.0;
            qv[(z + 1) % n] += freed;
        }
        Pmf q(qv);
        bool ac = true;
        for (std::size_t i = 0; i < n; ++i) {
            if (p.prob(i) > 0.0 && q.prob(i) <= 0.0) ac = false;
        }
        double g = testutil::random_gamma(rng);
        REQUIRE(focal::focal_entropy(FocusParam{g}, p, q).is_finite() == ac);
        REQUIRE(focal::cross_entropy(p, q).is_finite() == ac);
        REQUIRE(focal::kl_divergence(p, q).is_finite() == ac);
    }
}

TEST_CASE("focal entropy is convex in its second argument") {
    Rng rng(206);
    for (int k = 0; k < 1000; ++k) {
        std::size_t n = 2 + rng.below(5);
        Pmf p = testutil::random_pmf(rng, n);
        Pmf q1 = testutil::random_pmf(rng, n);
        Pmf q2 = testutil::random_pmf(rng, n);
        double lam = rng.uniform(0.05, 0.95);
        std::vector<double> mix(n);
        for (std::size_t i = 0; i < n; ++i) mix[i] = lam * q1.prob(i) + (1.0 - lam) * q2.prob(i);
        double g = testutil::random_gamma(rng);
        double hmix = focal::focal_entropy(FocusParam{g}, p, Pmf(mix)).value();
        double h1 = focal::focal_entropy(FocusParam{g}, p, q1).value();
        double h2 = focal::focal_entropy(FocusParam{g}, p, q2).value();
        REQUIRE(hmix <= lam * h1 + (1.0 - lam) * h2 + 1e-12);
    }
}

TEST_CASE("diagonal exponent stays in its band and grows in gamma") {
    const double cap_rate = std::exp(1.0 / std::exp(1.0));
    Rng rng(207);
    for (int k = 0; k < 1000; ++k) {
        Pmf p = testutil::random_pmf(rng, 2 + rng.below(7));
        double g = testutil::random_gamma(rng);
        double h = focal::h_gamma(FocusParam{g}, p);
        REQUIRE(h >= 0.0);
        REQUIRE(h <= cap_rate * g + 1e-12);

        // Strict growth is checked away from the saturated tail, where the
        // per-entry exponents (1-p)^gamma shrink below double resolution.
        double gs = std::fmin(g, 20.0);
        double hs = focal::h_gamma(FocusParam{gs}, p);
        REQUIRE(focal::h_gamma(FocusParam{gs + rng.uniform(0.05, 3.0)}, p) > hs);
    }
    REQUIRE(focal::h_gamma(FocusParam{0.0}, Pmf({0.3, 0.7})) == 0.0);
}

TEST_CASE("tilt decomposition identities hold to 1e-10") {
    Rng rng(208);
    for (int k = 0; k < 1000; ++k) {
        std::size_t n = 2 + rng.below(5);
        Pmf p = testutil::random_pmf(rng, n);
        Pmf q = testutil::random_pmf(rng, n);
        double g = testutil::random_gamma(rng);

        double hg = focal::focal_entropy(FocusParam{g}, p, q).value();
        Pmf tilted = focal::tilt(FocusParam{g}, q);
        double hq = focal::h_gamma(FocusParam{g}, q);

        REQUIRE(std::fabs(hg - (focal::cross_entropy(p, tilted).value() - hq)) <= 1e-10);
        REQUIRE(std::fabs(hg - (focal::kl_divergence(p, tilted).value() +
                                focal::shannon_entropy(p) - hq)) <= 1e-10);

        focal::RhoR rr = focal::rho_and_r(FocusParam{g}, p, q);
        double viaRho = rr.rho * (focal::kl_divergence(rr.r, q).value() + focal::shannon_entropy(rr.r));
        REQUIRE(std::fabs(hg - viaRho) <= 1e-10);
    }

    Pmf q({0.1, 0.6, 0.3});
    Pmf t0 = focal::tilt(FocusParam{0.0}, q);
    for (std::size_t i = 0; i < q.size(); ++i) REQUIRE(std::fabs(t0.prob(i) - q.prob(i)) <= 1e-15);
}

TEST_CASE("harmonic mean and majorization basics") {
    Rng rng(209);
    for (int k = 0; k < 500; ++k) {
        std::size_t n = 2 + rng.below(6);
        Pmf p = testutil::random_pmf(rng, n);
        double m = static_cast<double>(n);
        REQUIRE(focal::harmonic_mean(p) <= 1.0 / m + 1e-15);
        REQUIRE(focal::majorizes(p, p));
        REQUIRE(focal::majorizes(p, Pmf(std::vector<double>(n, 1.0 / m))));
    }
    REQUIRE(focal::majorizes(Pmf({1.0, 0.0}), Pmf({0.6, 0.4})));
    REQUIRE(!focal::majorizes(Pmf({0.5, 0.5}), Pmf({0.6, 0.4})));
    REQUIRE(std::fabs(focal::harmonic_mean(Pmf({0.25, 0.25, 0.25, 0.25})) - 0.25) <= 1e-16);
}

TEST_CASE("pmf serialization round-trips exactly") {
    // Emission is exact (17 significant digits); re-parsing renormalizes,
    // which may move entries by one ulp when the printed sum is not 1.0.
    Pmf p({"x", "y", "z"}, {0.1, 0.7, 0.2});
    Pmf fromJson = focal::pmf_from_json(focal::pmf_to_json(p));
    REQUIRE(fromJson.same_labels(p));
    for (std::size_t i = 0; i < p.size(); ++i) {
        REQUIRE(std::fabs(fromJson.prob(i) - p.prob(i)) <= 1e-15);
    }

    Pmf q({0.3000000000000000444, 0.7});
    Pmf fromCsv = focal::pmf_from_csv(focal::pmf_to_csv(q));
    for (std::size_t i = 0; i < q.size(); ++i) {
        REQUIRE(std::fabs(fromCsv.prob(i) - q.prob(i)) <= 1e-15);
    }
    REQUIRE(focal::pmf_to_csv(q).substr(0, 5) == "prob\n");

    REQUIRE(focal::pmf_from_json("{\"probs\":[0.5,0.5]}").label(0) == "0");
    REQUIRE_THROWS(focal::pmf_from_json("{\"labels\":[\"a\"]}"));

    REQUIRE(focal::csv_field("plain") == "plain");
    REQUIRE(focal::csv_field("a,b") == "\"a,b\"");
    REQUIRE(focal::csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
    REQUIRE(focal::json_escape("tab\there") == "tab\\there");
}
