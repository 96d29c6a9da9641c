#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "focal/lambert.hpp"
#include "focal/rng.hpp"
#include "focal/scalar.hpp"

#include "helpers.hpp"

using focal::FocusParam;
using focal::Prob;
using focal::Rng;

namespace {

constexpr double kW = 0.20318786997997998;  // root of kappa, -W0(-2/e^2)/2

double fd_d1(double g, double p) {
    double h = 1e-6 * p;
    return (focal::focal_loss(FocusParam{g}, Prob{p + h}) -
            focal::focal_loss(FocusParam{g}, Prob{p - h})) /
           (2.0 * h);
}

double fd_d2(double g, double p) {
    double h = 1e-5 * p;
    return (focal::focal_loss(FocusParam{g}, Prob{p + h}) -
            2.0 * focal::focal_loss(FocusParam{g}, Prob{p}) +
            focal::focal_loss(FocusParam{g}, Prob{p - h})) /
           (h * h);
}

}  // namespace

TEST_CASE("loss closed forms at the integer special cases") {
    for (double p : {1e-6, 1e-3, 0.1, 0.5, 0.9, 1.0 - 1e-9}) {
        REQUIRE(std::fabs(focal::focal_loss(FocusParam{0.0}, Prob{p}) - std::log(1.0 / p)) <=
                1e-12 * std::log(1.0 / p) + 1e-15);
        double l1 = (1.0 - p) * std::log(1.0 / p);
        REQUIRE(std::fabs(focal::focal_loss(FocusParam{1.0}, Prob{p}) - l1) <= 1e-12 * l1 + 1e-15);
        REQUIRE(std::fabs(focal::focal_loss_d1(FocusParam{0.0}, Prob{p}) + 1.0 / p) <= 1e-9 / p);
        REQUIRE(std::fabs(focal::focal_loss_d2(FocusParam{0.0}, Prob{p}) - 1.0 / (p * p)) <=
                1e-9 / (p * p));
        double d1_1 = -(std::log(1.0 / p) + (1.0 - p) / p);
        REQUIRE(std::fabs(focal::focal_loss_d1(FocusParam{1.0}, Prob{p}) - d1_1) <=
                1e-12 * std::fabs(d1_1) + 1e-15);
        double d2_1 = (1.0 + p) / (p * p);
        REQUIRE(std::fabs(focal::focal_loss_d2(FocusParam{1.0}, Prob{p}) - d2_1) <= 1e-12 * d2_1);
    }
    REQUIRE(focal::focal_loss(FocusParam{3.7}, Prob{1.0}) == 0.0);
    REQUIRE(focal::focal_loss_d2(FocusParam{1.0}, Prob{0.5}) == 6.0);
}

TEST_CASE("loss decreases in p, decreases in gamma, and is convex") {
    Rng rng(101);
    for (int k = 0; k < 1000; ++k) {
        double g = rng.unit() < 0.1 ? 0.0 : testutil::random_gamma(rng);
        double a = rng.uniform(1e-4, 1.0 - 1e-4);
        double b = rng.uniform(1e-4, 1.0 - 1e-4);
        if (a == b) continue;
        double lo = std::fmin(a, b), hi = std::fmax(a, b);
        double fl = focal::focal_loss(FocusParam{g}, Prob{lo});
        double fh = focal::focal_loss(FocusParam{g}, Prob{hi});
        REQUIRE(fl > fh);

        double mid = 0.5 * (lo + hi);
        double fm = focal::focal_loss(FocusParam{g}, Prob{mid});
        REQUIRE(fm < 0.5 * (fl + fh) + 1e-12);

        double g2 = g + rng.uniform(0.01, 5.0);
        REQUIRE(focal::focal_loss(FocusParam{g2}, Prob{mid}) < fm);
    }
}

TEST_CASE("second derivative is positive on a log-spaced grid") {
    for (double g : {0.0, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 25.0, 50.0}) {
        for (int k = 0; k <= 60; ++k) {
            double u = std::log(1e-6) + k * (std::log(1.0 - 1e-6) - std::log(1e-6)) / 60.0;
            double p = std::exp(u);
            REQUIRE(focal::focal_loss_d2(FocusParam{g}, Prob{p}) > 0.0);
            REQUIRE(focal::focal_loss_d1(FocusParam{g}, Prob{p}) < 0.0);
        }
    }
}

TEST_CASE("derivatives agree with central differences") {
    Rng rng(102);
    for (int k = 0; k < 200; ++k) {
        double g = rng.unit() < 0.15 ? 0.0 : rng.uniform(0.05, 8.0);
        double p = rng.uniform(0.02, 0.98);
        double d1 = focal::focal_loss_d1(FocusParam{g}, Prob{p});
        double d2 = focal::focal_loss_d2(FocusParam{g}, Prob{p});
        REQUIRE(std::fabs(d1 - fd_d1(g, p)) <= 1e-5 * std::fabs(d1) + 1e-8);
        REQUIRE(std::fabs(d2 - fd_d2(g, p)) <= 1e-4 * std::fabs(d2) + 1e-6);
    }
}

TEST_CASE("derivative inverse round-trips to 1e-9 and increases in t") {
    Rng rng(103);
    for (int k = 0; k < 1000; ++k) {
        double g = testutil::random_gamma(rng);
        if (rng.unit() < 0.1) g = 1.0;
        double u = rng.unit();
        double p = u < 0.3 ? std::exp(std::log(1e-4) + rng.unit() * std::log(1e3))
                           : rng.uniform(0.1, 1.0 - 1e-4);
        double t = focal::focal_loss_d1(FocusParam{g}, Prob{p});
        double back = focal::focal_d1_inverse(FocusParam{g}, t);
        REQUIRE(std::fabs(back - p) <= 1e-9);
    }
    for (int k = 0; k < 1000; ++k) {
        double g = testutil::random_gamma(rng);
        double t1 = -std::exp(rng.uniform(-3.0, 6.0));
        double t2 = t1 * rng.uniform(0.2, 0.95);  // t1 < t2 < 0
        double p1 = focal::focal_d1_inverse(FocusParam{g}, t1);
        double p2 = focal::focal_d1_inverse(FocusParam{g}, t2);
        // Both roots land on the same representable value when they sit
        // within rounding of 1, so strictness only holds away from the edge.
        REQUIRE(p1 <= p2 + 1e-13);
        if (p2 < 1.0 - 1e-6) REQUIRE(p1 < p2);
    }
}

TEST_CASE("derivative inverse anchors and domain errors") {
    REQUIRE(std::fabs(focal::focal_d1_inverse(FocusParam{2.0}, -5.0) - 0.22435567865462056) <= 1e-12);
    REQUIRE(focal::focal_d1_inverse(FocusParam{0.0}, -4.0) == 0.25);
    for (double t : {-0.1, -1.0, -3.0, -20.0}) {
        double direct = 1.0 / focal::lambert_w0(std::exp(1.0 - t));
        REQUIRE(std::fabs(focal::focal_d1_inverse(FocusParam{1.0}, t) - direct) <= 1e-13);
    }
    REQUIRE(focal::focal_d1_inverse(FocusParam{1.0}, -1e-10) >= 1.0 - 1e-8);

    REQUIRE_THROWS_AS(focal::focal_d1_inverse(FocusParam{1.0}, 0.5), std::domain_error);
    REQUIRE_THROWS_AS(focal::focal_d1_inverse(FocusParam{1.0}, 0.0), std::domain_error);
    REQUIRE_THROWS_AS(focal::focal_d1_inverse(FocusParam{0.0}, -0.5), std::domain_error);
}

TEST_CASE("phi is unimodal with the advertised peak bounds") {
    REQUIRE(focal::phi(FocusParam{0.0}, 0.3) == 1.0);
    REQUIRE(!focal::phi_peak(FocusParam{0.0}).p_plus.has_value());

    Rng rng(104);
    for (int k = 0; k < 1000; ++k) {
        double g = testutil::random_gamma(rng);
        focal::PhiPeak peak = focal::phi_peak(FocusParam{g});
        REQUIRE(peak.p_plus.has_value());
        double pp = *peak.p_plus;
        REQUIRE(pp <= 0.2033);
        double s = 1.0 + std::sqrt(1.0 + g);
        REQUIRE(pp <= 1.0 / (s * s) + 1e-12);
        REQUIRE(peak.phi_max <= 1.0 + g + 1e-12);
        REQUIRE(std::fabs(focal::kappa(pp) - g) <= 1e-8 * std::fmax(1.0, g));

        for (int j = 1; j <= 8; ++j) {
            double left = pp * j / 9.0;
            double right = pp + (1.0 - 1e-9 - pp) * j / 9.0;
            REQUIRE(focal::phi(FocusParam{g}, left) < focal::phi(FocusParam{g}, left + pp / 9.0));
            if (j < 8) {
                double right2 = pp + (1.0 - 1e-9 - pp) * (j + 1) / 9.0;
                REQUIRE(focal::phi(FocusParam{g}, right) > focal::phi(FocusParam{g}, right2));
            }
        }

        double u = rng.uniform(1e-6, 1.0 / 3.0);
        REQUIRE(focal::phi(FocusParam{g}, u) >= focal::phi(FocusParam{g}, (1.0 - u) / 2.0) - 1e-12);
    }
}

TEST_CASE("kappa decreases strictly and vanishes at its root") {
    REQUIRE(std::fabs(focal::kappa(kW)) <= 1e-12);
    REQUIRE(std::fabs(-0.5 * focal::lambert_w0(-2.0 * std::exp(-2.0)) - kW) <= 1e-16);
    Rng rng(105);
    for (int k = 0; k < 1000; ++k) {
        double a = rng.uniform(1e-6, 1.0 - 1e-6);
        double b = rng.uniform(1e-6, 1.0 - 1e-6);
        if (a == b) continue;
        double lo = std::fmin(a, b), hi = std::fmax(a, b);
        REQUIRE(focal::kappa(lo) > focal::kappa(hi));
    }
}

TEST_CASE("lambert branches satisfy their defining equation") {
    REQUIRE(focal::lambert_w0(0.0) == 0.0);
    REQUIRE(std::fabs(focal::lambert_w0(std::exp(1.0)) - 1.0) <= 1e-14);
    REQUIRE(std::fabs(focal::lambert_w0(-std::exp(-1.0)) + 1.0) <= 1e-6);
    REQUIRE(std::fabs(focal::lambert_wm1(-2.0 * std::exp(-2.0)) + 2.0) <= 1e-12);

    Rng rng(106);
    for (int k = 0; k < 1000; ++k) {
        double x = std::exp(rng.uniform(-8.0, 12.0));
        double w = focal::lambert_w0(x);
        REQUIRE(std::fabs(w * std::exp(w) - x) <= 1e-12 * x);
    }
    for (int k = 0; k < 1000; ++k) {
        double x = -std::exp(-rng.uniform(1.0 + 1e-6, 40.0));  // in (-1/e, 0)
        double w = focal::lambert_wm1(x);
        REQUIRE(w <= -1.0);
        REQUIRE(std::fabs(w * std::exp(w) - x) <= 1e-12 * std::fabs(x));
    }
}
