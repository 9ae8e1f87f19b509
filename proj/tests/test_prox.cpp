#include "doctest.h"
#include "oracles.hpp"

#include "ggdseg/prox.hpp"
#include "ggdseg/specfun.hpp"

#include <cmath>
#include <stdexcept>

using namespace ggdseg;
using ld = long double;

namespace {

// Golden-section in extended precision so that the oracle's argument error
// (~sqrt(eps_ld)) sits far below the 1e-7 comparison tolerance.
template <typename F>
double golden_ld(F f, ld lo, ld hi) {
    const ld r = (std::sqrt(5.0L) - 1.0L) / 2.0L;
    ld a = lo, b = hi, c = b - r * (b - a), d = a + r * (b - a);
    ld fc = f(c), fd = f(d);
    for (int k = 0; k < 400 && b - a > 1e-15L * (1.0L + std::fabs(a)); ++k) {
        if (fc < fd) {
            b = d, d = c, fd = fc, c = b - r * (b - a), fc = f(c);
        } else {
            a = c, c = d, fc = fd, d = a + r * (b - a), fd = f(d);
        }
    }
    return static_cast<double>((a + b) / 2);
}

ld huber_ld(ld t, ld d1, ld d2) { return std::sqrt(t * t + d1 * d1) - d2; }

}  // namespace

TEST_CASE("weighted_huber trivial cases") {
    CHECK(prox::weighted_huber(1.0, 1.0, 0.0, 1.0).point == 0.0);
    CHECK(prox::weighted_huber(0.0, 1.0, 2.7, 1.0).point == 2.7);
    const auto r = prox::weighted_huber(1.0, 1.0, 2.0, 1.0);
    const double ref = golden_ld([](ld t) { return huber_ld(t, 1, 0) + (t - 2) * (t - 2) / 2; }, -3, 3);
    CHECK(std::abs(r.point - ref) <= 1e-8);
}

TEST_CASE("weighted_huber oracle suite") {
    Philox rng(31);
    for (int k = 0; k < 1000; ++k) {
        const double w = 3.0 * rng.uniform(), gamma = 0.05 + 2.0 * rng.uniform();
        const double target = -6.0 + 12.0 * rng.uniform(), d1 = 0.1 + 2.0 * rng.uniform();
        const auto r = prox::weighted_huber(w, gamma, target, d1);
        const double ref = golden_ld(
            [&](ld t) { return gamma * w * huber_ld(t, d1, 0) + (t - target) * (t - target) / 2; }, -7, 7);
        INFO("w=" << w << " gamma=" << gamma << " target=" << target << " d1=" << d1);
        CHECK(std::abs(r.point - ref) <= 1e-7);
        CHECK(r.residual <= 1e-9);
        CHECK(std::abs(r.point) <= std::abs(target));
        CHECK(r.point * target >= 0.0);
    }
}

TEST_CASE("huber_power") {
    const HuberParams d{1.0, 0.01};
    CHECK(prox::huber_power(1.0, 1.7, 1.0, 0.0, d).point == 0.0);
    CHECK_THROWS_AS(prox::huber_power(1.0, 0.9, 1.0, 1.0, d), std::domain_error);
    const auto r = prox::huber_power(0.5, 1.7, 1.0, 1.3, d);
    const double ref = golden_ld([](ld t) { return 0.5L * std::pow(huber_ld(t, 1, 0.01L), 1.7L) + (t - 1.3L) * (t - 1.3L) / 2; }, -3, 3);
    CHECK(std::abs(r.point - ref) <= 1e-8);
    // p = 1 coincides with the weighted pseudo-Huber prox.
    for (double t : {-2.0, 0.4, 5.0}) {
        CHECK(prox::huber_power(0.8, 1.0, 1.5, t, d).point ==
              doctest::Approx(prox::weighted_huber(0.8, 1.5, t, 1.0).point).epsilon(1e-10));
    }
    Philox rng(32);
    for (int k = 0; k < 1000; ++k) {
        const double w = 2.0 * rng.uniform(), p = 1.0 + 2.5 * rng.uniform(), gamma = 0.05 + 1.5 * rng.uniform();
        const double target = -5.0 + 10.0 * rng.uniform();
        const HuberParams dd{0.2 + rng.uniform(), 0.01};
        const auto res = prox::huber_power(w, p, gamma, target, dd);
        const double ref = golden_ld(
            [&](ld t) {
                return gamma * w * std::pow(huber_ld(t, dd.delta1, dd.delta2), static_cast<ld>(p)) + (t - target) * (t - target) / 2;
            },
            -6, 6);
        INFO("w=" << w << " p=" << p << " gamma=" << gamma << " target=" << target);
        CHECK(std::abs(res.point - ref) <= 1e-7);
        CHECK(res.residual <= 1e-9);
    }
}

TEST_CASE("scalar proxes are nonexpansive") {
    Philox rng(33);
    const HuberParams d{1.0, 0.01};
    for (int k = 0; k < 1000; ++k) {
        const double a = -5 + 10 * rng.uniform(), b = -5 + 10 * rng.uniform();
        const double w = 2 * rng.uniform(), p = 1 + 2 * rng.uniform();
        CHECK(std::abs(prox::weighted_huber(w, 1.0, a, 1.0).point - prox::weighted_huber(w, 1.0, b, 1.0).point) <=
              std::abs(a - b) * (1 + 1e-12) + 1e-12);
        CHECK(std::abs(prox::huber_power(w, p, 1.0, a, d).point - prox::huber_power(w, p, 1.0, b, d).point) <=
              std::abs(a - b) * (1 + 1e-12) + 1e-12);
        const Vec pa = prox::project_box(Vec{a}, -1, 2), pb = prox::project_box(Vec{b}, -1, 2);
        CHECK(std::abs(pa[0] - pb[0]) <= std::abs(a - b));
    }
}

TEST_CASE("group_l12") {
    GradField v(3);
    v.horizontal = {0.0, 3.0, 3.0};
    v.vertical = {0.0, 4.0, 4.0};
    GradField out = prox::group_l12(v, 5.0);
    CHECK(out.horizontal[0] == 0.0);
    CHECK(out.horizontal[1] == 0.0);
    CHECK(out.vertical[1] == 0.0);
    out = prox::group_l12(v, 1.0);
    CHECK(out.horizontal[1] == doctest::Approx(2.4).epsilon(1e-15));
    CHECK(out.vertical[1] == doctest::Approx(3.2).epsilon(1e-15));
    // v - out lies in thr * subdifferential of |.| at out: parallel to out with norm thr.
    const double rh = 3.0 - out.horizontal[1], rv = 4.0 - out.vertical[1];
    CHECK(std::hypot(rh, rv) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(rh * out.vertical[1] - rv * out.horizontal[1] == doctest::Approx(0.0).scale(1.0).epsilon(1e-14));

    Philox rng(34);
    for (int k = 0; k < 200; ++k) {
        const std::size_t n = 16;
        GradField a(n);
        a.horizontal = oracle::random_vec(n, rng, -3, 3);
        a.vertical = oracle::random_vec(n, rng, -3, 3);
        const double thr = 2.0 * rng.uniform() + 1e-3;
        const GradField p = prox::group_l12(a, thr);
        GradField inplace = a;
        prox::group_l12_inplace(inplace, thr);
        for (std::size_t i = 0; i < n; ++i) {
            // Moreau: v = prox(v) + projection onto the l_{inf,2} ball of radius thr.
            const double nrm = std::hypot(a.horizontal[i], a.vertical[i]);
            const double s = std::min(1.0, thr / nrm);
            CHECK(std::abs(p.horizontal[i] + s * a.horizontal[i] - a.horizontal[i]) <= 1e-10);
            CHECK(std::abs(p.vertical[i] + s * a.vertical[i] - a.vertical[i]) <= 1e-10);
            CHECK(inplace.horizontal[i] == p.horizontal[i]);
        }
        GradField b(n);
        b.horizontal = oracle::random_vec(n, rng, -3, 3);
        b.vertical = oracle::random_vec(n, rng, -3, 3);
        const GradField pb = prox::group_l12(b, thr);
        double din = 0, dout = 0;
        for (std::size_t i = 0; i < n; ++i) {
            din += std::pow(a.horizontal[i] - b.horizontal[i], 2) + std::pow(a.vertical[i] - b.vertical[i], 2);
            dout += std::pow(p.horizontal[i] - pb.horizontal[i], 2) + std::pow(p.vertical[i] - pb.vertical[i], 2);
        }
        CHECK(dout <= din * (1 + 1e-12));
    }
}

TEST_CASE("shape prox derivative matches finite differences") {
    prox::ShapeProxParams s{0.4, -0.3, 1.2, 1.0, 0.7, 0.5};
    auto obj = [&](double t) {
        const double u = t - s.dual / s.sigma;
        return std::exp(t * (s.log_coeff - s.beta)) + specfun::log_gamma(1.0 + 1.0 / t) +
               (t - s.anchor) * (t - s.anchor) / (2 * s.gamma1) + 0.5 * s.sigma * u * u;
    };
    for (double t : {0.05, 0.3, 1.0, 2.5, 8.0}) {
        CHECK(prox::shape_prox_derivative(t, s) == doctest::Approx(oracle::central_diff(obj, t, 1e-6)).epsilon(1e-6));
    }
}

TEST_CASE("shape prox oracle suite") {
    Philox rng(35);
    auto draw = [&](double lo, double hi) { return lo + (hi - lo) * rng.uniform(); };
    for (int k = 0; k < 1000; ++k) {
        prox::ShapeProxParams s;
        s.log_coeff = draw(-3, 3);
        s.beta = draw(-2, 2);
        s.anchor = draw(0.05, 10);
        s.gamma1 = draw(0.1, 8.8);
        s.sigma = draw(0.1, 2);
        s.dual = s.sigma * draw(-5, 20);
        const auto r = prox::shape_scalar(s);
        const double ref = golden_ld(
            [&](ld t) {
                const ld u = t - static_cast<ld>(s.dual) / s.sigma;
                return std::exp(t * static_cast<ld>(s.log_coeff - s.beta)) + std::lgamma(1.0L + 1.0L / t) +
                       (t - s.anchor) * (t - s.anchor) / (2 * static_cast<ld>(s.gamma1)) + 0.5L * s.sigma * u * u;
            },
            1e-6L, 40.0L);
        INFO("lc=" << s.log_coeff << " beta=" << s.beta << " anchor=" << s.anchor << " g1=" << s.gamma1
                   << " sigma=" << s.sigma << " dual=" << s.dual);
        CHECK(r.point > 0.0);
        CHECK(std::abs(r.point - ref) <= 1e-7);
        CHECK(std::abs(prox::shape_prox_derivative(r.point, s)) <= 1e-9);
    }
}

TEST_CASE("shape prox with a flat exponential term") {
    // log_coeff == beta: the exponential contributes a constant.
    prox::ShapeProxParams s{0.3, 0.3, 1.5, 1.0, 0.2, 1.0};
    const double ref = golden_ld(
        [&](ld t) { return std::lgamma(1.0L + 1.0L / t) + (t - 1.5L) * (t - 1.5L) / 2 + 0.5L * (t - 0.2L) * (t - 0.2L); }, 1e-4L,
        20.0L);
    CHECK(std::abs(prox::shape_scalar(s).point - ref) <= 1e-8);
}

TEST_CASE("scale prox") {
    CHECK(prox::scale_scalar(0.0, 2.0, 0.7, 1.3) == doctest::Approx(-1.4).epsilon(1e-15));
    CHECK(prox::scale_scalar(1.0, 1.0, 0.0, 1.0) == doctest::Approx(0.567143290409783873).epsilon(1e-15));
    CHECK_THROWS_AS(prox::scale_scalar(1.0, 0.0, 0.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(prox::scale_scalar(-1.0, 1.0, 0.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(prox::scale_scalar(1.0, 1.0, 0.0, 0.0), std::invalid_argument);

    Philox rng(36);
    auto draw = [&](double lo, double hi) { return lo + (hi - lo) * rng.uniform(); };
    for (int k = 0; k < 1000; ++k) {
        const double a1 = std::exp(draw(-10, 10)), a2 = draw(0.05, 3), a3 = draw(-20, 20), p = draw(0.05, 5);
        const double b = prox::scale_scalar(a1, a2, a3, p);
        // Independent: bisection on the increasing stationarity map in extended precision.
        auto g = [&](ld t) { return -static_cast<ld>(a1) * std::exp(-static_cast<ld>(p) * t) + t / a2 + a3; };
        ld lo = -1.0L, hi = 1.0L;
        while (g(lo) > 0) lo *= 2;
        while (g(hi) < 0) hi *= 2;
        for (int it = 0; it < 300; ++it) {
            const ld mid = (lo + hi) / 2;
            (g(mid) > 0 ? hi : lo) = mid;
        }
        const double ref = static_cast<double>((lo + hi) / 2);
        INFO("a1=" << a1 << " a2=" << a2 << " a3=" << a3 << " p=" << p);
        CHECK(std::abs(b - ref) <= 1e-7 * std::max(1.0, std::abs(ref)));
        const double scale = std::max({1.0, std::abs(a3), std::abs(b / a2), a1 * std::exp(-p * b)});
        CHECK(std::abs(prox::scale_stationarity(b, a1, a2, a3, p)) <= 1e-9 * scale);
        // Log-domain entry point agrees with the naive form where exp does not overflow.
        const double z = std::log(p * a1 * a2) + p * a2 * a3;
        if (z < 700) {
            const double naive = specfun::lambert_w(std::exp(z)) / p - a2 * a3;
            CHECK(std::abs(b - naive) <= 1e-9 * std::max(1.0, std::abs(b)));
        }
    }
    // Arguments whose Lambert input overflows a double.
    const double big = prox::scale_scalar_log(50.0, 2.0, 300.0, 3.0);
    CHECK(std::isfinite(big));
    CHECK(std::abs(-std::exp(50.0 - 3.0 * big) + big / 2.0 + 300.0) <= 1e-9 * 300.0);
}

TEST_CASE("project_box") {
    CHECK(prox::project_box(Vec{0.5, 1.0}, 0.0, 2.0) == Vec{0.5, 1.0});
    CHECK(prox::project_box(Vec{-1.0}, 0.0, 2.0) == Vec{0.0});
    Philox rng(37);
    const Vec u = oracle::random_vec(100, rng, -5, 5);
    const Vec p = prox::project_box(u, -1.0, 2.0);
    for (std::size_t i = 0; i < u.size(); ++i) {
        // Nearest box point, componentwise.
        double best = -1.0, bestd = 1e300;
        for (double c = -1.0; c <= 2.0; c += 1e-4) {
            if (std::abs(c - u[i]) < bestd) bestd = std::abs(c - u[i]), best = c;
        }
        CHECK(std::abs(p[i] - best) <= 1e-4);
        CHECK(p[i] >= -1.0);
        CHECK(p[i] <= 2.0);
    }
}
