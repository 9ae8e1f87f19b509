#include "ggdseg/specfun.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace ggdseg::specfun {

namespace {

constexpr double kInvE = 0.36787944117144233;  // 1/e

void require_positive(double t, const char* name) {
    if (!(t > 0.0) || !std::isfinite(t)) {
        throw std::domain_error(std::string(name) + ": argument must be positive and finite, got " +
                                std::to_string(t));
    }
}

}  // namespace

double log_gamma(double t) {
    require_positive(t, "log_gamma");
    return boost::math::lgamma(t);
}

double digamma(double t) {
    require_positive(t, "digamma");
    // Upward recurrence psi(t) = psi(t + 1) - 1/t until the asymptotic series
    // is accurate to well below 1e-13.
    double shift = 0.0;
    while (t < 8.0) {
        shift -= 1.0 / t;
        t += 1.0;
    }
    const double inv = 1.0 / t;
    const double inv2 = inv * inv;
    // Bernoulli terms B_{2k} / (2k t^{2k}), k = 1..7.
    const double series =
        inv2 * (1.0 / 12.0 -
                inv2 * (1.0 / 120.0 -
                        inv2 * (1.0 / 252.0 -
                                inv2 * (1.0 / 240.0 -
                                        inv2 * (1.0 / 132.0 -
                                                inv2 * (691.0 / 32760.0 - inv2 * (1.0 / 12.0)))))));
    return shift + std::log(t) - 0.5 * inv - series;
}

double trigamma(double t) {
    require_positive(t, "trigamma");
    double shift = 0.0;
    while (t < 10.0) {
        shift += 1.0 / (t * t);
        t += 1.0;
    }
    const double inv = 1.0 / t;
    const double inv2 = inv * inv;
    // 1/t + 1/(2t^2) + sum_k B_{2k} / t^{2k+1}
    const double series =
        inv * inv2 *
        (1.0 / 6.0 -
         inv2 * (1.0 / 30.0 -
                 inv2 * (1.0 / 42.0 -
                         inv2 * (1.0 / 30.0 - inv2 * (5.0 / 66.0 - inv2 * (691.0 / 2730.0 - inv2 * (7.0 / 6.0)))))));
    return shift + inv + 0.5 * inv2 + series;
}

double lambert_w(double y) {
    if (std::isnan(y) || y < -kInvE) {
        throw std::domain_error("lambert_w: argument below -1/e");
    }
    if (y == 0.0) return 0.0;
    if (std::isinf(y)) return y;

    double w;
    const double branch = 2.0 * (std::exp(1.0) * y + 1.0);
    if (branch <= 0.0) return -1.0;
    if (y < -0.25) {
        // Puiseux expansion around the branch point.
        const double p = std::sqrt(branch);
        w = -1.0 + p * (1.0 + p * (-1.0 / 3.0 + p * (11.0 / 72.0)));
    } else if (y < 3.0) {
        w = std::log1p(y);
        if (y < 0.5) w = y * (1.0 - y * (1.0 - 1.5 * y));
    } else {
        const double l1 = std::log(y);
        const double l2 = std::log(l1);
        w = l1 - l2 + l2 / l1;
    }

    // Halley refinement.
    for (int it = 0; it < 32; ++it) {
        const double ew = std::exp(w);
        const double f = w * ew - y;
        const double wp1 = w + 1.0;
        if (wp1 == 0.0) break;
        const double denom = ew * wp1 - 0.5 * (w + 2.0) * f / wp1;
        const double step = f / denom;
        w -= step;
        if (std::abs(step) <= 4.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(w))) break;
    }
    return w;
}

double lambert_w_of_exp(double z) {
    if (std::isnan(z)) throw std::domain_error("lambert_w_of_exp: NaN exponent");
    if (z == std::numeric_limits<double>::infinity()) return z;
    if (z < -700.0) {
        // W(y) = y - y^2 + ... and y = exp(z) is below 1e-304.
        return std::exp(z);
    }
    if (z <= 2.0) return lambert_w(std::exp(z));

    // Solve w + ln w = z by Newton, which is the logarithm of w e^w = e^z.
    double w = z - std::log(z);
    for (int it = 0; it < 64; ++it) {
        const double f = w + std::log(w) - z;
        const double step = f * w / (w + 1.0);
        double next = w - step;
        if (next <= 0.0) next = 0.5 * w;
        const bool done = std::abs(next - w) <= 4.0 * std::numeric_limits<double>::epsilon() * next;
        w = next;
        if (done) break;
    }
    return w;
}

double digamma_root() {
    double t = 1.46;
    for (int it = 0; it < 50; ++it) {
        const double step = digamma(t) / trigamma(t);
        t -= step;
        if (std::abs(step) < 1e-15) break;
    }
    return t;
}

}  // namespace ggdseg::specfun
