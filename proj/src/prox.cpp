#include "ggdseg/prox.hpp"

#include "ggdseg/specfun.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace ggdseg::prox {

namespace {

// Root of a nondecreasing function on a bracket [lo, hi] with
// deriv(lo) <= 0 <= deriv(hi). Newton steps are taken when they stay inside
// the current bracket, bisection otherwise.
template <typename D1, typename D2>
ProxResult monotone_root(D1&& deriv, D2&& second, double lo, double hi, double start, ScalarTolerance tol) {
    ProxResult r;
    double t = std::clamp(start, lo, hi);
    double g = deriv(t);
    for (r.iterations = 0; r.iterations < tol.max_iters; ++r.iterations) {
        if (std::abs(g) <= tol.derivative) break;
        if (g > 0.0) {
            hi = t;
        } else {
            lo = t;
        }
        double next = t - g / second(t);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (next == t || hi - lo <= 2.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(lo), std::abs(hi))) {
            break;
        }
        t = next;
        g = deriv(t);
    }
    r.point = t;
    r.residual = std::abs(g);
    return r;
}

}  // namespace

ProxResult weighted_huber(double weight, double gamma, double target, double delta1, ScalarTolerance tol) {
    const double scale = gamma * weight;
    if (scale == 0.0 || target == 0.0) return {target, 0.0, 0};
    const double d2 = delta1 * delta1;
    auto deriv = [&](double t) { return scale * t / std::sqrt(t * t + d2) + t - target; };
    auto second = [&](double t) {
        const double h2 = t * t + d2;
        return scale * d2 / (h2 * std::sqrt(h2)) + 1.0;
    };
    const double lo = std::min(0.0, target);
    const double hi = std::max(0.0, target);
    // The unweighted prox of |t| is a good start: soft thresholding.
    const double start = target > 0.0 ? std::max(0.0, target - scale) : std::min(0.0, target + scale);
    return monotone_root(deriv, second, lo, hi, start, tol);
}

ProxResult huber_power(double weight, double power, double gamma, double target, const HuberParams& d,
                       ScalarTolerance tol) {
    if (power < 1.0) throw std::domain_error("huber_power: exponent below 1 is not convex");
    const double scale = gamma * weight;
    if (scale == 0.0 || target == 0.0) return {target, 0.0, 0};
    const double d2 = d.delta1 * d.delta1;
    auto deriv = [&](double t) {
        const double h = std::sqrt(t * t + d2);
        const double c = h - d.delta2;
        return scale * power * std::pow(c, power - 1.0) * (t / h) + t - target;
    };
    auto second = [&](double t) {
        const double h = std::sqrt(t * t + d2);
        const double c = h - d.delta2;
        const double c1 = t / h;
        const double c2 = d2 / (h * h * h);
        const double cp2 = power == 1.0 ? 0.0 : (power - 1.0) * std::pow(c, power - 2.0) * c1 * c1;
        return scale * power * (cp2 + std::pow(c, power - 1.0) * c2) + 1.0;
    };
    const double lo = std::min(0.0, target);
    const double hi = std::max(0.0, target);
    return monotone_root(deriv, second, lo, hi, 0.5 * target, tol);
}

void group_l12_inplace(GradField& v, double threshold) {
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double nrm = std::hypot(v.horizontal[i], v.vertical[i]);
        const double factor = nrm <= threshold ? 0.0 : 1.0 - threshold / nrm;
        v.horizontal[i] *= factor;
        v.vertical[i] *= factor;
    }
}

GradField group_l12(const GradField& v, double threshold) {
    GradField out = v;
    group_l12_inplace(out, threshold);
    return out;
}

double shape_prox_derivative(double t, const ShapeProxParams& s) {
    const double slope = s.log_coeff - s.beta;
    const double inv = 1.0 / t;
    return slope * std::exp(slope * t) - specfun::digamma(1.0 + inv) * inv * inv + (t - s.anchor) / s.gamma1 +
           s.sigma * t - s.dual;
}

namespace {

double shape_prox_second(double t, const ShapeProxParams& s) {
    const double slope = s.log_coeff - s.beta;
    const double inv = 1.0 / t;
    const double arg = 1.0 + inv;
    return slope * slope * std::exp(slope * t) + inv * inv * inv * (2.0 * specfun::digamma(arg) + inv * specfun::trigamma(arg)) +
           1.0 / s.gamma1 + s.sigma;
}

}  // namespace

ProxResult shape_scalar(const ShapeProxParams& s, ScalarTolerance tol) {
    auto deriv = [&](double t) { return shape_prox_derivative(t, s); };
    ProxResult r;
    double t = std::max(1e-3, s.dual / s.sigma);
    double lo = 0.0;  // derivative -> -inf as t -> 0+
    double hi = std::numeric_limits<double>::infinity();
    double g = deriv(t);
    for (r.iterations = 0; r.iterations < tol.max_iters; ++r.iterations) {
        if (std::abs(g) <= tol.derivative) {
            r.point = t;
            r.residual = std::abs(g);
            return r;
        }
        if (g > 0.0 || std::isnan(g)) {
            hi = t;
        } else {
            lo = t;
        }
        const double h = shape_prox_second(t, s);
        double step = (std::isfinite(g) && std::isfinite(h) && h > 0.0) ? g / h : std::numeric_limits<double>::quiet_NaN();
        double next = t - step;
        // Damp steps that leave the positive axis.
        if (std::isfinite(next)) {
            while (next <= 0.0) {
                step *= 0.5;
                next = t - step;
            }
        }
        if (!(next > lo && next < hi)) {
            // Bisection on the bracket, expanded geometrically while one side is open.
            next = std::isinf(hi) ? 2.0 * std::max(t, 1.0) : 0.5 * (lo + hi);
        }
        if (next == t) break;
        t = next;
        g = deriv(t);
    }
    r.point = t;
    r.residual = std::abs(g);
    // A bracket collapsed to a few ulps is as converged as doubles allow.
    const bool collapsed = std::isfinite(hi) && hi - lo <= 8.0 * std::numeric_limits<double>::epsilon() * hi;
    if (r.residual <= tol.derivative || collapsed) return r;
    throw std::runtime_error("shape_scalar: no convergence, residual " + std::to_string(r.residual) + " at t=" +
                             std::to_string(t));
}

double scale_scalar_log(double log_a1, double a2, double a3, double p) {
    if (!(a2 > 0.0)) throw std::invalid_argument("scale_scalar: a2 must be positive");
    if (!(p > 0.0)) throw std::invalid_argument("scale_scalar: p must be positive");
    const double shift = a2 * a3;
    if (log_a1 == -std::numeric_limits<double>::infinity()) return -shift;
    const double z = std::log(p * a2) + log_a1 + p * shift;
    return specfun::lambert_w_of_exp(z) / p - shift;
}

double scale_scalar(double a1, double a2, double a3, double p) {
    if (a1 < 0.0) throw std::invalid_argument("scale_scalar: a1 must be nonnegative");
    return scale_scalar_log(a1 == 0.0 ? -std::numeric_limits<double>::infinity() : std::log(a1), a2, a3, p);
}

double scale_stationarity(double b, double a1, double a2, double a3, double p) {
    return -a1 * std::exp(-p * b) + b / a2 + a3;
}

Vec project_box(std::span<const double> u, double lo, double hi) {
    Vec out(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) out[i] = std::clamp(u[i], lo, hi);
    return out;
}

}  // namespace ggdseg::prox
