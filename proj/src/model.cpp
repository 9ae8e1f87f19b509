#include "ggdseg/model.hpp"

#include "ggdseg/specfun.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace ggdseg {

namespace {

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument("Hyperparams: " + msg);
}

void check_lengths(std::size_t a, std::size_t b, std::size_t c) {
    if (a != b || a != c) throw std::invalid_argument("model: inconsistent vector lengths");
}

void check_finite(std::span<const double> v, const char* what) {
    for (double e : v) {
        if (std::isnan(e)) throw std::invalid_argument(std::string(what) + ": NaN entry");
    }
}

}  // namespace

double weak_convexity_modulus() {
    const double euler = -specfun::digamma(1.0);
    const double t0 = specfun::digamma_root();
    return 2.0 * euler * (t0 - 1.0) * (t0 - 1.0) * (t0 - 1.0);
}

void Hyperparams::validate() const {
    require(noise_std > 0.0, "noise_std must be positive");
    require(huber.delta1 > 0.0 && huber.delta2 > 0.0, "delta1 and delta2 must be positive");
    require(huber.delta2 < huber.delta1, "delta2 must be smaller than delta1");
    require(shape_min > 0.0 && shape_min < shape_max, "shape box must satisfy 0 < a < b");
    require(tv_shape >= 0.0 && tv_scale >= 0.0, "TV weights must be nonnegative");
    require(sigma_beta > 0.0, "sigma_beta must be positive");
    require(gamma0 > 0.0 && gamma0 < 1.0, "gamma0 must lie in (0, 1)");
    require(gamma1 > 0.0 && gamma1 < 1.0 / weak_convexity_modulus(), "gamma1 must lie in (0, 1/mu0) ~ (0, 8.805)");
    require(gamma2 > 0.0, "gamma2 must be positive");
    require(precond_mu > 0.0, "precond_mu must be positive");
    for (double v : {noise_std, huber.delta1, huber.delta2, shape_min, shape_max, tv_shape, tv_scale, mu_beta,
                     sigma_beta, gamma0, gamma1, gamma2, precond_mu}) {
        require(std::isfinite(v), "all parameters must be finite");
    }
}

double pseudo_huber(double t, const HuberParams& d) { return std::hypot(t, d.delta1) - d.delta2; }

double pseudo_huber_derivative(double t, const HuberParams& d) { return t / std::hypot(t, d.delta1); }

double eval_q(std::span<const double> x, std::span<const double> p, std::span<const double> beta,
              const HuberParams& d) {
    check_lengths(x.size(), p.size(), beta.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(p[i] > 0.0)) throw std::invalid_argument("eval_q: shape entries must be positive");
        sum += std::exp(p[i] * (std::log(pseudo_huber(x[i], d)) - beta[i]));
    }
    return sum;
}

Vec grad_q_x(std::span<const double> x, std::span<const double> p, std::span<const double> beta,
             const HuberParams& d) {
    check_lengths(x.size(), p.size(), beta.size());
    Vec g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(p[i] > 0.0)) throw std::invalid_argument("grad_q_x: shape entries must be positive");
        const double c = pseudo_huber(x[i], d);
        // p C^{p-1} C' e^{-beta p}
        g[i] = p[i] * std::exp((p[i] - 1.0) * std::log(c) - beta[i] * p[i]) * pseudo_huber_derivative(x[i], d);
    }
    return g;
}

double eval_f(std::span<const double> x, std::span<const double> y, const ConvOperator& conv, double noise_std) {
    if (y.size() != x.size()) throw std::invalid_argument("eval_f: dimension mismatch");
    const Vec kx = conv.apply(x);
    double s = 0.0;
    for (std::size_t i = 0; i < kx.size(); ++i) {
        const double r = y[i] - kx[i];
        s += r * r;
    }
    return s / (2.0 * noise_std * noise_std);
}

Vec grad_f(std::span<const double> x, std::span<const double> y, const ConvOperator& conv, double noise_std) {
    if (y.size() != x.size()) throw std::invalid_argument("grad_f: dimension mismatch");
    Vec r = conv.apply(x);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] -= y[i];
    Vec g = conv.adjoint(r);
    const double inv = 1.0 / (noise_std * noise_std);
    for (double& v : g) v *= inv;
    return g;
}

double l12_norm(const GradField& v) {
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) s += std::hypot(v.horizontal[i], v.vertical[i]);
    return s;
}

double eval_tv(std::span<const double> u, const GradOperator& grad) { return l12_norm(grad.apply(u)); }

double eval_g1(std::span<const double> p, const GradOperator& grad, const Hyperparams& hyper) {
    check_finite(p, "eval_g1");
    double s = 0.0;
    for (double v : p) {
        if (v < hyper.shape_min || v > hyper.shape_max) return std::numeric_limits<double>::infinity();
        s += specfun::log_gamma(1.0 + 1.0 / v);
    }
    return s + hyper.tv_shape * eval_tv(p, grad);
}

double eval_g2(std::span<const double> beta, const GradOperator& grad, const Hyperparams& hyper) {
    check_finite(beta, "eval_g2");
    const double inv = 1.0 / (2.0 * hyper.sigma_beta * hyper.sigma_beta);
    double s = 0.0;
    for (double b : beta) {
        const double c = b - hyper.mu_beta;
        s += b + c * c * inv;
    }
    return s + hyper.tv_scale * eval_tv(beta, grad);
}

ObjectiveParts eval_objective_parts(const State& s, std::span<const double> y, const ConvOperator& conv,
                                    const Hyperparams& hyper) {
    check_lengths(s.x.size(), s.p.size(), s.beta.size());
    check_finite(s.x, "eval_objective");
    const GradOperator grad(conv.grid());
    ObjectiveParts parts;
    parts.g1 = eval_g1(s.p, grad, hyper);
    if (std::isinf(parts.g1)) return parts;
    parts.q = eval_q(s.x, s.p, s.beta, hyper.huber);
    parts.f = eval_f(s.x, y, conv, hyper.noise_std);
    parts.g2 = eval_g2(s.beta, grad, hyper);
    return parts;
}

double eval_objective(const State& s, std::span<const double> y, const ConvOperator& conv, const Hyperparams& hyper) {
    return eval_objective_parts(s, y, conv, hyper).total();
}

}  // namespace ggdseg
