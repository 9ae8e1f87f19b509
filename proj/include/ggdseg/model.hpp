#pragma once

#include "ggdseg/linops.hpp"

#include <span>

namespace ggdseg {

// Joint unknowns: image x, per-pixel shape map p and reparameterised scale
// map beta = ln(alpha) / p.
struct State {
    Vec x;
    Vec p;
    Vec beta;

    std::size_t size() const { return x.size(); }
};

// Pseudo-Huber smoothing C(t) = sqrt(t^2 + d1^2) - d2 with 0 < d2 < d1.
struct HuberParams {
    double delta1 = 1.0;
    double delta2 = 0.01;
};

struct Hyperparams {
    double noise_std = 0.05;  // sigma, assumed known
    HuberParams huber{};
    double shape_min = 0.5;   // a
    double shape_max = 3.0;   // b
    double tv_shape = 1.0;    // lambda
    double tv_scale = 20.0;   // zeta
    double mu_beta = 0.0;
    double sigma_beta = 1.0;
    double gamma0 = 0.99;
    double gamma1 = 1.0;
    double gamma2 = 1.0;
    MetricMode metric = MetricMode::lipschitz;
    double precond_mu = 0.1;

    // Throws std::invalid_argument listing the first violated constraint.
    void validate() const;
};

// 2 * E * (t0 - 1)^3 with t0 the digamma root: below this modulus
// t -> ln Gamma(1 + 1/t) fails to be weakly convex.
double weak_convexity_modulus();

double pseudo_huber(double t, const HuberParams& d);
double pseudo_huber_derivative(double t, const HuberParams& d);

// sum_i C(x_i)^{p_i} exp(-beta_i p_i), accumulated in log domain.
double eval_q(std::span<const double> x, std::span<const double> p, std::span<const double> beta,
              const HuberParams& d);
Vec grad_q_x(std::span<const double> x, std::span<const double> p, std::span<const double> beta,
             const HuberParams& d);

double eval_f(std::span<const double> x, std::span<const double> y, const ConvOperator& conv, double noise_std);
Vec grad_f(std::span<const double> x, std::span<const double> y, const ConvOperator& conv, double noise_std);

// Isotropic total variation, the l_{1,2} norm of the Neumann gradient.
double eval_tv(std::span<const double> u, const GradOperator& grad);
double l12_norm(const GradField& v);

// +infinity when any p_i lies outside [a, b].
double eval_g1(std::span<const double> p, const GradOperator& grad, const Hyperparams& hyper);
double eval_g2(std::span<const double> beta, const GradOperator& grad, const Hyperparams& hyper);

struct ObjectiveParts {
    double q = 0.0;
    double f = 0.0;
    double g1 = 0.0;
    double g2 = 0.0;

    double total() const { return q + f + g1 + g2; }
};

ObjectiveParts eval_objective_parts(const State& s, std::span<const double> y, const ConvOperator& conv,
                                    const Hyperparams& hyper);
double eval_objective(const State& s, std::span<const double> y, const ConvOperator& conv, const Hyperparams& hyper);

}  // namespace ggdseg
