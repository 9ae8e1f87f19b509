#pragma once

#include "ggdseg/linops.hpp"
#include "ggdseg/model.hpp"

#include <span>

namespace ggdseg::prox {

struct ProxResult {
    double point = 0.0;
    // |derivative of the prox objective| at `point`.
    double residual = 0.0;
    int iterations = 0;
};

struct ScalarTolerance {
    double derivative = 1e-10;
    int max_iters = 200;
};

// argmin_t  gamma * w * sqrt(t^2 + d1^2) + (t - target)^2 / 2
ProxResult weighted_huber(double weight, double gamma, double target, double delta1, ScalarTolerance tol = {});

// argmin_t  gamma * w * C(t)^p + (t - target)^2 / 2, for p >= 1.
// Throws std::domain_error for p < 1 (that branch goes through the MM majorant).
ProxResult huber_power(double weight, double power, double gamma, double target, const HuberParams& d,
                       ScalarTolerance tol = {});

// Rowwise block soft-thresholding: v_i * max(0, 1 - thr / |v_i|).
GradField group_l12(const GradField& v, double threshold);
void group_l12_inplace(GradField& v, double threshold);

// Parameters of the per-pixel shape subproblem
//   min_{t > 0}  exp(t * (log_coeff - beta)) + ln Gamma(1 + 1/t)
//                + (t - anchor)^2 / (2 gamma1) + (sigma / 2) (t - dual / sigma)^2
// where log_coeff = ln C(x_i), anchor = p_i of the previous outer iterate, and
// (dual, sigma) come from the primal-dual loop.
struct ShapeProxParams {
    double log_coeff = 0.0;
    double beta = 0.0;
    double anchor = 1.0;
    double gamma1 = 1.0;
    double dual = 0.0;
    double sigma = 1.0;
};

// Derivative of the shape subproblem objective; its unique root is the prox.
double shape_prox_derivative(double t, const ShapeProxParams& s);

// Newton from max(1e-3, dual / sigma), step-halved to stay positive and
// safeguarded by bisection. Throws std::runtime_error after 200 steps
// without reaching the residual tolerance (default 1e-9).
ProxResult shape_scalar(const ShapeProxParams& s, ScalarTolerance tol = {1e-9, 200});

// Closed-form stationary point of
//   a1 exp(-p b) / p + b^2 / (2 a2) + a3 b
// i.e. the root of -a1 exp(-p b) + b / a2 + a3, via the Lambert function:
//   b* = W(p a1 a2 exp(p a2 a3)) / p - a2 a3.
// Throws std::invalid_argument for a2 <= 0, a1 < 0 or p <= 0.
double scale_scalar(double a1, double a2, double a3, double p);
// Same, taking ln(a1); use when a1 itself may overflow.
double scale_scalar_log(double log_a1, double a2, double a3, double p);
double scale_stationarity(double b, double a1, double a2, double a3, double p);

Vec project_box(std::span<const double> u, double lo, double hi);

}  // namespace ggdseg::prox
