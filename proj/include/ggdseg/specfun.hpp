#pragma once

// Scalar special functions used by the shape and scale proximal steps.
// All functions are pure and reentrant.

namespace ggdseg::specfun {

// ln Gamma(t) for t > 0. Throws std::domain_error otherwise.
double log_gamma(double t);

// Logarithmic derivative of Gamma. Throws std::domain_error for t <= 0.
double digamma(double t);

// Derivative of digamma; strictly positive on (0, inf).
double trigamma(double t);

// Principal branch W0 of the Lambert function, y >= -1/e.
double lambert_w(double y);

// W0(exp(z)) evaluated without forming exp(z), so that it stays finite for
// exponents far beyond the double range.
double lambert_w_of_exp(double z);

// Root of digamma on (1, 2), the minimiser of Gamma on the positive axis.
double digamma_root();

}  // namespace ggdseg::specfun
