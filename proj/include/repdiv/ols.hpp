#pragma once

#include "repdiv/matrix.hpp"

namespace repdiv {

struct OlsFit {
    double intercept = 0.0;
    double coefficient = 0.0;
    double r_squared = 0.0;
    double f_statistic = 0.0;  // F(1, n-2) for the slope; +inf on perfect fits
    double p_value = 1.0;      // upper tail of that F distribution
    std::size_t n_observations = 0;
};

// Ordinary least squares fit of y = intercept + coefficient * x, with the
// textbook F test on the slope. Requires n >= 3 and nonconstant x (throws
// DegenerateDesignError otherwise). Constant y is legal: coefficient 0,
// r_squared 0, p_value 1.
OlsFit ols_fit(const Vector& x, const Vector& y);

// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double incomplete_beta(double a, double b, double x);

// Upper tail P(F(d1, d2) > f).
double f_survival(double f, double d1, double d2);

}  // namespace repdiv
