#include "repdiv/ols.hpp"

#include <cmath>
#include <limits>

namespace repdiv {

namespace {

// Lentz continued fraction for the incomplete beta (Numerical Recipes form).
double beta_cf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 3e-16;
    constexpr double kTiny = 1e-300;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) return h;
    }
    throw ConvergenceError("incomplete_beta: continued fraction did not settle",
                           std::abs(h));
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
    if (a <= 0.0 || b <= 0.0) throw ConfigError("incomplete_beta: a, b must be > 0");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    // Use the CF on whichever side converges fast, then reflect.
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
    return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

double f_survival(double f, double d1, double d2) {
    if (f <= 0.0) return 1.0;
    if (std::isinf(f)) return 0.0;
    return incomplete_beta(0.5 * d2, 0.5 * d1, d2 / (d2 + d1 * f));
}

OlsFit ols_fit(const Vector& x, const Vector& y) {
    if (x.size() != y.size()) throw DimensionError("ols_fit: length mismatch");
    const std::size_t n = x.size();
    if (n < 3) throw DegenerateDesignError("ols_fit: need at least 3 points");

    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);

    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (sxx == 0.0) throw DegenerateDesignError("ols_fit: predictor is constant");

    OlsFit res;
    res.n_observations = n;
    res.coefficient = sxy / sxx;
    res.intercept = my - res.coefficient * mx;

    if (syy == 0.0) {
        // Constant response: flat fit with nothing to explain.
        res.r_squared = 0.0;
        res.f_statistic = 0.0;
        res.p_value = 1.0;
        return res;
    }

    const double ss_model = res.coefficient * sxy;  // = sxy^2 / sxx
    double ss_resid = syy - ss_model;
    if (ss_resid < 0.0) ss_resid = 0.0;  // round-off on near-perfect fits
    res.r_squared = ss_model / syy;

    const double df_resid = static_cast<double>(n - 2);
    if (ss_resid == 0.0) {
        res.f_statistic = std::numeric_limits<double>::infinity();
        res.p_value = 0.0;
    } else {
        res.f_statistic = ss_model / (ss_resid / df_resid);
        res.p_value = f_survival(res.f_statistic, 1.0, df_resid);
    }
    return res;
}

}  // namespace repdiv
