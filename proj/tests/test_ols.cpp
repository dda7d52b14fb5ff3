#include <doctest.h>

#include <cmath>
#include <limits>

#include "repdiv/errors.hpp"
#include "repdiv/ols.hpp"
#include "repdiv/rng.hpp"

using namespace repdiv;

TEST_CASE("planted noiseless line is recovered exactly") {
    Vector x{0.0, 0.1, 0.25, 0.4, 0.8, 1.3};
    Vector y;
    for (double v : x) y.push_back(0.9 - 0.3424 * v);
    OlsFit fit = ols_fit(x, y);
    CHECK(fit.coefficient == doctest::Approx(-0.3424).epsilon(1e-12));
    CHECK(fit.intercept == doctest::Approx(0.9).epsilon(1e-12));
    CHECK(fit.r_squared == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fit.p_value <= 1e-12);
}

TEST_CASE("hand-computed slope on a tiny dataset") {
    // x = {1,2,3}, y = {2,2,5}: slope = cov/var = 3/2, intercept = 0.
    Vector x{1, 2, 3}, y{2, 2, 5};
    OlsFit fit = ols_fit(x, y);
    CHECK(fit.coefficient == doctest::Approx(1.5));
    CHECK(fit.intercept == doctest::Approx(0.0));
    // SSE = (2-1.5)^2 + (2-3)^2 + (5-4.5)^2 = 1.5, SST = 6, R^2 = 0.75.
    CHECK(fit.r_squared == doctest::Approx(0.75));
    CHECK(fit.n_observations == 3);
}

TEST_CASE("constant x is a degenerate design") {
    CHECK_THROWS_AS(ols_fit(Vector{2, 2, 2, 2}, Vector{1, 2, 3, 4}),
                    DegenerateDesignError);
}

TEST_CASE("too few observations for the F test") {
    CHECK_THROWS_AS(ols_fit(Vector{1, 2}, Vector{1, 2}), DegenerateDesignError);
}

TEST_CASE("constant y yields a flat fit with p = 1") {
    OlsFit fit = ols_fit(Vector{1, 2, 3, 4}, Vector{7, 7, 7, 7});
    CHECK(fit.coefficient == 0.0);
    CHECK(fit.r_squared == 0.0);
    CHECK(fit.p_value == 1.0);
}

TEST_CASE("noisy negative relation is significant at scale") {
    Rng rng(12);
    Vector x, y;
    for (int i = 0; i < 30; ++i) {
        double xi = rng.next_uniform();
        x.push_back(xi);
        y.push_back(1.0 - 0.35 * xi + rng.next_gaussian(0.0, 0.02));
    }
    OlsFit fit = ols_fit(x, y);
    CHECK(fit.coefficient < -0.25);
    CHECK(fit.p_value < 1e-6);
    CHECK(fit.r_squared > 0.7);
}

TEST_CASE("incomplete beta closed forms") {
    // I_x(1, 1) = x; I_x(1/2, 1/2) = (2/pi) asin(sqrt(x)).
    for (double x : {0.1, 0.37, 0.5, 0.82}) {
        CHECK(incomplete_beta(1.0, 1.0, x) == doctest::Approx(x).epsilon(1e-10));
        CHECK(incomplete_beta(0.5, 0.5, x) ==
              doctest::Approx(2.0 / M_PI * std::asin(std::sqrt(x))).epsilon(1e-9));
    }
}

TEST_CASE("F survival matches the classic 5% table entry") {
    // F(1, 8) upper 5% critical value is 5.318.
    CHECK(f_survival(5.318, 1, 8) == doctest::Approx(0.05).epsilon(2e-3));
    // Monotone decreasing in f.
    CHECK(f_survival(1.0, 1, 8) > f_survival(2.0, 1, 8));
    CHECK(f_survival(0.0, 1, 8) == doctest::Approx(1.0));
}
