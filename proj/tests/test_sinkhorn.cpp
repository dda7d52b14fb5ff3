#include <doctest.h>

#include <cmath>

#include "repdiv/errors.hpp"
#include "repdiv/rng.hpp"
#include "repdiv/sinkhorn.hpp"

using namespace repdiv;

namespace {

Matrix cloud(Rng& rng, std::size_t n, std::size_t d, double sd, double shift = 0.0) {
    Matrix m(n, d);
    for (auto& v : m.data) v = rng.next_gaussian(shift, sd);
    return m;
}

}  // namespace

TEST_CASE("singleton clouds reduce to the closed-form half squared distance") {
    // OT((0,0) -> (3,4)) = ||.||^2/2 = 12.5; the self terms vanish.
    Matrix x = Matrix::from_rows({{0, 0}});
    Matrix y = Matrix::from_rows({{3, 4}});
    CHECK(sinkhorn_divergence(x, y) == doctest::Approx(12.5).epsilon(1e-3));
}

TEST_CASE("self divergence is exactly zero by construction") {
    Rng rng(31);
    Matrix x = cloud(rng, 40, 6, 1.0);
    CHECK(sinkhorn_divergence(x, x) == 0.0);
}

TEST_CASE("two-point translation matches the exact assignment cost") {
    // {(0,0),(1,0)} shifted by (0,1): optimal plan pairs each point with its
    // translate, cost 1/2 per unit mass; debiasing removes the self terms.
    Matrix x = Matrix::from_rows({{0, 0}, {1, 0}});
    Matrix y = Matrix::from_rows({{0, 1}, {1, 1}});
    CHECK(sinkhorn_divergence(x, y) == doctest::Approx(0.5).epsilon(2e-2));
}

TEST_CASE("divergence is symmetric to machine precision") {
    Rng rng(7);
    Matrix x = cloud(rng, 25, 4, 1.0);
    Matrix y = cloud(rng, 30, 4, 1.0, 0.7);
    double sxy = sinkhorn_divergence(x, y);
    double syx = sinkhorn_divergence(y, x);
    CHECK(std::fabs(sxy - syx) < 1e-12);
}

TEST_CASE("divergence is nonnegative along a shift ladder") {
    Rng rng(19);
    Matrix x = cloud(rng, 30, 3, 0.5);
    for (double shift : {0.0, 0.01, 0.05, 0.2, 1.0, 3.0}) {
        Rng r2(19);
        Matrix y = cloud(r2, 30, 3, 0.5, shift);
        CHECK(sinkhorn_divergence(x, y) >= 0.0);
    }
}

TEST_CASE("divergence grows with the shift") {
    Rng rng(23);
    Matrix x = cloud(rng, 40, 2, 0.3);
    double prev = -1.0;
    for (double shift : {0.5, 1.0, 2.0, 4.0}) {
        Rng r2(41);
        Matrix y = cloud(r2, 40, 2, 0.3, shift);
        double s = sinkhorn_divergence(x, y);
        CHECK(s > prev);
        prev = s;
    }
}

TEST_CASE("translation cost approaches half the squared offset") {
    // S(x, x + t) -> ||t||^2/2 for any cloud; debiasing cancels the shape.
    Rng rng(53);
    Matrix x = cloud(rng, 60, 5, 1.0);
    Matrix y = x;
    for (std::size_t i = 0; i < y.rows; ++i) y(i, 0) += 2.0;
    CHECK(sinkhorn_divergence(x, y) == doctest::Approx(2.0).epsilon(5e-2));
}

TEST_CASE("empty and mismatched inputs are rejected") {
    Matrix x = Matrix::from_rows({{1, 2}});
    CHECK_THROWS_AS(entropic_ot(Matrix(), x), EmptyInputError);
    CHECK_THROWS_AS(entropic_ot(x, Matrix::from_rows({{1, 2, 3}})), DimensionError);
}

TEST_CASE("nonpositive blur is rejected") {
    Matrix x = Matrix::from_rows({{0.0}});
    SinkhornOptions opts;
    opts.blur = 0.0;
    CHECK_THROWS_AS(entropic_ot(x, x, opts), ConfigError);
}

TEST_CASE("identical clouds have near-zero raw transport at the target scale") {
    Rng rng(67);
    Matrix x = cloud(rng, 20, 3, 1.0);
    // entropic_ot(x, x) equals the debiasing term; divergence subtracts it.
    double raw = entropic_ot(x, x);
    double div = sinkhorn_divergence(x, x);
    CHECK(div == 0.0);
    CHECK(std::isfinite(raw));
}

TEST_CASE("unbalanced cloud sizes still converge") {
    Rng rng(71);
    Matrix x = cloud(rng, 17, 3, 0.8);
    Matrix y = cloud(rng, 41, 3, 0.8, 0.5);
    double s = sinkhorn_divergence(x, y);
    CHECK(std::isfinite(s));
    CHECK(s >= 0.0);
}
