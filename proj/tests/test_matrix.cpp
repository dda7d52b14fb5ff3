#include <doctest.h>

#include <cmath>

#include "repdiv/errors.hpp"
#include "repdiv/matrix.hpp"

using namespace repdiv;

TEST_CASE("matmul against a hand computation") {
    Matrix a(2, 3);
    a(0, 0) = 1; a(0, 1) = 2; a(0, 2) = 3;
    a(1, 0) = 4; a(1, 1) = 5; a(1, 2) = 6;
    Matrix b(3, 2);
    b(0, 0) = 7; b(0, 1) = 8;
    b(1, 0) = 9; b(1, 1) = 10;
    b(2, 0) = 11; b(2, 1) = 12;
    Matrix c = matmul(a, b);
    CHECK(c(0, 0) == 58);
    CHECK(c(0, 1) == 64);
    CHECK(c(1, 0) == 139);
    CHECK(c(1, 1) == 154);
}

TEST_CASE("matmul rejects mismatched shapes") {
    CHECK_THROWS_AS(matmul(Matrix(2, 3), Matrix(2, 3)), DimensionError);
}

TEST_CASE("matvec and matvec_t agree with explicit transpose") {
    Rng rng(11);
    Matrix a = gaussian_matrix(rng, 4, 6);
    Vector x(6), y(4);
    for (auto& v : x) v = rng.next_gaussian();
    for (auto& v : y) v = rng.next_gaussian();
    Vector ax = matvec(a, x);
    Vector aty = matvec_t(a, y);
    Vector aty_ref = matvec(transpose(a), y);
    for (std::size_t i = 0; i < 4; ++i)
        CHECK(ax[i] == doctest::Approx(dot(a.row(i), x)));
    for (std::size_t j = 0; j < 6; ++j)
        CHECK(aty[j] == doctest::Approx(aty_ref[j]));
}

TEST_CASE("inverse round trip on a random well-conditioned matrix") {
    Rng rng(3);
    Matrix a = gaussian_matrix(rng, 8, 8);
    for (std::size_t i = 0; i < 8; ++i) a(i, i) += 4.0;  // diagonal dominance
    Matrix inv = inverse(a);
    Matrix prod = matmul(a, inv);
    for (std::size_t i = 0; i < 8; ++i)
        for (std::size_t j = 0; j < 8; ++j)
            CHECK(prod(i, j) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-9));
}

TEST_CASE("inverse throws on a singular matrix") {
    Matrix a(2, 2);
    a(0, 0) = 1; a(0, 1) = 2;
    a(1, 0) = 2; a(1, 1) = 4;
    CHECK_THROWS_AS(inverse(a), SingularSystemError);
}

TEST_CASE("solve matches the inverse application") {
    Rng rng(17);
    Matrix a = gaussian_matrix(rng, 5, 5);
    for (std::size_t i = 0; i < 5; ++i) a(i, i) += 3.0;
    Vector b(5);
    for (auto& v : b) v = rng.next_gaussian();
    Vector x = solve(a, b);
    Vector ax = matvec(a, x);
    for (std::size_t i = 0; i < 5; ++i) CHECK(ax[i] == doctest::Approx(b[i]).epsilon(1e-10));
}

TEST_CASE("from_rows stacks and validates") {
    Matrix m = Matrix::from_rows({{1, 2}, {3, 4}, {5, 6}});
    CHECK(m.rows == 3);
    CHECK(m.cols == 2);
    CHECK(m(2, 1) == 6);
    CHECK_THROWS_AS(Matrix::from_rows({{1, 2}, {3}}), DimensionError);
    CHECK_THROWS_AS(Matrix::from_rows({}), EmptyInputError);
}

TEST_CASE("vector helpers") {
    Vector u{1, 2, 3}, v{4, 5, 6};
    CHECK(dot(u, v) == 32);
    CHECK(norm(Vector{3, 4}) == doctest::Approx(5.0));
    CHECK(squared_distance(u, v) == 27);
    Vector s = sub(v, u);
    CHECK(s == Vector{3, 3, 3});
    Vector y{1, 1, 1};
    axpy(2.0, u, y);
    CHECK(y == Vector{3, 5, 7});
    Matrix o = outer(u, v);
    CHECK(o(1, 2) == 12);
}

TEST_CASE("gaussian_matrix is deterministic per seed") {
    Rng a(9), b(9);
    Matrix ma = gaussian_matrix(a, 3, 3, 0.0, 2.0);
    Matrix mb = gaussian_matrix(b, 3, 3, 0.0, 2.0);
    CHECK(ma.data == mb.data);
}
