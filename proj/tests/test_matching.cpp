#include <doctest.h>

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

#include "repdiv/matching.hpp"
#include "repdiv/rng.hpp"

using namespace repdiv;

namespace {

// Exhaustive minimum over all permutations, n <= 8.
double brute_force_min(const Matrix& cost) {
    std::vector<std::size_t> perm(cost.rows);
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double total = 0.0;
        for (std::size_t i = 0; i < cost.rows; ++i) total += cost(i, perm[i]);
        best = std::min(best, total);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

}  // namespace

TEST_CASE("hand-worked 3x3 instance") {
    Matrix c(3, 3);
    c(0, 0) = 4; c(0, 1) = 1; c(0, 2) = 3;
    c(1, 0) = 2; c(1, 1) = 0; c(1, 2) = 5;
    c(2, 0) = 3; c(2, 1) = 2; c(2, 2) = 2;
    MatchingResult r = min_cost_matching(c);
    CHECK(r.total == 5.0);  // 1 + 2 + 2
    CHECK(r.pairing[0] == 1);
    CHECK(r.pairing[1] == 0);
    CHECK(r.pairing[2] == 2);
}

TEST_CASE("matches exhaustive search on random instances up to n = 6") {
    Rng rng(2025);
    for (int trial = 0; trial < 100; ++trial) {
        std::size_t n = 2 + rng.next_index(5);  // 2..6
        Matrix c(n, n);
        for (auto& v : c.data) v = rng.next_uniform() * 10.0;
        MatchingResult r = min_cost_matching(c);
        CHECK(r.total == doctest::Approx(brute_force_min(c)).epsilon(1e-12));
        // pairing must be a permutation
        std::vector<bool> used(n, false);
        for (std::size_t col : r.pairing) {
            REQUIRE(col < n);
            CHECK(!used[col]);
            used[col] = true;
        }
    }
}

TEST_CASE("identity cost favors the diagonal") {
    std::size_t n = 5;
    Matrix c(n, n, 1.0);
    for (std::size_t i = 0; i < n; ++i) c(i, i) = 0.0;
    MatchingResult r = min_cost_matching(c);
    CHECK(r.total == 0.0);
    for (std::size_t i = 0; i < n; ++i) CHECK(r.pairing[i] == i);
}

TEST_CASE("negative costs are handled") {
    Matrix c(2, 2);
    c(0, 0) = -5; c(0, 1) = 0;
    c(1, 0) = 0; c(1, 1) = -3;
    MatchingResult r = min_cost_matching(c);
    CHECK(r.total == -8.0);
}

TEST_CASE("non-square input is rejected") {
    CHECK_THROWS_AS(min_cost_matching(Matrix(2, 3)), DimensionError);
}
