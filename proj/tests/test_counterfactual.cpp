#include <doctest.h>

#include <cmath>
#include <vector>

#include "repdiv/alignment.hpp"
#include "repdiv/counterfactual.hpp"
#include "repdiv/errors.hpp"
#include "repdiv/matrix.hpp"
#include "repdiv/rng.hpp"
#include "repdiv/synthdata.hpp"

using namespace repdiv;

namespace {

LabeledRep rep(double x1, double x2, Vector h) {
    LabeledRep r;
    r.h = std::move(h);
    r.x1 = x1;
    r.x2 = x2;
    r.class_label = 0;
    return r;
}

}  // namespace

TEST_CASE("ClIndex groups vectors by exact ground-truth values") {
    std::vector<LabeledRep> pool{
        rep(-1.0, 0.0, {1.0, 2.0}),
        rep(-1.0, 0.0, {3.0, 4.0}),
        rep(1.0, 2.0, {5.0, 6.0}),
    };
    ClIndex idx = ClIndex::build(pool);
    CHECK(idx.has(-1.0, 0.0));
    CHECK(idx.has(1.0, 2.0));
    CHECK(!idx.has(0.0, 0.0));
    CHECK(idx.count(-1.0, 0.0) == 2);
    CHECK(idx.count(1.0, 2.0) == 1);
    CHECK(idx.count(1.0, 3.0) == 0);
    CHECK(idx.by_key.size() == 2);
    CHECK(idx.by_key.at({-1.0, 0.0})[1] == Vector{3.0, 4.0});
}

TEST_CASE("cl_vector averages the bucket and rejects missing keys") {
    std::vector<LabeledRep> pool{
        rep(-1.0, 0.0, {1.0, 2.0, 0.0}),
        rep(-1.0, 0.0, {3.0, 4.0, 6.0}),
    };
    ClIndex idx = ClIndex::build(pool);
    Vector mean = cl_vector(idx, -1.0, 0.0);
    REQUIRE(mean.size() == 3);
    CHECK(mean[0] == doctest::Approx(2.0));
    CHECK(mean[1] == doctest::Approx(3.0));
    CHECK(mean[2] == doctest::Approx(3.0));
    CHECK_THROWS_AS(cl_vector(idx, 1.0, 4.0), MissingClError);
}

TEST_CASE("cl_vector over a generated dataset matches a direct average") {
    DatasetConfig cfg;
    cfg.samples_per_class = 20;
    cfg.seed = 9;
    std::vector<LabeledRep> data = generate_dataset(cfg);
    ClIndex idx = ClIndex::build(data);
    // Every grid cell has exactly samples_per_class entries.
    for (double x1 : cfg.x1_values)
        for (double x2 : cfg.x2_values) CHECK(idx.count(x1, x2) == cfg.samples_per_class);

    Vector direct(cfg.dim(), 0.0);
    std::size_t n = 0;
    for (const auto& r : data) {
        if (r.x1 != 1.0 || r.x2 != 3.0) continue;
        for (std::size_t i = 0; i < direct.size(); ++i) direct[i] += r.h[i];
        ++n;
    }
    for (double& v : direct) v /= static_cast<double>(n);
    Vector mean = cl_vector(idx, 1.0, 3.0);
    for (std::size_t i = 0; i < direct.size(); ++i)
        CHECK(mean[i] == doctest::Approx(direct[i]).epsilon(1e-12));
}

TEST_CASE("cl_loss matches the closed form on hand vectors") {
    // Orthogonal unit vectors: squared distance 2, cosine 0.
    CHECK(cl_loss(Vector{1.0, 0.0}, Vector{0.0, 1.0}) == doctest::Approx(1.0));
    // Identical vectors: squared distance 0, cosine 1.
    CHECK(cl_loss(Vector{1.0, 0.0}, Vector{1.0, 0.0}) == doctest::Approx(-0.5));
    // Anti-parallel: ½·4·‖u‖² with cosine −1. For u=(2,0), v=(−2,0):
    // ½·16 − ½·(−1) = 8.5.
    CHECK(cl_loss(Vector{2.0, 0.0}, Vector{-2.0, 0.0}) == doctest::Approx(8.5));
    // General case evaluated by hand: x=(1,2), y=(3,-1).
    const double sq = 4.0 + 9.0;
    const double cos = (3.0 - 2.0) / (std::sqrt(5.0) * std::sqrt(10.0));
    CHECK(cl_loss(Vector{1.0, 2.0}, Vector{3.0, -1.0}) ==
          doctest::Approx(0.5 * sq - 0.5 * cos).epsilon(1e-12));
}

TEST_CASE("cl_loss input validation") {
    CHECK_THROWS_AS(cl_loss(Vector{1.0}, Vector{1.0, 2.0}), DimensionError);
    CHECK_THROWS_AS(cl_loss(Vector{}, Vector{}), EmptyInputError);
    CHECK_THROWS_AS(cl_loss(Vector{0.0, 0.0}, Vector{1.0, 0.0}), CosineUndefinedError);
    CHECK_THROWS_AS(cl_loss(Vector{1.0, 0.0}, Vector{0.0, 0.0}), CosineUndefinedError);
}

TEST_CASE("cl_term_value_grad matches cl_loss and central finite differences") {
    Rng rng(13);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t d = 2 + rng.next_index(6);
        Vector x(d), y(d);
        for (auto& v : x) v = rng.next_gaussian(0.0, 1.0);
        for (auto& v : y) v = rng.next_gaussian(0.0, 1.0);
        Vector dx;
        const double val = cl_term_value_grad(x, y, ZeroNormPolicy::Strict, &dx, nullptr);
        CHECK(val == doctest::Approx(cl_loss(x, y)).epsilon(1e-12));
        REQUIRE(dx.size() == d);
        const double eps = 1e-6;
        for (std::size_t i = 0; i < d; ++i) {
            Vector xp = x, xm = x;
            xp[i] += eps;
            xm[i] -= eps;
            const double numeric =
                (cl_loss(xp, y) - cl_loss(xm, y)) / (2.0 * eps);
            CHECK(dx[i] == doctest::Approx(numeric).epsilon(1e-5));
        }
    }
}

TEST_CASE("DropCosine policy degrades to the quadratic term on zero norms") {
    Vector zero{0.0, 0.0, 0.0};
    Vector y{1.0, 2.0, -1.0};
    ClTermDiagnostics diag;
    Vector dx;
    const double val = cl_term_value_grad(zero, y, ZeroNormPolicy::DropCosine, &dx, &diag);
    CHECK(val == doctest::Approx(0.5 * (1.0 + 4.0 + 1.0)));
    CHECK(diag.dropped_cosine_terms == 1);
    // Gradient is the quadratic part only: x − y.
    for (std::size_t i = 0; i < 3; ++i) CHECK(dx[i] == doctest::Approx(-y[i]));

    // Nonzero norms do not touch the counter.
    cl_term_value_grad(y, y, ZeroNormPolicy::DropCosine, nullptr, &diag);
    CHECK(diag.dropped_cosine_terms == 1);
}

TEST_CASE("modified_cl_loss with identity alignment sums per-coordinate terms") {
    AlignmentFunction af = AlignmentFunction::from_matrix(Matrix::identity(4));
    std::vector<VariableSelector> sels = causal_selectors(4, 1);
    REQUIRE(sels.size() == 2);
    CHECK(sels[0].start == 0);
    CHECK(sels[1].start == 1);

    Vector h_hat{2.0, 3.0, 9.0, -9.0};
    Vector h_cl{1.0, 5.0, 0.5, 0.5};
    // With W = I the selector projection keeps one coordinate; each term is
    // ½(a−b)² − ½·sign(ab) for that coordinate pair.
    const double t0 = 0.5 * 1.0 - 0.5 * 1.0;   // (2, 1): same sign
    const double t1 = 0.5 * 4.0 - 0.5 * 1.0;   // (3, 5): same sign
    CHECK(modified_cl_loss(h_hat, h_cl, af, sels) == doctest::Approx(t0 + t1).epsilon(1e-9));

    // Opposite signs flip the cosine.
    Vector h_neg{-2.0, 3.0, 0.0, 0.0};
    const double u0 = 0.5 * 9.0 + 0.5;
    const double u1 = 0.5 * 4.0 - 0.5;
    CHECK(modified_cl_loss(h_neg, h_cl, af, sels) == doctest::Approx(u0 + u1).epsilon(1e-9));
}

TEST_CASE("modified_cl_loss is invariant to coordinates outside the selectors") {
    AlignmentFunction af = AlignmentFunction::init(6, 31);
    std::vector<VariableSelector> sels = causal_selectors(6, 2);
    Rng rng(7);
    Vector h_hat(6), h_cl(6);
    for (auto& v : h_hat) v = rng.next_gaussian(0.0, 1.0);
    for (auto& v : h_cl) v = rng.next_gaussian(0.0, 1.0);
    const double base = modified_cl_loss(h_hat, h_cl, af, sels);

    // Moving h along W⁻¹ e_k for a non-selected axis k leaves every selected
    // z-coordinate unchanged, hence the loss too.
    for (std::size_t k = 4; k < 6; ++k) {
        Vector ek(6, 0.0);
        ek[k] = 1.0;
        Vector shift = matvec(af.w_inv, ek);
        Vector moved = h_hat;
        axpy(2.5, shift, moved);
        CHECK(modified_cl_loss(moved, h_cl, af, sels) ==
              doctest::Approx(base).epsilon(1e-9));
    }
}

TEST_CASE("modified_cl_loss validates selectors and dimensions") {
    AlignmentFunction af = AlignmentFunction::from_matrix(Matrix::identity(4));
    std::vector<VariableSelector> sels = causal_selectors(4, 1);
    Vector ok{1.0, 1.0, 1.0, 1.0};
    CHECK_THROWS_AS(modified_cl_loss(Vector{1.0, 1.0}, ok, af, sels), DimensionError);
    CHECK_THROWS_AS(modified_cl_loss(ok, ok, af, {}), EmptyInputError);

    std::vector<VariableSelector> overlapping = causal_selectors(4, 2);
    overlapping[1].start = 1;  // overlaps [0, 2)
    CHECK_THROWS_AS(modified_cl_loss(ok, ok, af, overlapping), ConfigError);

    std::vector<VariableSelector> wrong_dim = causal_selectors(6, 1);
    CHECK_THROWS_AS(modified_cl_loss(ok, ok, af, wrong_dim), DimensionError);
}
