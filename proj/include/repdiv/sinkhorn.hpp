#pragma once

#include "repdiv/matrix.hpp"

namespace repdiv {

struct SinkhornOptions {
    double blur = 0.05;       // entropic scale: epsilon = blur^2
    double tol = 1e-6;        // max absolute marginal violation of the plan
    std::size_t max_iters = 500;
};

// Entropic optimal transport cost between uniform point clouds (rows are
// points), cost C(x, y) = ||x - y||^2 / 2. Returns the dual value
// sum_i a_i f_i + sum_j b_j g_j. Log-domain symmetric (parallel averaged)
// updates with an epsilon-annealing warm start: the scale starts at the
// largest cost entry and shrinks by 0.9 each step until it reaches blur^2,
// after which iterations continue at the target scale until the plan
// marginals match the weights to within tol. At small blur the residual can plateau
// above tol; a plateaued solve is accepted as the annealed estimate while
// its residual stays below 1/max(n, m), else ConvergenceError (carrying
// the last residual) is thrown. Same error if the iteration cap is hit
// with the residual above that bound.
double entropic_ot(const Matrix& x, const Matrix& y,
                   const SinkhornOptions& opts = {});

// Debiased divergence S(x, y) = OT(x, y) - OT(x, x)/2 - OT(y, y)/2.
// All three terms go through entropic_ot, so S(x, x) is exactly zero.
double sinkhorn_divergence(const Matrix& x, const Matrix& y,
                           const SinkhornOptions& opts = {});

}  // namespace repdiv
