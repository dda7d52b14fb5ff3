#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "repdiv/matrix.hpp"

namespace repdiv {

using BehaviorFn = std::function<Vector(const Vector&)>;

struct HarmlessVerdict {
    bool harmless = false;
    Vector divergence_vector;  // x_hat minus its local-manifold projection
    double max_delta = 0.0;
    std::vector<double> per_eval_deltas;
    std::size_t n = 0;
    std::size_t r = 0;
    double epsilon = 0.0;
};

// Local-manifold harmlessness test: project x_hat onto the rank-r PCA plane
// of its n nearest class naturals, take the residual v, and measure
// ||psi(x + v) - psi(x)|| across the evaluation set. Harmless iff the largest
// shift stays within epsilon.
HarmlessVerdict classify_divergence(const Vector& x_hat,
                                    const std::vector<Vector>& class_naturals,
                                    const std::vector<Vector>& eval_set,
                                    const BehaviorFn& psi, std::size_t n, std::size_t r,
                                    double epsilon);

std::string verdict_to_json(const HarmlessVerdict& verdict);

}  // namespace repdiv
