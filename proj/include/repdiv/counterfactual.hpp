#pragma once

#include <cstddef>
#include <map>
#include <utility>
#include <vector>

#include "repdiv/alignment.hpp"
#include "repdiv/matrix.hpp"
#include "repdiv/synthdata.hpp"

namespace repdiv {

// Natural vectors grouped by exact ground-truth (x1, x2) grid values.
struct ClIndex {
    std::map<std::pair<double, double>, std::vector<Vector>> by_key;

    static ClIndex build(const std::vector<LabeledRep>& pool);
    bool has(double x1, double x2) const;
    std::size_t count(double x1, double x2) const;
};

// Mean of the natural vectors carrying the post-intervention values.
Vector cl_vector(const ClIndex& index, double x1, double x2);

// ½‖ĥ − h_cl‖² − ½·cos(ĥ, h_cl); throws on zero-norm inputs.
double cl_loss(const Vector& h_hat, const Vector& h_cl);

enum class ZeroNormPolicy { Strict, DropCosine };

struct ClTermDiagnostics {
    std::size_t dropped_cosine_terms = 0;
};

// Same value as cl_loss plus the gradient wrt x; under DropCosine a norm
// below 1e-12 drops the cosine term for that evaluation instead of throwing.
double cl_term_value_grad(const Vector& x, const Vector& y, ZeroNormPolicy policy,
                          Vector* dx, ClTermDiagnostics* diag);

// Σ over selectors of the cl term on (W⁻¹ D W ĥ, W⁻¹ D W h_cl); the h_cl
// projection carries no gradient.
double modified_cl_loss(const Vector& h_hat, const Vector& h_cl,
                        const AlignmentFunction& af,
                        const std::vector<VariableSelector>& selectors);

}  // namespace repdiv
