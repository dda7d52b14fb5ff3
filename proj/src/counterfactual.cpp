#include "repdiv/counterfactual.hpp"

#include <cmath>

#include "repdiv/errors.hpp"

namespace repdiv {

ClIndex ClIndex::build(const std::vector<LabeledRep>& pool) {
    ClIndex idx;
    for (const auto& rep : pool) idx.by_key[{rep.x1, rep.x2}].push_back(rep.h);
    return idx;
}

bool ClIndex::has(double x1, double x2) const {
    return by_key.find({x1, x2}) != by_key.end();
}

std::size_t ClIndex::count(double x1, double x2) const {
    const auto it = by_key.find({x1, x2});
    return it == by_key.end() ? 0 : it->second.size();
}

Vector cl_vector(const ClIndex& index, double x1, double x2) {
    const auto it = index.by_key.find({x1, x2});
    if (it == index.by_key.end() || it->second.empty())
        throw MissingClError("cl_vector: no natural vectors for the requested values");
    const auto& vecs = it->second;
    Vector mean(vecs.front().size(), 0.0);
    for (const auto& v : vecs) {
        if (v.size() != mean.size()) throw DimensionError("cl_vector: ragged pool");
        for (std::size_t i = 0; i < v.size(); ++i) mean[i] += v[i];
    }
    for (double& m : mean) m /= static_cast<double>(vecs.size());
    return mean;
}

double cl_loss(const Vector& h_hat, const Vector& h_cl) {
    return cl_term_value_grad(h_hat, h_cl, ZeroNormPolicy::Strict, nullptr, nullptr);
}

double cl_term_value_grad(const Vector& x, const Vector& y, ZeroNormPolicy policy,
                          Vector* dx, ClTermDiagnostics* diag) {
    if (x.size() != y.size()) throw DimensionError("cl term: dimension mismatch");
    if (x.empty()) throw EmptyInputError("cl term: empty vectors");
    double sq = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i];
        sq += d * d;
    }
    if (dx) {
        dx->assign(x.size(), 0.0);
        for (std::size_t i = 0; i < x.size(); ++i) (*dx)[i] = x[i] - y[i];
    }
    const double nx = norm(x), ny = norm(y);
    constexpr double kNormFloor = 1e-12;
    if (nx < kNormFloor || ny < kNormFloor) {
        if (policy == ZeroNormPolicy::Strict)
            throw CosineUndefinedError("cl term: zero-norm vector in cosine");
        if (diag) ++diag->dropped_cosine_terms;
        return 0.5 * sq;
    }
    const double cos = dot(x, y) / (nx * ny);
    if (dx) {
        // d cos/dx = y/(‖x‖‖y‖) − cos·x/‖x‖²
        for (std::size_t i = 0; i < x.size(); ++i)
            (*dx)[i] -= 0.5 * (y[i] / (nx * ny) - cos * x[i] / (nx * nx));
    }
    return 0.5 * sq - 0.5 * cos;
}

double modified_cl_loss(const Vector& h_hat, const Vector& h_cl,
                        const AlignmentFunction& af,
                        const std::vector<VariableSelector>& selectors) {
    if (h_hat.size() != h_cl.size() || h_hat.size() != af.dim())
        throw DimensionError("modified_cl_loss: dimension mismatch");
    if (selectors.empty()) throw EmptyInputError("modified_cl_loss: no selectors");
    for (std::size_t i = 0; i < selectors.size(); ++i) {
        selectors[i].validate();
        if (selectors[i].dim != af.dim())
            throw DimensionError("modified_cl_loss: selector dimension");
        for (std::size_t j = i + 1; j < selectors.size(); ++j) {
            const auto& a = selectors[i];
            const auto& b = selectors[j];
            if (a.start < b.start + b.size && b.start < a.start + a.size)
                throw ConfigError("modified_cl_loss: selectors overlap");
        }
    }
    const Vector z_hat = matvec(af.w, h_hat);
    const Vector z_cl = matvec(af.w, h_cl);
    double total = 0.0;
    for (const auto& sel : selectors) {
        Vector zh(z_hat.size(), 0.0), zc(z_cl.size(), 0.0);
        for (std::size_t i = sel.start; i < sel.start + sel.size; ++i) {
            zh[i] = z_hat[i];
            zc[i] = z_cl[i];
        }
        const Vector xh = matvec(af.w_inv, zh);
        const Vector xc = matvec(af.w_inv, zc);
        total += cl_term_value_grad(xh, xc, ZeroNormPolicy::Strict, nullptr, nullptr);
    }
    return total;
}

}  // namespace repdiv
