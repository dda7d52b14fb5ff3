#include "repdiv/harmless.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "repdiv/errors.hpp"
#include "repdiv/pca.hpp"

namespace repdiv {

HarmlessVerdict classify_divergence(const Vector& x_hat,
                                    const std::vector<Vector>& class_naturals,
                                    const std::vector<Vector>& eval_set,
                                    const BehaviorFn& psi, std::size_t n, std::size_t r,
                                    double epsilon) {
    if (n < 2) throw ConfigError("classify_divergence: n must be at least 2");
    if (n > class_naturals.size())
        throw ConfigError("classify_divergence: n exceeds the natural pool");
    if (eval_set.empty()) throw EmptyInputError("classify_divergence: empty eval set");
    if (epsilon < 0.0) throw ConfigError("classify_divergence: epsilon must be >= 0");
    const std::size_t d = x_hat.size();

    std::vector<std::pair<double, std::size_t>> dist;
    dist.reserve(class_naturals.size());
    for (std::size_t i = 0; i < class_naturals.size(); ++i) {
        if (class_naturals[i].size() != d)
            throw DimensionError("classify_divergence: ragged naturals");
        dist.emplace_back(squared_distance(class_naturals[i], x_hat), i);
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(n),
                      dist.end());
    Matrix neighborhood(n, d);
    for (std::size_t i = 0; i < n; ++i)
        neighborhood.set_row(i, class_naturals[dist[i].second]);

    const PcaBasis basis = pca(neighborhood, r);
    Vector projected = basis.mean;
    const Vector centered = sub(x_hat, basis.mean);
    for (std::size_t c = 0; c < basis.components.rows; ++c) {
        const Vector dir = basis.components.row(c);
        axpy(dot(dir, centered), dir, projected);
    }

    HarmlessVerdict verdict;
    verdict.divergence_vector = sub(x_hat, projected);
    verdict.n = n;
    verdict.r = r;
    verdict.epsilon = epsilon;
    verdict.per_eval_deltas.reserve(eval_set.size());
    for (const auto& x : eval_set) {
        if (x.size() != d) throw DimensionError("classify_divergence: ragged eval set");
        const Vector base = psi(x);
        const Vector shifted = psi(add(x, verdict.divergence_vector));
        if (base.size() != shifted.size())
            throw DimensionError("classify_divergence: behavior output mismatch");
        const double delta = std::sqrt(squared_distance(base, shifted));
        verdict.per_eval_deltas.push_back(delta);
        verdict.max_delta = std::max(verdict.max_delta, delta);
    }
    verdict.harmless = verdict.max_delta <= epsilon;
    return verdict;
}

std::string verdict_to_json(const HarmlessVerdict& verdict) {
    char buf[64];
    std::string out = "{\n";
    out += std::string("  \"verdict\": \"") + (verdict.harmless ? "harmless" : "harmful") +
           "\",\n";
    std::snprintf(buf, sizeof buf, "%.9g", verdict.max_delta);
    out += std::string("  \"max_delta\": ") + buf + ",\n";
    std::snprintf(buf, sizeof buf, "%.9g", verdict.epsilon);
    out += std::string("  \"epsilon\": ") + buf + ",\n";
    out += "  \"n\": " + std::to_string(verdict.n) + ",\n";
    out += "  \"r\": " + std::to_string(verdict.r) + ",\n";
    out += "  \"divergence_vector\": [";
    for (std::size_t i = 0; i < verdict.divergence_vector.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.9g", verdict.divergence_vector[i]);
        out += std::string(i ? ", " : "") + buf;
    }
    out += "],\n  \"per_eval_deltas\": [";
    for (std::size_t i = 0; i < verdict.per_eval_deltas.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.9g", verdict.per_eval_deltas[i]);
        out += std::string(i ? ", " : "") + buf;
    }
    out += "]\n}\n";
    return out;
}

}  // namespace repdiv
