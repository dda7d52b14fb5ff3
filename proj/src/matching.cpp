#include "repdiv/matching.hpp"

#include <cmath>
#include <limits>

namespace repdiv {

MatchingResult min_cost_matching(const Matrix& cost) {
    if (cost.rows != cost.cols) throw DimensionError("min_cost_matching: not square");
    if (cost.rows == 0) throw EmptyInputError("min_cost_matching: empty matrix");
    for (double v : cost.data)
        if (!std::isfinite(v)) throw ConfigError("min_cost_matching: non-finite cost");

    const std::size_t n = cost.rows;
    constexpr double kInf = std::numeric_limits<double>::infinity();

    // 1-indexed arrays with a virtual column 0, dual-potential formulation.
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);

    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(n + 1, kInf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = p[j0];
            double delta = kInf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    MatchingResult res;
    res.pairing.assign(n, 0);
    for (std::size_t j = 1; j <= n; ++j) res.pairing[p[j] - 1] = j - 1;
    for (std::size_t i = 0; i < n; ++i) res.total += cost(i, res.pairing[i]);
    return res;
}

}  // namespace repdiv
