#pragma once

#include "repdiv/matrix.hpp"

namespace repdiv {

struct MatchingResult {
    std::vector<std::size_t> pairing;  // pairing[i] = column matched to row i
    double total = 0.0;                // sum of the matched entries
};

// Exact minimum-cost perfect matching on a square cost matrix, O(n^3)
// shortest-augmenting-path Hungarian with dual potentials.
MatchingResult min_cost_matching(const Matrix& cost);

}  // namespace repdiv
