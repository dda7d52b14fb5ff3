#include "repdiv/rng.hpp"

#include <cmath>

namespace repdiv {

double Rng::next_gaussian(double mean, double sd) {
    // u1 in (0, 1] so the log is finite; u2 in [0, 1).
    const double u1 = 1.0 - next_uniform();
    const double u2 = next_uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double z = r * std::cos(2.0 * M_PI * u2);
    return mean + sd * z;
}

std::size_t Rng::next_index(std::size_t n) {
    // Rejection-free modulo is fine here: n is tiny against 2^64, so the
    // bias is far below anything the statistical tests can see.
    return static_cast<std::size_t>(next_u64() % static_cast<std::uint64_t>(n));
}

}  // namespace repdiv
