#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "repdiv/matrix.hpp"
#include "repdiv/sinkhorn.hpp"

namespace repdiv {

enum class Metric { Cosine, L2 };

// Natural cloud, intervened cloud, and the ground-truth counterpart of each
// intervened vector (index-aligned).
struct ComparisonSet {
    std::vector<Vector> natural;
    std::vector<Vector> intervened;
    std::vector<Vector> ground_truth_pairs;

    void validate() const;
};

struct DivergenceParams {
    SinkhornOptions sinkhorn;
    std::vector<std::size_t> causal_dims{0, 1};
    std::size_t row_scale = 16;  // divisor for row_emd; 0 disables scaling
    std::size_t k_neighbors = 10;
    double var_threshold = 0.95;
    double tikhonov = 1e-6;
    double kde_bandwidth = 0.0;  // <= 0 selects Silverman's rule
};

struct DivergenceReport {
    double emd = 0.0;           // natural vs intervened, all dims
    double baseline_emd = 0.0;  // natural vs ground-truth pairs, all dims
    double row_emd = 0.0;       // ground-truth pairs vs intervened, causal dims
    double nearest_cos = 0.0;
    double nearest_l2 = 0.0;
    double min_cos_pairing = 0.0;
    double min_l2_pairing = 0.0;
    double local_pca = 0.0;
    double llr = 0.0;
    double kde_neg_log = 0.0;
};

double emd_divergence(const std::vector<Vector>& natural,
                      const std::vector<Vector>& compared,
                      const SinkhornOptions& opts = {});

// EMD restricted to the given coordinates; divided by scale when scale > 0.
double row_emd(const std::vector<Vector>& natural, const std::vector<Vector>& compared,
               const std::vector<std::size_t>& causal_dims, std::size_t scale,
               const SinkhornOptions& opts = {});

double metric_distance(const Vector& u, const Vector& v, Metric metric);

// Mean over queries of the distance to the closest reference point.
double nearest_distance(const std::vector<Vector>& reference,
                        const std::vector<Vector>& queries, Metric metric);

// Exclusive minimum-cost pairing between a and b, total cost divided by n.
double min_cost_pairing_distance(const std::vector<Vector>& a,
                                 const std::vector<Vector>& b, Metric metric);

// Minimum over the k nearest neighbors x_i of v of the residual of v - x_i
// against the tangent space fitted at x_i (PCA of x_i's own k-neighborhood,
// rank = smallest explaining var_threshold of the local variance).
double local_pca_distance(const std::vector<Vector>& reference, const Vector& v,
                          std::size_t k, double var_threshold = 0.95);

// Reconstruction error of v from the affine combination of its k nearest
// neighbors solving (G + tikhonov I) w proportional to 1, normalized to sum 1.
double llr_error(const std::vector<Vector>& reference, const Vector& v, std::size_t k,
                 double tikhonov = 1e-6);

extern const double kKdeUnderflowSentinel;

double silverman_bandwidth(const std::vector<Vector>& reference);

// -log of (1/(n h^D)) sum_i exp(-||v - x_i||^2 / (2 h^2)), evaluated verbatim
// (no Gaussian normalization constant). bandwidth <= 0 selects Silverman.
// A zero sum returns kKdeUnderflowSentinel and sets *underflow.
double kde_neg_log_density(const std::vector<Vector>& reference, const Vector& v,
                           double bandwidth = 0.0, bool* underflow = nullptr);

// Pairing metrics use index-order prefixes of length min(|natural|, |intervened|);
// callers wanting a particular subsample pass equal-size sets.
DivergenceReport full_report(const ComparisonSet& cmp, const DivergenceParams& params = {});

// Flat JSON object with exactly the ten report fields, %.9g values.
std::string report_to_json(const DivergenceReport& report);
DivergenceReport report_from_json(const std::string& text);

}  // namespace repdiv
