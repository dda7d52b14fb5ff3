#include "repdiv/divergence.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <optional>

#include <json.hpp>

#include "repdiv/errors.hpp"
#include "repdiv/matching.hpp"
#include "repdiv/pca.hpp"

namespace repdiv {

const double kKdeUnderflowSentinel = 1e9;

void ComparisonSet::validate() const {
    if (natural.empty() || intervened.empty())
        throw EmptyInputError("comparison set: empty cloud");
    if (intervened.size() != ground_truth_pairs.size())
        throw DimensionError("comparison set: intervened/ground-truth size mismatch");
    const std::size_t d = natural.front().size();
    for (const auto& v : natural)
        if (v.size() != d) throw DimensionError("comparison set: ragged natural");
    for (const auto& v : intervened)
        if (v.size() != d) throw DimensionError("comparison set: ragged intervened");
    for (const auto& v : ground_truth_pairs)
        if (v.size() != d) throw DimensionError("comparison set: ragged ground truth");
}

double emd_divergence(const std::vector<Vector>& natural,
                      const std::vector<Vector>& compared, const SinkhornOptions& opts) {
    if (natural.empty() || compared.empty())
        throw EmptyInputError("emd_divergence: empty cloud");
    return sinkhorn_divergence(Matrix::from_rows(natural), Matrix::from_rows(compared),
                               opts);
}

namespace {

std::vector<Vector> restrict_dims(const std::vector<Vector>& points,
                                  const std::vector<std::size_t>& dims) {
    std::vector<Vector> out;
    out.reserve(points.size());
    for (const auto& p : points) {
        Vector q(dims.size());
        for (std::size_t i = 0; i < dims.size(); ++i) {
            if (dims[i] >= p.size()) throw DimensionError("row_emd: dim out of range");
            q[i] = p[dims[i]];
        }
        out.push_back(std::move(q));
    }
    return out;
}

}  // namespace

double row_emd(const std::vector<Vector>& natural, const std::vector<Vector>& compared,
               const std::vector<std::size_t>& causal_dims, std::size_t scale,
               const SinkhornOptions& opts) {
    if (causal_dims.empty()) throw EmptyInputError("row_emd: no causal dims");
    const double value =
        emd_divergence(restrict_dims(natural, causal_dims),
                       restrict_dims(compared, causal_dims), opts);
    return scale > 0 ? value / static_cast<double>(scale) : value;
}

double metric_distance(const Vector& u, const Vector& v, Metric metric) {
    if (metric == Metric::L2) return std::sqrt(squared_distance(u, v));
    const double nu = norm(u), nv = norm(v);
    if (nu == 0.0 || nv == 0.0)
        throw CosineUndefinedError("cosine distance: zero vector");
    return 1.0 - dot(u, v) / (nu * nv);
}

double nearest_distance(const std::vector<Vector>& reference,
                        const std::vector<Vector>& queries, Metric metric) {
    if (reference.empty()) throw EmptyInputError("nearest_distance: empty reference");
    if (queries.empty()) throw EmptyInputError("nearest_distance: no queries");
    double total = 0.0;
    for (const auto& q : queries) {
        double best = metric_distance(reference.front(), q, metric);
        for (std::size_t i = 1; i < reference.size(); ++i)
            best = std::min(best, metric_distance(reference[i], q, metric));
        total += best;
    }
    return total / static_cast<double>(queries.size());
}

double min_cost_pairing_distance(const std::vector<Vector>& a,
                                 const std::vector<Vector>& b, Metric metric) {
    if (a.size() != b.size())
        throw DimensionError("min_cost_pairing_distance: size mismatch");
    if (a.empty()) throw EmptyInputError("min_cost_pairing_distance: empty sets");
    Matrix cost(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j)
            cost(i, j) = metric_distance(a[i], b[j], metric);
    return min_cost_matching(cost).total / static_cast<double>(a.size());
}

namespace {

std::vector<std::size_t> k_nearest(const std::vector<Vector>& reference, const Vector& v,
                                   std::size_t k) {
    std::vector<std::pair<double, std::size_t>> d;
    d.reserve(reference.size());
    for (std::size_t i = 0; i < reference.size(); ++i)
        d.emplace_back(squared_distance(reference[i], v), i);
    std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
    std::vector<std::size_t> idx(k);
    for (std::size_t i = 0; i < k; ++i) idx[i] = d[i].second;
    return idx;
}

// Tangent basis at reference[i]: principal directions of its own
// self-inclusive k-neighborhood covering var_threshold of the variance.
Matrix tangent_basis_at(const std::vector<Vector>& reference, std::size_t i,
                        std::size_t k, double var_threshold) {
    const std::vector<std::size_t> hood = k_nearest(reference, reference[i], k);
    Matrix pts(k, reference.front().size());
    for (std::size_t r = 0; r < k; ++r) pts.set_row(r, reference[hood[r]]);
    const EigenResult eig = jacobi_eigen_symmetric(covariance(pts));
    const std::size_t rank = rank_for_variance(eig.values, var_threshold);
    Matrix basis(rank, pts.cols);
    for (std::size_t r = 0; r < rank; ++r)
        for (std::size_t j = 0; j < pts.cols; ++j) basis(r, j) = eig.vectors(j, r);
    return basis;
}

double residual_against_basis(const Matrix& basis, const Vector& w) {
    Vector resid = w;
    for (std::size_t r = 0; r < basis.rows; ++r) {
        const Vector dir = basis.row(r);
        axpy(-dot(dir, w), dir, resid);
    }
    return norm(resid);
}

// Bases depend only on the anchor index, so repeated queries share them.
using TangentCache = std::vector<std::optional<Matrix>>;

double local_pca_distance_cached(const std::vector<Vector>& reference, const Vector& v,
                                 std::size_t k, double var_threshold,
                                 TangentCache& cache) {
    if (k < 2) throw ConfigError("local_pca_distance: k must be at least 2");
    if (k > reference.size())
        throw ConfigError("local_pca_distance: k exceeds reference size");
    const std::vector<std::size_t> nbrs = k_nearest(reference, v, k);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i : nbrs) {
        if (!cache[i]) cache[i] = tangent_basis_at(reference, i, k, var_threshold);
        best = std::min(best, residual_against_basis(*cache[i], sub(v, reference[i])));
    }
    return best;
}

}  // namespace

double local_pca_distance(const std::vector<Vector>& reference, const Vector& v,
                          std::size_t k, double var_threshold) {
    TangentCache cache(reference.size());
    return local_pca_distance_cached(reference, v, k, var_threshold, cache);
}

double llr_error(const std::vector<Vector>& reference, const Vector& v, std::size_t k,
                 double tikhonov) {
    if (k < 1) throw ConfigError("llr_error: k must be at least 1");
    if (k > reference.size()) throw ConfigError("llr_error: k exceeds reference size");
    const std::vector<std::size_t> nbrs = k_nearest(reference, v, k);
    // Gram of neighbors centered on v; (G + tikhonov I) w = 1, then sum-normalize.
    Matrix gram(k, k);
    for (std::size_t i = 0; i < k; ++i) {
        const Vector ci = sub(reference[nbrs[i]], v);
        for (std::size_t j = i; j < k; ++j) {
            const double g = dot(ci, sub(reference[nbrs[j]], v));
            gram(i, j) = g;
            gram(j, i) = g;
        }
        gram(i, i) += tikhonov;
    }
    Vector w = solve(gram, Vector(k, 1.0));
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    if (total == 0.0 || !std::isfinite(total))
        throw SingularSystemError("llr_error: weights do not normalize");
    Vector recon(v.size(), 0.0);
    for (std::size_t i = 0; i < k; ++i) axpy(w[i] / total, reference[nbrs[i]], recon);
    return norm(sub(v, recon));
}

double silverman_bandwidth(const std::vector<Vector>& reference) {
    const std::size_t n = reference.size();
    if (n < 2) throw ConfigError("silverman_bandwidth: need at least two points");
    const std::size_t d = reference.front().size();
    const Matrix pts = Matrix::from_rows(reference);
    const Vector mean = column_mean(pts);
    double sd_sum = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double c = pts(i, j) - mean[j];
            acc += c * c;
        }
        sd_sum += std::sqrt(acc / static_cast<double>(n - 1));
    }
    const double sigma = sd_sum / static_cast<double>(d);
    if (sigma <= 0.0)
        throw ConfigError("silverman_bandwidth: zero spread, pass a bandwidth");
    const double factor = 4.0 / ((static_cast<double>(d) + 2.0) * static_cast<double>(n));
    return sigma * std::pow(factor, 1.0 / (static_cast<double>(d) + 4.0));
}

double kde_neg_log_density(const std::vector<Vector>& reference, const Vector& v,
                           double bandwidth, bool* underflow) {
    if (reference.empty()) throw EmptyInputError("kde_neg_log_density: empty reference");
    const double h = bandwidth > 0.0 ? bandwidth : silverman_bandwidth(reference);
    const std::size_t n = reference.size();
    const std::size_t d = v.size();
    double sum = 0.0;
    for (const auto& x : reference) {
        if (x.size() != d) throw DimensionError("kde_neg_log_density: ragged reference");
        sum += std::exp(-squared_distance(v, x) / (2.0 * h * h));
    }
    const double density =
        sum / (static_cast<double>(n) * std::pow(h, static_cast<double>(d)));
    if (!(density > 0.0) || !std::isfinite(density)) {
        if (underflow) *underflow = true;
        return kKdeUnderflowSentinel;
    }
    if (underflow) *underflow = false;
    return -std::log(density);
}

DivergenceReport full_report(const ComparisonSet& cmp, const DivergenceParams& params) {
    cmp.validate();
    DivergenceReport rep;
    rep.emd = emd_divergence(cmp.natural, cmp.intervened, params.sinkhorn);
    rep.baseline_emd = emd_divergence(cmp.natural, cmp.ground_truth_pairs, params.sinkhorn);
    rep.row_emd = row_emd(cmp.ground_truth_pairs, cmp.intervened, params.causal_dims,
                          params.row_scale, params.sinkhorn);
    rep.nearest_cos = nearest_distance(cmp.natural, cmp.intervened, Metric::Cosine);
    rep.nearest_l2 = nearest_distance(cmp.natural, cmp.intervened, Metric::L2);
    const std::size_t n_pair = std::min(cmp.natural.size(), cmp.intervened.size());
    const std::vector<Vector> nat_prefix(cmp.natural.begin(),
                                         cmp.natural.begin() + n_pair);
    const std::vector<Vector> int_prefix(cmp.intervened.begin(),
                                         cmp.intervened.begin() + n_pair);
    rep.min_cos_pairing = min_cost_pairing_distance(nat_prefix, int_prefix, Metric::Cosine);
    rep.min_l2_pairing = min_cost_pairing_distance(nat_prefix, int_prefix, Metric::L2);

    const std::size_t k = std::min(params.k_neighbors, cmp.natural.size());
    double pca_sum = 0.0, llr_sum = 0.0, kde_sum = 0.0;
    const double h = params.kde_bandwidth > 0.0 ? params.kde_bandwidth
                                                : silverman_bandwidth(cmp.natural);
    TangentCache cache(cmp.natural.size());
    for (const auto& v : cmp.intervened) {
        pca_sum += local_pca_distance_cached(cmp.natural, v, std::max<std::size_t>(k, 2),
                                             params.var_threshold, cache);
        llr_sum += llr_error(cmp.natural, v, k, params.tikhonov);
        kde_sum += kde_neg_log_density(cmp.natural, v, h);
    }
    const double n_int = static_cast<double>(cmp.intervened.size());
    rep.local_pca = pca_sum / n_int;
    rep.llr = llr_sum / n_int;
    rep.kde_neg_log = kde_sum / n_int;
    return rep;
}

std::string report_to_json(const DivergenceReport& report) {
    const std::pair<const char*, double> fields[] = {
        {"emd", report.emd},
        {"baseline_emd", report.baseline_emd},
        {"row_emd", report.row_emd},
        {"nearest_cos", report.nearest_cos},
        {"nearest_l2", report.nearest_l2},
        {"min_cos_pairing", report.min_cos_pairing},
        {"min_l2_pairing", report.min_l2_pairing},
        {"local_pca", report.local_pca},
        {"llr", report.llr},
        {"kde_neg_log", report.kde_neg_log},
    };
    std::string out = "{\n";
    char buf[64];
    bool first = true;
    for (const auto& [name, value] : fields) {
        std::snprintf(buf, sizeof buf, "%.9g", value);
        if (!first) out += ",\n";
        first = false;
        out += "  \"";
        out += name;
        out += "\": ";
        out += buf;
    }
    out += "\n}\n";
    return out;
}

DivergenceReport report_from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    if (!j.is_object() || j.size() != 10)
        throw IoError("divergence report: expected exactly ten fields");
    DivergenceReport rep;
    rep.emd = j.at("emd").get<double>();
    rep.baseline_emd = j.at("baseline_emd").get<double>();
    rep.row_emd = j.at("row_emd").get<double>();
    rep.nearest_cos = j.at("nearest_cos").get<double>();
    rep.nearest_l2 = j.at("nearest_l2").get<double>();
    rep.min_cos_pairing = j.at("min_cos_pairing").get<double>();
    rep.min_l2_pairing = j.at("min_l2_pairing").get<double>();
    rep.local_pca = j.at("local_pca").get<double>();
    rep.llr = j.at("llr").get<double>();
    rep.kde_neg_log = j.at("kde_neg_log").get<double>();
    return rep;
}

}  // namespace repdiv
