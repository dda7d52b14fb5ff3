#include "repdiv/pca.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace repdiv {

namespace {

double off_diagonal_frobenius(const Matrix& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j)
            if (i != j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
}

double frobenius(const Matrix& a) {
    double s = 0.0;
    for (double v : a.data) s += v * v;
    return std::sqrt(s);
}

}  // namespace

EigenResult jacobi_eigen_symmetric(Matrix a, double tol, std::size_t max_sweeps) {
    if (a.rows != a.cols) throw DimensionError("jacobi: matrix not square");
    const std::size_t n = a.rows;
    Matrix v = Matrix::identity(n);
    const double scale = frobenius(a);
    const double stop = tol * (scale > 0.0 ? scale : 1.0);

    for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
        if (off_diagonal_frobenius(a) <= stop) break;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double app = a(p, p);
                const double aqq = a(q, q);
                const double theta = (aqq - app) / (2.0 * apq);
                // Smaller-magnitude root of t^2 + 2 theta t - 1 = 0.
                double t = (theta >= 0.0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;

                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p);
                    const double vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        return a(i, i) > a(j, j);
    });

    EigenResult res;
    res.values.resize(n);
    res.vectors = Matrix(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t src = order[k];
        res.values[k] = a(src, src);
        // Sign convention: largest-magnitude entry positive.
        std::size_t imax = 0;
        double best = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double mag = std::abs(v(i, src));
            if (mag > best) {
                best = mag;
                imax = i;
            }
        }
        const double sign = v(imax, src) < 0.0 ? -1.0 : 1.0;
        for (std::size_t i = 0; i < n; ++i) res.vectors(i, k) = sign * v(i, src);
    }
    return res;
}

Vector column_mean(const Matrix& points) {
    if (points.rows == 0) throw EmptyInputError("column_mean: no rows");
    Vector mu(points.cols, 0.0);
    for (std::size_t i = 0; i < points.rows; ++i)
        for (std::size_t j = 0; j < points.cols; ++j) mu[j] += points(i, j);
    for (double& m : mu) m /= static_cast<double>(points.rows);
    return mu;
}

Matrix covariance(const Matrix& points) {
    if (points.rows < 2) throw EmptyInputError("covariance: need at least 2 samples");
    const Vector mu = column_mean(points);
    const std::size_t n = points.rows;
    const std::size_t d = points.cols;
    Matrix cov(d, d);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t a = 0; a < d; ++a) {
            const double da = points(i, a) - mu[a];
            if (da == 0.0) continue;
            for (std::size_t b = a; b < d; ++b) {
                cov(a, b) += da * (points(i, b) - mu[b]);
            }
        }
    }
    const double f = 1.0 / static_cast<double>(n - 1);
    for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = a; b < d; ++b) {
            cov(a, b) *= f;
            cov(b, a) = cov(a, b);
        }
    return cov;
}

PcaBasis pca(const Matrix& points, std::size_t rank) {
    if (points.rows == 0) throw EmptyInputError("fit_pca: no samples");
    PcaBasis model;
    model.mean = column_mean(points);
    const std::size_t d = points.cols;
    if (points.rows < 2) {
        model.components = Matrix(0, d);
        return model;
    }
    const EigenResult eig = jacobi_eigen_symmetric(covariance(points));
    std::size_t r = std::min({rank, d, points.rows - 1});
    while (r > 0 && eig.values[r - 1] <= 0.0) --r;
    model.components = Matrix(r, d);
    model.explained_variance.resize(r);
    for (std::size_t k = 0; k < r; ++k) {
        model.explained_variance[k] = eig.values[k];
        for (std::size_t i = 0; i < d; ++i) model.components(k, i) = eig.vectors(i, k);
    }
    return model;
}

std::size_t rank_for_variance(const Vector& explained_variance, double var_threshold) {
    double total = 0.0;
    for (double v : explained_variance)
        if (v > 0.0) total += v;
    if (total <= 0.0) return 0;
    double acc = 0.0;
    for (std::size_t k = 0; k < explained_variance.size(); ++k) {
        if (explained_variance[k] > 0.0) acc += explained_variance[k];
        if (acc / total >= var_threshold) return k + 1;
    }
    return explained_variance.size();
}

Vector project_affine(const PcaBasis& model, const Vector& x) {
    if (x.size() != model.mean.size())
        throw DimensionError("project_affine: dimension mismatch");
    const Vector centered = sub(x, model.mean);
    Vector proj = model.mean;
    for (std::size_t k = 0; k < model.components.rows; ++k) {
        const Vector comp = model.components.row(k);
        axpy(dot(centered, comp), comp, proj);
    }
    return proj;
}

double distance_to_subspace(const PcaBasis& model, const Vector& x) {
    return std::sqrt(squared_distance(x, project_affine(model, x)));
}

}  // namespace repdiv
