#pragma once

#include <cstddef>
#include <vector>

#include "repdiv/errors.hpp"
#include "repdiv/rng.hpp"

namespace repdiv {

using Vector = std::vector<double>;

// Dense row-major matrix. Everything in this project is desk scale
// (d <= a few hundred), so plain loops beat any dependency here.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    // Stacks equal-length vectors as rows; throws on ragged or empty input.
    static Matrix from_rows(const std::vector<Vector>& rows_in);

    Vector row(std::size_t i) const {
        return Vector(data.begin() + static_cast<std::ptrdiff_t>(i * cols),
                      data.begin() + static_cast<std::ptrdiff_t>((i + 1) * cols));
    }

    void set_row(std::size_t i, const Vector& v);

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
Vector matvec(const Matrix& a, const Vector& x);
// y = A^T x without forming the transpose.
Vector matvec_t(const Matrix& a, const Vector& x);
Matrix outer(const Vector& u, const Vector& v);

// Gauss-Jordan with partial pivoting; throws SingularSystemError.
Matrix inverse(const Matrix& a);
// Solves A x = b in place of a copy; throws SingularSystemError.
Vector solve(Matrix a, Vector b);

double dot(const Vector& u, const Vector& v);
double norm(const Vector& v);
double squared_distance(const Vector& u, const Vector& v);
Vector add(const Vector& u, const Vector& v);
Vector sub(const Vector& u, const Vector& v);
Vector scale(const Vector& u, double s);
void axpy(double alpha, const Vector& x, Vector& y);  // y += alpha * x

// rows x cols entries i.i.d. Normal(mean, sd^2) from the deterministic generator.
Matrix gaussian_matrix(Rng& rng, std::size_t rows, std::size_t cols,
                       double mean = 0.0, double sd = 1.0);

}  // namespace repdiv
