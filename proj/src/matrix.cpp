#include "repdiv/matrix.hpp"

#include <cmath>
#include <cstdlib>

namespace repdiv {

void Matrix::set_row(std::size_t i, const Vector& v) {
    if (v.size() != cols) throw DimensionError("set_row: length mismatch");
    for (std::size_t j = 0; j < cols; ++j) (*this)(i, j) = v[j];
}

Matrix Matrix::from_rows(const std::vector<Vector>& rows_in) {
    if (rows_in.empty()) throw EmptyInputError("from_rows: no rows");
    Matrix m(rows_in.size(), rows_in.front().size());
    for (std::size_t i = 0; i < rows_in.size(); ++i) m.set_row(i, rows_in[i]);
    return m;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) throw DimensionError("matmul: inner dimensions differ");
    Matrix c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols; ++j) {
                c(i, j) += aik * b(k, j);
            }
        }
    }
    return c;
}

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols, a.rows);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
    return t;
}

Vector matvec(const Matrix& a, const Vector& x) {
    if (a.cols != x.size()) throw DimensionError("matvec: dimension mismatch");
    Vector y(a.rows, 0.0);
    for (std::size_t i = 0; i < a.rows; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < a.cols; ++j) s += a(i, j) * x[j];
        y[i] = s;
    }
    return y;
}

Vector matvec_t(const Matrix& a, const Vector& x) {
    if (a.rows != x.size()) throw DimensionError("matvec_t: dimension mismatch");
    Vector y(a.cols, 0.0);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double xi = x[i];
        if (xi == 0.0) continue;
        for (std::size_t j = 0; j < a.cols; ++j) y[j] += a(i, j) * xi;
    }
    return y;
}

Matrix outer(const Vector& u, const Vector& v) {
    Matrix m(u.size(), v.size());
    for (std::size_t i = 0; i < u.size(); ++i)
        for (std::size_t j = 0; j < v.size(); ++j) m(i, j) = u[i] * v[j];
    return m;
}

namespace {

// Gauss-Jordan elimination applied to [A | B], returning B <- A^{-1} B.
// Partial pivoting keeps this stable enough for the well-conditioned
// systems we solve (alignment matrices have |det| >= lambda^d by design).
void gauss_jordan(Matrix& a, Matrix& b) {
    if (a.rows != a.cols) throw DimensionError("gauss_jordan: matrix not square");
    if (a.rows != b.rows) throw DimensionError("gauss_jordan: rhs row mismatch");
    const std::size_t n = a.rows;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        double best = std::abs(a(col, col));
        for (std::size_t r = col + 1; r < n; ++r) {
            const double v = std::abs(a(r, col));
            if (v > best) {
                best = v;
                pivot = r;
            }
        }
        if (best == 0.0) throw SingularSystemError("gauss_jordan: singular matrix");
        if (pivot != col) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a(col, j), a(pivot, j));
            for (std::size_t j = 0; j < b.cols; ++j) std::swap(b(col, j), b(pivot, j));
        }
        const double inv_p = 1.0 / a(col, col);
        for (std::size_t j = 0; j < n; ++j) a(col, j) *= inv_p;
        for (std::size_t j = 0; j < b.cols; ++j) b(col, j) *= inv_p;
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = a(r, col);
            if (f == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) a(r, j) -= f * a(col, j);
            for (std::size_t j = 0; j < b.cols; ++j) b(r, j) -= f * b(col, j);
        }
    }
}

}  // namespace

Matrix inverse(const Matrix& a) {
    Matrix work = a;
    Matrix inv = Matrix::identity(a.rows);
    gauss_jordan(work, inv);
    return inv;
}

Vector solve(Matrix a, Vector b) {
    if (a.rows != b.size()) throw DimensionError("solve: rhs length mismatch");
    Matrix rhs(b.size(), 1);
    for (std::size_t i = 0; i < b.size(); ++i) rhs(i, 0) = b[i];
    gauss_jordan(a, rhs);
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = rhs(i, 0);
    return b;
}

double dot(const Vector& u, const Vector& v) {
    if (u.size() != v.size()) throw DimensionError("dot: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
    return s;
}

double norm(const Vector& v) { return std::sqrt(dot(v, v)); }

double squared_distance(const Vector& u, const Vector& v) {
    if (u.size() != v.size()) throw DimensionError("squared_distance: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double d = u[i] - v[i];
        s += d * d;
    }
    return s;
}

Vector add(const Vector& u, const Vector& v) {
    if (u.size() != v.size()) throw DimensionError("add: length mismatch");
    Vector w(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) w[i] = u[i] + v[i];
    return w;
}

Vector sub(const Vector& u, const Vector& v) {
    if (u.size() != v.size()) throw DimensionError("sub: length mismatch");
    Vector w(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) w[i] = u[i] - v[i];
    return w;
}

Vector scale(const Vector& u, double s) {
    Vector w(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) w[i] = u[i] * s;
    return w;
}

void axpy(double alpha, const Vector& x, Vector& y) {
    if (x.size() != y.size()) throw DimensionError("axpy: length mismatch");
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

Matrix gaussian_matrix(Rng& rng, std::size_t rows, std::size_t cols,
                       double mean, double sd) {
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) m(i, j) = rng.next_gaussian(mean, sd);
    return m;
}

}  // namespace repdiv
