#pragma once

#include "repdiv/matrix.hpp"

namespace repdiv {

struct EigenResult {
    Vector values;   // descending
    Matrix vectors;  // column k is the unit eigenvector for values[k]
};

// Cyclic Jacobi rotations on a symmetric matrix. Sweeps until the
// off-diagonal Frobenius norm drops below tol * ||A||_F, then sorts
// eigenpairs by eigenvalue, largest first. Deterministic: fixed sweep
// order and a sign convention on the eigenvectors.
EigenResult jacobi_eigen_symmetric(Matrix a, double tol = 1e-10,
                                   std::size_t max_sweeps = 128);

// Sample covariance with the 1/(n-1) factor; rows of `points` are samples.
Matrix covariance(const Matrix& points);

Vector column_mean(const Matrix& points);

struct PcaBasis {
    Vector mean;                // d
    Matrix components;          // r x d, orthonormal rows, strongest first
    Vector explained_variance;  // r, nonincreasing, >= 0 up to round-off
};

// Principal components of the rows of `points`. The retained rank is
// min(rank, d, n-1); directions whose eigenvalue is <= 0 (round-off)
// are dropped as well.
PcaBasis pca(const Matrix& points, std::size_t rank);

// Smallest rank whose cumulative explained variance reaches `var_threshold`
// of the total. Zero total variance gives rank 0.
std::size_t rank_for_variance(const Vector& explained_variance, double var_threshold);

// Orthogonal projection of x onto the affine subspace mean + span(components).
Vector project_affine(const PcaBasis& basis, const Vector& x);

// Distance from x to that affine subspace.
double distance_to_subspace(const PcaBasis& basis, const Vector& x);

}  // namespace repdiv
