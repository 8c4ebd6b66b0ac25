#pragma once

#include <vector>

#include "lrtn/matrix.hpp"

namespace lrtn {

struct SvdResult {
    DenseMatrix u;              // rows x k, orthonormal columns
    std::vector<double> s;      // k singular values, descending
    DenseMatrix v;              // cols x k, orthonormal columns
    int sweeps = 0;
};

/// Thin SVD by one-sided Jacobi; k = min(rows, cols).
/// Iteration cap 100 sweeps, off-diagonal tolerance 1e-12 relative.
SvdResult svd(const DenseMatrix& m);

/// Numerical rank: number of singular values >= tol * s_max.
std::size_t svd_rank(const DenseMatrix& m, double tol = 1e-8);

struct EigResult {
    std::vector<double> values;  // ascending
    DenseMatrix vectors;         // column j is the eigenvector of values[j]
};

/// Symmetric eigendecomposition (Householder tridiagonalization + implicit QL).
/// Input is symmetrized as (A + A^T)/2.
EigResult sym_eig(const DenseMatrix& a);

/// Projection onto the PSD cone: negative eigenvalues clamped to zero.
DenseMatrix psd_project(const DenseMatrix& a);

/// Minimum eigenvalue of the symmetrized input.
double min_eigenvalue(const DenseMatrix& a);

/// Moore-Penrose pseudoinverse via SVD, cutting singular values below tol * s_max.
DenseMatrix pinv(const DenseMatrix& m, double tol = 1e-12);

}  // namespace lrtn
