#pragma once

#include <cstddef>
#include <vector>

namespace gradova::linalg {

using Vector = std::vector<double>;

// Dense symmetric matrix, row-major storage.
struct SymMatrix {
    int dim = 0;
    std::vector<double> values;
    bool is_positive_semidefinite = false;

    SymMatrix() = default;
    explicit SymMatrix(int d)
        : dim(d), values(static_cast<size_t>(d) * static_cast<size_t>(d), 0.0) {}

    double& at(int r, int c) { return values[static_cast<size_t>(r) * dim + c]; }
    double at(int r, int c) const { return values[static_cast<size_t>(r) * dim + c]; }
};

SymMatrix identity(int dim);

// Throws std::invalid_argument unless |A[i][j] - A[j][i]| <= 1e-12 * max(1, |A[i][j]|).
void check_symmetric(const SymMatrix& m);

// (1/N) sum_i (x_i - mean)(x_i - mean)^T over a non-empty sample list.
SymMatrix covariance(const std::vector<Vector>& samples, const Vector& mean);

// (m + eps*I)^-1 by Cholesky, eps = epsilon_scale * trace(m)/dim, or
// epsilon_scale itself when the trace is zero. Output is symmetrized.
SymMatrix regularized_inverse(const SymMatrix& m, double epsilon_scale);

// (x - mu)^T precision (x - mu); round-off below zero is clamped to zero.
double quadratic_form(const Vector& x, const Vector& mu, const SymMatrix& precision);

}  // namespace gradova::linalg
