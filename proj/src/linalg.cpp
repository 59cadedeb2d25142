#include "gradova/linalg.hpp"

#include <cmath>
#include <stdexcept>

#include "gradova/kernels.hpp"

namespace gradova::linalg {

SymMatrix identity(int dim) {
    SymMatrix m(dim);
    for (int i = 0; i < dim; ++i) m.at(i, i) = 1.0;
    m.is_positive_semidefinite = true;
    return m;
}

void check_symmetric(const SymMatrix& m) {
    for (int i = 0; i < m.dim; ++i) {
        for (int j = i + 1; j < m.dim; ++j) {
            const double a = m.at(i, j);
            const double b = m.at(j, i);
            if (std::abs(a - b) > 1e-12 * std::max(1.0, std::abs(a))) {
                throw std::invalid_argument("matrix is not symmetric");
            }
        }
    }
}

SymMatrix covariance(const std::vector<Vector>& samples, const Vector& mean) {
    if (samples.empty()) throw std::invalid_argument("covariance: empty sample list");
    for (const auto& s : samples) {
        if (s.size() != mean.size())
            throw std::invalid_argument("covariance: sample/mean dimension mismatch");
    }
    SymMatrix cov = kernels::scatter_matrix(samples, mean);
    const double inv_n = 1.0 / static_cast<double>(samples.size());
    for (auto& v : cov.values) v *= inv_n;
    cov.is_positive_semidefinite = true;
    return cov;
}

namespace {

// Lower-triangular Cholesky factor of an SPD matrix.
std::vector<double> cholesky(const SymMatrix& a) {
    const int n = a.dim;
    std::vector<double> L(static_cast<size_t>(n) * n, 0.0);
    for (int j = 0; j < n; ++j) {
        double diag = a.at(j, j);
        for (int k = 0; k < j; ++k) diag -= L[j * n + k] * L[j * n + k];
        if (!(diag > 0.0))
            throw std::runtime_error("regularized_inverse: matrix not positive definite");
        const double ljj = std::sqrt(diag);
        L[j * n + j] = ljj;
        for (int i = j + 1; i < n; ++i) {
            double s = a.at(i, j);
            for (int k = 0; k < j; ++k) s -= L[i * n + k] * L[j * n + k];
            L[i * n + j] = s / ljj;
        }
    }
    return L;
}

}  // namespace

SymMatrix regularized_inverse(const SymMatrix& m, double epsilon_scale) {
    check_symmetric(m);
    if (!(epsilon_scale > 0.0))
        throw std::invalid_argument("regularized_inverse: epsilon_scale must be positive");
    const int n = m.dim;
    double trace = 0.0;
    for (int i = 0; i < n; ++i) trace += m.at(i, i);
    const double eps = trace == 0.0 ? epsilon_scale
                                    : epsilon_scale * trace / static_cast<double>(n);

    SymMatrix a = m;
    for (int i = 0; i < n; ++i) a.at(i, i) += eps;
    const std::vector<double> L = cholesky(a);

    // Columns of the inverse by forward/back substitution against e_j.
    SymMatrix inv(n);
    std::vector<double> y(n), x(n);
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            double s = i == j ? 1.0 : 0.0;
            for (int k = 0; k < i; ++k) s -= L[i * n + k] * y[k];
            y[i] = s / L[i * n + i];
        }
        for (int i = n - 1; i >= 0; --i) {
            double s = y[i];
            for (int k = i + 1; k < n; ++k) s -= L[k * n + i] * x[k];
            x[i] = s / L[i * n + i];
        }
        for (int i = 0; i < n; ++i) inv.at(i, j) = x[i];
    }

    // Kill round-off asymmetry.
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double v = 0.5 * (inv.at(i, j) + inv.at(j, i));
            inv.at(i, j) = v;
            inv.at(j, i) = v;
        }
    }
    inv.is_positive_semidefinite = true;
    for (double v : inv.values) {
        if (!std::isfinite(v))
            throw std::runtime_error("regularized_inverse: non-finite result");
    }
    return inv;
}

double quadratic_form(const Vector& x, const Vector& mu, const SymMatrix& precision) {
    std::vector<Vector> one{x};
    return kernels::serial::quadratic_forms(one, mu, precision)[0];
}

}  // namespace gradova::linalg
