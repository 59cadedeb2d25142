#include "gradova/kernels.hpp"

#include <cmath>
#include <cstdlib>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace gradova::kernels {

namespace {

void check_scatter_inputs(const std::vector<linalg::Vector>& samples,
                          const linalg::Vector& mean) {
    for (const auto& s : samples) {
        if (s.size() != mean.size())
            throw std::invalid_argument("scatter_matrix: dimension mismatch");
    }
}

void check_form_inputs(const std::vector<linalg::Vector>& xs,
                       const linalg::Vector& mu,
                       const linalg::SymMatrix& precision) {
    if (static_cast<int>(mu.size()) != precision.dim)
        throw std::invalid_argument("quadratic_forms: mean/precision dimension mismatch");
    for (const auto& x : xs) {
        if (x.size() != mu.size())
            throw std::invalid_argument("quadratic_forms: sample dimension mismatch");
    }
}

// Entry (r, c) accumulated over samples in index order; both the serial and
// the parallel variant add in this exact order.
inline double scatter_entry(const std::vector<linalg::Vector>& samples,
                            const linalg::Vector& mean, int r, int c) {
    double acc = 0.0;
    for (const auto& s : samples) acc += (s[r] - mean[r]) * (s[c] - mean[c]);
    return acc;
}

inline double one_form(const linalg::Vector& x, const linalg::Vector& mu,
                       const linalg::SymMatrix& p) {
    const int n = p.dim;
    double total = 0.0;
    for (int r = 0; r < n; ++r) {
        double row = 0.0;
        for (int c = 0; c < n; ++c) row += p.at(r, c) * (x[c] - mu[c]);
        total += (x[r] - mu[r]) * row;
    }
    return total < 0.0 ? 0.0 : total;
}

}  // namespace

int thread_cap() {
    static const int cap = [] {
        const char* env = std::getenv("GRADOVA_THREADS");
        if (!env) return 0;
        const int v = std::atoi(env);
        return v > 0 ? v : 0;
    }();
    return cap;
}

int resolve_threads() {
#ifdef _OPENMP
    const int cap = thread_cap();
    const int def = omp_get_max_threads();
    return cap > 0 && cap < def ? cap : def;
#else
    return 1;
#endif
}

linalg::SymMatrix scatter_matrix(const std::vector<linalg::Vector>& samples,
                                 const linalg::Vector& mean) {
    check_scatter_inputs(samples, mean);
    const int d = static_cast<int>(mean.size());
    linalg::SymMatrix out(d);
#pragma omp parallel for schedule(static) num_threads(resolve_threads())
    for (int r = 0; r < d; ++r) {
        for (int c = r; c < d; ++c) {
            const double v = scatter_entry(samples, mean, r, c);
            out.at(r, c) = v;
            out.at(c, r) = v;
        }
    }
    return out;
}

std::vector<double> quadratic_forms(const std::vector<linalg::Vector>& xs,
                                    const linalg::Vector& mu,
                                    const linalg::SymMatrix& precision) {
    check_form_inputs(xs, mu, precision);
    const int n = static_cast<int>(xs.size());
    std::vector<double> out(xs.size());
#pragma omp parallel for schedule(static) num_threads(resolve_threads())
    for (int i = 0; i < n; ++i) out[i] = one_form(xs[i], mu, precision);
    return out;
}

namespace serial {

linalg::SymMatrix scatter_matrix(const std::vector<linalg::Vector>& samples,
                                 const linalg::Vector& mean) {
    check_scatter_inputs(samples, mean);
    const int d = static_cast<int>(mean.size());
    linalg::SymMatrix out(d);
    for (int r = 0; r < d; ++r) {
        for (int c = r; c < d; ++c) {
            const double v = scatter_entry(samples, mean, r, c);
            out.at(r, c) = v;
            out.at(c, r) = v;
        }
    }
    return out;
}

std::vector<double> quadratic_forms(const std::vector<linalg::Vector>& xs,
                                    const linalg::Vector& mu,
                                    const linalg::SymMatrix& precision) {
    check_form_inputs(xs, mu, precision);
    std::vector<double> out(xs.size());
    for (size_t i = 0; i < xs.size(); ++i) out[i] = one_form(xs[i], mu, precision);
    return out;
}

}  // namespace serial

}  // namespace gradova::kernels
