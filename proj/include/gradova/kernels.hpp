#pragma once

#include "gradova/linalg.hpp"

namespace gradova::kernels {

// Data-parallel inner loops. The parallel versions split work over
// independent output slots only (rows of the scatter matrix, one score per
// sample), never over a shared floating-point accumulator, so they are
// bit-identical to the serial references below at any thread count.

// sum_i (x_i - mean)(x_i - mean)^T; parallel over output rows.
linalg::SymMatrix scatter_matrix(const std::vector<linalg::Vector>& samples,
                                 const linalg::Vector& mean);

// One quadratic form (x_i - mu)^T P (x_i - mu) per sample, clamped at zero;
// parallel over samples.
std::vector<double> quadratic_forms(const std::vector<linalg::Vector>& xs,
                                    const linalg::Vector& mu,
                                    const linalg::SymMatrix& precision);

namespace serial {

linalg::SymMatrix scatter_matrix(const std::vector<linalg::Vector>& samples,
                                 const linalg::Vector& mean);

std::vector<double> quadratic_forms(const std::vector<linalg::Vector>& xs,
                                    const linalg::Vector& mu,
                                    const linalg::SymMatrix& precision);

}  // namespace serial

// Thread cap from GRADOVA_THREADS; 0 means "no cap set".
int thread_cap();

// Threads a parallel region should request: the cap if set, otherwise the
// OpenMP default (1 without OpenMP).
int resolve_threads();

}  // namespace gradova::kernels
