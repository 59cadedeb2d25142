#include "doctest.h"

#include <cmath>

#include "gradova/linalg.hpp"
#include "gradova/rng.hpp"
#include "oracles.hpp"

using namespace gradova;
using linalg::SymMatrix;
using linalg::Vector;

namespace {

std::vector<Vector> random_vectors(int n, int d, uint64_t seed) {
    Rng rng(seed);
    std::vector<Vector> out(n, Vector(d));
    for (auto& v : out)
        for (auto& e : v) e = rng.normal();
    return out;
}

SymMatrix random_spd(int d, uint64_t seed) {
    const auto xs = random_vectors(3 * d, d, seed);
    Vector mean(d, 0.0);
    SymMatrix m = linalg::covariance(xs, mean);
    for (int i = 0; i < d; ++i) m.at(i, i) += 0.5;
    return m;
}

}  // namespace

TEST_SUITE("linalg") {

TEST_CASE("covariance of a single centered sample is zero") {
    const auto cov = linalg::covariance({{0.0, 0.0}}, {0.0, 0.0});
    for (double v : cov.values) CHECK(v == 0.0);
}

TEST_CASE("covariance of a symmetric pair") {
    const auto cov = linalg::covariance({{1.0, 0.0}, {-1.0, 0.0}}, {0.0, 0.0});
    CHECK(cov.at(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(cov.at(0, 1) == 0.0);
    CHECK(cov.at(1, 0) == 0.0);
    CHECK(cov.at(1, 1) == 0.0);
}

TEST_CASE("covariance matches the brute-force accumulation") {
    const auto xs = random_vectors(5, 3, 42);
    Vector mean(3, 0.0);
    for (const auto& x : xs)
        for (int k = 0; k < 3; ++k) mean[k] += x[k] / 5.0;
    const auto cov = linalg::covariance(xs, mean);
    const auto ref = oracles::covariance_brute(xs, mean);
    for (size_t k = 0; k < cov.values.size(); ++k)
        CHECK(cov.values[k] == doctest::Approx(ref.values[k]).epsilon(1e-12));
}

TEST_CASE("covariance rejects bad input") {
    CHECK_THROWS_AS(linalg::covariance({}, {0.0}), std::invalid_argument);
    CHECK_THROWS_AS(linalg::covariance({{1.0, 2.0}}, {0.0}), std::invalid_argument);
}

TEST_CASE("covariance is permutation invariant") {
    auto xs = random_vectors(20, 4, 7);
    Vector mean(4, 0.25);
    const auto a = linalg::covariance(xs, mean);
    std::reverse(xs.begin(), xs.end());
    std::swap(xs[3], xs[11]);
    const auto b = linalg::covariance(xs, mean);
    for (size_t k = 0; k < a.values.size(); ++k)
        CHECK(a.values[k] == doctest::Approx(b.values[k]).epsilon(1e-12));
}

TEST_CASE("regularized_inverse of the identity") {
    const auto inv = linalg::regularized_inverse(linalg::identity(3), 1e-6);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            CHECK(inv.at(i, j) ==
                  doctest::Approx(i == j ? 1.0 / (1.0 + 1e-6) : 0.0).epsilon(1e-12));
}

TEST_CASE("regularized_inverse of the zero matrix is the pure regularizer") {
    const auto inv = linalg::regularized_inverse(SymMatrix(2), 1e-6);
    CHECK(inv.at(0, 0) == doctest::Approx(1e6).epsilon(1e-12));
    CHECK(inv.at(1, 1) == doctest::Approx(1e6).epsilon(1e-12));
    CHECK(inv.at(0, 1) == 0.0);
}

TEST_CASE("regularized_inverse residual against the original matrix") {
    const auto m = random_spd(4, 99);
    const auto inv = linalg::regularized_inverse(m, 1e-6);
    double trace = 0.0;
    for (int i = 0; i < 4; ++i) trace += m.at(i, i);
    const double eps = 1e-6 * trace / 4.0;
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
            double s = 0.0;
            for (int k = 0; k < 4; ++k)
                s += (m.at(i, k) + (k == i ? eps : 0.0)) * inv.at(k, j);
            CHECK(s == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-8));
        }
    }
}

TEST_CASE("regularized_inverse is deterministic") {
    const auto m = random_spd(5, 3);
    const auto a = linalg::regularized_inverse(m, 1e-6);
    const auto b = linalg::regularized_inverse(m, 1e-6);
    CHECK(a.values == b.values);
}

TEST_CASE("regularized_inverse rejects asymmetric input") {
    SymMatrix m(2);
    m.at(0, 1) = 1.0;
    m.at(1, 0) = 2.0;
    CHECK_THROWS_AS(linalg::regularized_inverse(m, 1e-6), std::invalid_argument);
}

TEST_CASE("quadratic_form at the mean is zero") {
    const auto p = random_spd(3, 5);
    CHECK(linalg::quadratic_form({1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}, p) == 0.0);
}

TEST_CASE("quadratic_form with identity precision is squared distance") {
    CHECK(linalg::quadratic_form({3.0, 4.0}, {0.0, 0.0}, linalg::identity(2)) ==
          doctest::Approx(25.0).epsilon(1e-15));
}

TEST_CASE("quadratic_form matches the naive triple loop") {
    const auto p = random_spd(5, 11);
    const auto xs = random_vectors(10, 5, 12);
    const Vector mu = random_vectors(1, 5, 13)[0];
    for (const auto& x : xs) {
        CHECK(linalg::quadratic_form(x, mu, p) ==
              doctest::Approx(oracles::quadratic_form_naive(x, mu, p)).epsilon(1e-10));
    }
}

TEST_CASE("quadratic_form is non-negative for PSD precision") {
    Rng rng(21);
    for (int trial = 0; trial < 100; ++trial) {
        const auto p = random_spd(4, 1000 + trial);
        Vector x(4), mu(4);
        for (auto& e : x) e = rng.normal() * 10.0;
        for (auto& e : mu) e = rng.normal() * 10.0;
        CHECK(linalg::quadratic_form(x, mu, p) >= 0.0);
    }
}

TEST_CASE("quadratic_form is invariant under orthogonal change of basis") {
    const int d = 4;
    const auto q = oracles::random_orthogonal(d, 77);
    const auto p = random_spd(d, 78);
    Rng rng(79);
    Vector x(d), mu(d);
    for (auto& e : x) e = rng.normal();
    for (auto& e : mu) e = rng.normal();

    // Q P Q^T
    SymMatrix qpqt(d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            double s = 0.0;
            for (int a = 0; a < d; ++a)
                for (int b = 0; b < d; ++b) s += q[i][a] * p.at(a, b) * q[j][b];
            qpqt.at(i, j) = s;
        }
    // Exact symmetrization before use.
    for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j) {
            const double v = 0.5 * (qpqt.at(i, j) + qpqt.at(j, i));
            qpqt.at(i, j) = v;
            qpqt.at(j, i) = v;
        }

    const double lhs = linalg::quadratic_form(oracles::apply_matrix(q, x),
                                              oracles::apply_matrix(q, mu), qpqt);
    const double rhs = linalg::quadratic_form(x, mu, p);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-8));
}

}  // TEST_SUITE
