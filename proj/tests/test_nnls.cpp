#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "nnls_oracle.hpp"
#include "scorebreak/nnls.hpp"

using namespace scorebreak;

namespace {

Matrix make(std::size_t rows, std::size_t cols, std::initializer_list<double> vals) {
    Matrix m(rows, cols);
    std::size_t i = 0;
    for (double v : vals) m(i / cols, i % cols) = v, ++i;
    return m;
}

std::vector<std::vector<double>> rows_of(const Matrix& m) {
    std::vector<std::vector<double>> out(m.rows(), std::vector<double>(m.cols()));
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) out[i][j] = m(i, j);
    return out;
}

double residual_sq(const Matrix& A, const Vector& x, const Vector& b) {
    Vector ax = A.multiply(x);
    double s = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) s += (ax[i] - b[i]) * (ax[i] - b[i]);
    return s;
}

// Gradient conditions at the returned point: zero coordinates may not point
// downhill, positive coordinates must be stationary.
void require_kkt(const NnlsSolution& sol) {
    for (std::size_t j = 0; j < sol.x.size(); ++j) {
        REQUIRE(sol.x[j] >= 0.0);
        if (sol.x[j] == 0.0)
            REQUIRE(sol.gradient[j] >= -sol.tol_used);
        else
            REQUIRE(std::fabs(sol.gradient[j]) <= sol.tol_used);
    }
}

}  // namespace

TEST_CASE("identity design clamps the negative coordinate") {
    NnlsProblem p;
    p.A = make(2, 2, {1, 0, 0, 1});
    p.b = {3, -1};
    NnlsSolution sol = nnls_solve(p);
    REQUIRE_THAT(sol.x[0], Catch::Matchers::WithinAbs(3.0, 1e-12));
    REQUIRE(sol.x[1] == 0.0);
    REQUIRE(sol.active_set == std::vector<std::size_t>{1});
    REQUIRE_THAT(sol.residual_norm, Catch::Matchers::WithinAbs(1.0, 1e-12));
    REQUIRE(sol.converged);
}

TEST_CASE("overdetermined interior solution") {
    NnlsProblem p;
    p.A = make(3, 2, {1, 0, 0, 1, 1, 1});
    p.b = {1, 1, 0};
    NnlsSolution sol = nnls_solve(p);
    REQUIRE_THAT(sol.x[0], Catch::Matchers::WithinAbs(1.0 / 3.0, 1e-12));
    REQUIRE_THAT(sol.x[1], Catch::Matchers::WithinAbs(1.0 / 3.0, 1e-12));
    REQUIRE(sol.active_set.empty());
}

TEST_CASE("all-negative targets give the zero vector") {
    NnlsProblem p;
    p.A = make(2, 1, {1, 1});
    p.b = {-1, -3};
    NnlsSolution sol = nnls_solve(p);
    REQUIRE(sol.x == Vector{0.0});
    REQUIRE_THAT(sol.residual_norm, Catch::Matchers::WithinRel(std::sqrt(10.0), 1e-12));
    REQUIRE(sol.iterations == 0);
}

TEST_CASE("clamping the unconstrained solution is not optimal") {
    // Unconstrained minimizer is [0.8, -0.6]; zeroing the negative entry
    // leaves residual^2 = 3.6, while the true constrained optimum [0.2, 0]
    // reaches 1.8. The solver must find the latter.
    Matrix A = make(2, 2, {2, 1, 1, 3});
    Vector b = {1, -1};

    LstsqResult unconstrained = lstsq(A, b);
    REQUIRE_THAT(unconstrained.x[0], Catch::Matchers::WithinAbs(0.8, 1e-12));
    REQUIRE_THAT(unconstrained.x[1], Catch::Matchers::WithinAbs(-0.6, 1e-12));

    Vector clamped = {0.8, 0.0};
    REQUIRE_THAT(residual_sq(A, clamped, b), Catch::Matchers::WithinRel(3.6, 1e-12));

    NnlsProblem p;
    p.A = A;
    p.b = b;
    NnlsSolution sol = nnls_solve(p);
    REQUIRE_THAT(sol.x[0], Catch::Matchers::WithinAbs(0.2, 1e-12));
    REQUIRE(sol.x[1] == 0.0);
    REQUIRE_THAT(residual_sq(A, sol.x, b), Catch::Matchers::WithinRel(1.8, 1e-12));
    require_kkt(sol);
}

TEST_CASE("matches exhaustive enumeration on random small problems") {
    std::mt19937_64 rng(20240517);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::uniform_int_distribution<std::size_t> mdist(3, 12);
    std::uniform_int_distribution<std::size_t> pdist(1, 3);

    for (int trial = 0; trial < 20; ++trial) {
        std::size_t m = mdist(rng), p = pdist(rng);
        NnlsProblem prob;
        prob.A = Matrix(m, p);
        prob.b.resize(m);
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < p; ++j) prob.A(i, j) = unit(rng);
            prob.b[i] = unit(rng);
        }
        NnlsSolution sol = nnls_solve(prob);
        nnls_oracle::Result ref = nnls_oracle::solve(rows_of(prob.A), prob.b);

        INFO("trial " << trial << " m=" << m << " p=" << p);
        REQUIRE_THAT(sol.residual_norm,
                     Catch::Matchers::WithinRel(ref.residual_norm, 1e-8) ||
                         Catch::Matchers::WithinAbs(ref.residual_norm, 1e-10));
        for (std::size_t j = 0; j < p; ++j)
            REQUIRE_THAT(sol.x[j], Catch::Matchers::WithinRel(ref.x[j], 1e-8) ||
                                       Catch::Matchers::WithinAbs(ref.x[j], 1e-10));
    }
}

TEST_CASE("KKT conditions hold on random wider problems") {
    std::mt19937_64 rng(911);
    std::uniform_real_distribution<double> unit(-2.0, 2.0);
    std::uniform_int_distribution<std::size_t> pdist(1, 12);

    for (int trial = 0; trial < 20; ++trial) {
        std::size_t p = pdist(rng);
        std::size_t m = p + 4;
        NnlsProblem prob;
        prob.A = Matrix(m, p);
        prob.b.resize(m);
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < p; ++j) prob.A(i, j) = unit(rng);
            prob.b[i] = unit(rng);
        }
        NnlsSolution sol = nnls_solve(prob);
        INFO("trial " << trial << " p=" << p);
        REQUIRE(sol.converged);
        require_kkt(sol);

        for (std::size_t i = 1; i < sol.residual_trace.size(); ++i)
            REQUIRE(sol.residual_trace[i] <= sol.residual_trace[i - 1] * (1.0 + 1e-12));
    }
}

TEST_CASE("iteration cap leaves a feasible iterate") {
    NnlsProblem p;
    p.A = make(3, 2, {1, 0, 0, 1, 1, 1});
    p.b = {1, 1, 0};
    p.max_iter = 1;
    NnlsSolution sol = nnls_solve(p);
    REQUIRE_FALSE(sol.converged);
    for (double v : sol.x) REQUIRE(v >= 0.0);
    REQUIRE(sol.iterations == 1);
}

TEST_CASE("non-finite inputs are rejected") {
    NnlsProblem p;
    p.A = make(2, 2, {1, 0, 0, 1});
    p.b = {1, std::numeric_limits<double>::quiet_NaN()};
    REQUIRE_THROWS_MATCHES(nnls_solve(p), Error, Catch::Matchers::Predicate<Error>([](
                               const Error& e) { return e.kind() == ErrorKind::NonFiniteInput; }));
    p.b = {1, 1};
    p.A(0, 0) = std::numeric_limits<double>::infinity();
    REQUIRE_THROWS_AS(nnls_solve(p), Error);
}

TEST_CASE("dimension mismatch is rejected") {
    NnlsProblem p;
    p.A = make(2, 2, {1, 0, 0, 1});
    p.b = {1, 1, 1};
    REQUIRE_THROWS_AS(nnls_solve(p), Error);
    p.b.clear();
    REQUIRE_THROWS_AS(nnls_solve(p), Error);
}

TEST_CASE("solution metadata is populated") {
    NnlsProblem p;
    p.A = make(3, 2, {1, 0, 0, 1, 1, 1});
    p.b = {1, 1, 0};
    NnlsSolution sol = nnls_solve(p);
    REQUIRE(sol.tol_used > 0.0);
    REQUIRE(sol.gradient.size() == 2);
    REQUIRE(sol.passive_condition >= 1.0);
    REQUIRE_FALSE(sol.collinearity_warning);
    REQUIRE(sol.dependent_columns.empty());
}
