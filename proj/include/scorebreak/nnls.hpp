#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <set>
#include <string>
#include <vector>

#include "scorebreak/errors.hpp"
#include "scorebreak/linalg.hpp"

// Nonnegative least squares: min ‖Ax − b‖₂ subject to x ≥ 0, by the
// Lawson–Hanson active-set method. Variables start pinned at zero; the one
// whose gradient pushes hardest below zero is released into the passive set,
// the unconstrained problem is re-solved on the passive columns, and any
// coefficient that would cross zero forces a line-search step back to the
// boundary where the crossing variables are pinned again.
//
// Zeroing the negative entries of the unconstrained solution is NOT the same
// thing and can be strictly worse; see the regression test for a 2x2 instance
// where clamping doubles the residual.

namespace scorebreak {

struct NnlsProblem {
    Matrix A;
    Vector b;
    /// Gradient tolerance for the optimality test. <= 0 picks the default
    /// 1e-10 * (largest column norm of A).
    double tol = 0.0;
    /// Outer iteration cap. 0 picks the default 3 * (number of columns).
    std::size_t max_iter = 0;
};

struct NnlsSolution {
    Vector x;                    // elementwise >= 0, even on non-converged exits
    double residual_norm = 0.0;  // ||A x - b||
    Vector gradient;             // A^T (A x - b) at the returned x
    std::vector<std::size_t> active_set;  // indices with x_j == 0, ascending
    std::size_t iterations = 0;           // outer iterations consumed
    bool converged = false;

    // Diagnostics. dependent_columns lists coefficients that were zeroed
    // inside a rank-deficient passive solve (solution then non-unique);
    // passive_condition is the condition number of the final positive-support
    // columns (1 when the support is empty).
    bool collinearity_warning = false;
    double passive_condition = 1.0;
    std::vector<std::size_t> dependent_columns;
    std::vector<double> residual_trace;  // residual norm after each outer iteration
    double tol_used = 0.0;
};

/// Passive-submatrix condition number above which solutions are flagged as
/// untrustworthy (coefficients non-unique in practice).
inline constexpr double kNnlsConditionLimit = 1e8;

namespace detail {

inline Vector residual_of(const Matrix& A, const Vector& x, const Vector& b) {
    Vector r = A.multiply(x);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] -= b[i];
    return r;  // A x - b
}

}  // namespace detail

inline NnlsSolution nnls_solve(const NnlsProblem& problem) {
    const Matrix& A = problem.A;
    const Vector& b = problem.b;
    const std::size_t m = A.rows();
    const std::size_t p = A.cols();
    if (m == 0 || p == 0)
        throw Error(ErrorKind::ConfigInvalid, "nnls needs at least one row and one column");
    if (b.size() != m)
        throw Error(ErrorKind::ConfigInvalid, "nnls right-hand side length does not match A");
    if (!A.all_finite())
        throw Error(ErrorKind::NonFiniteInput, "nnls design matrix has a non-finite entry");
    for (double v : b)
        if (!std::isfinite(v))
            throw Error(ErrorKind::NonFiniteInput, "nnls right-hand side has a non-finite entry");

    double max_col_norm = 0.0;
    for (std::size_t j = 0; j < p; ++j) max_col_norm = std::max(max_col_norm, norm2(A.column(j)));
    const double tol = problem.tol > 0.0 ? problem.tol : 1e-10 * max_col_norm;
    const std::size_t max_iter = problem.max_iter > 0 ? problem.max_iter : 3 * p;

    NnlsSolution sol;
    sol.tol_used = tol;
    sol.x.assign(p, 0.0);
    std::vector<bool> passive(p, false);
    std::set<std::size_t> dependent;

    auto solve_passive = [&](std::vector<std::size_t>& cols) -> Vector {
        cols.clear();
        for (std::size_t j = 0; j < p; ++j)
            if (passive[j]) cols.push_back(j);
        LstsqResult ls = lstsq(A.select_columns(cols), b);
        for (std::size_t d : ls.dependent_columns) dependent.insert(cols[d]);
        return ls.x;
    };

    while (sol.iterations < max_iter) {
        // Entering test: gradient of 1/2 ||Ax-b||^2 at the current point.
        Vector r = detail::residual_of(A, sol.x, b);
        Vector g = A.multiply_transposed(r);
        std::size_t enter = p;
        double most_negative = -tol;
        for (std::size_t j = 0; j < p; ++j) {
            if (passive[j]) continue;
            if (g[j] < most_negative) {  // strict: ties resolve to the lowest index
                most_negative = g[j];
                enter = j;
            }
        }
        if (enter == p) {
            sol.converged = true;
            break;
        }
        passive[enter] = true;
        ++sol.iterations;

        // Inner loop: re-solve on the passive columns, stepping back to the
        // boundary while any coefficient lands negative. Each step pins at
        // least one variable, so this finishes in at most p rounds.
        std::vector<std::size_t> cols;
        for (;;) {
            Vector z = solve_passive(cols);
            bool feasible = true;
            for (double v : z)
                if (v < 0.0) { feasible = false; break; }
            if (feasible) {
                // z >= 0 accepted even with exact zeros; demanding strict
                // positivity re-enters the same variable forever when the
                // passive columns are linearly dependent.
                for (double& v : sol.x) v = 0.0;
                for (std::size_t q = 0; q < cols.size(); ++q) sol.x[cols[q]] = z[q];
                break;
            }
            double alpha = 1.0;
            for (std::size_t q = 0; q < cols.size(); ++q) {
                if (z[q] >= 0.0) continue;
                double xq = sol.x[cols[q]];
                double a = xq / (xq - z[q]);
                alpha = std::min(alpha, a);
            }
            for (std::size_t q = 0; q < cols.size(); ++q) {
                std::size_t j = cols[q];
                sol.x[j] += alpha * (z[q] - sol.x[j]);
                if (z[q] < 0.0 && sol.x[j] <= 0.0) {
                    sol.x[j] = 0.0;
                    passive[j] = false;
                }
            }
            // Guard against alpha rounding keeping every variable positive.
            bool any_passive_left = false;
            for (std::size_t q = 0; q < cols.size(); ++q)
                if (passive[cols[q]]) any_passive_left = true;
            if (!any_passive_left) break;
        }

        double rn = norm2(detail::residual_of(A, sol.x, b));
        assert(sol.residual_trace.empty() || rn <= sol.residual_trace.back() * (1.0 + 1e-12));
        sol.residual_trace.push_back(rn);
    }
    if (!sol.converged && sol.iterations >= max_iter) sol.converged = false;

    Vector r = detail::residual_of(A, sol.x, b);
    sol.residual_norm = norm2(r);
    sol.gradient = A.multiply_transposed(r);
    for (std::size_t j = 0; j < p; ++j)
        if (sol.x[j] == 0.0) sol.active_set.push_back(j);
    sol.dependent_columns.assign(dependent.begin(), dependent.end());

    std::vector<std::size_t> support;
    for (std::size_t j = 0; j < p; ++j)
        if (sol.x[j] > 0.0) support.push_back(j);
    if (!support.empty()) sol.passive_condition = condition_number(A.select_columns(support));
    sol.collinearity_warning =
        sol.passive_condition > kNnlsConditionLimit || !sol.dependent_columns.empty();
    return sol;
}

}  // namespace scorebreak
