#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "scorebreak/errors.hpp"

namespace scorebreak {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles. Sized for regression problems with a
/// handful of columns; nothing here is tuned for large dimensions.
class Matrix {
  public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), a_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t i, std::size_t j) { return a_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return a_[i * cols_ + j]; }

    const std::vector<double>& data() const { return a_; }

    Vector column(std::size_t j) const {
        Vector c(rows_);
        for (std::size_t i = 0; i < rows_; ++i) c[i] = (*this)(i, j);
        return c;
    }

    /// Matrix with the listed columns, in the listed order.
    Matrix select_columns(const std::vector<std::size_t>& cols) const {
        Matrix s(rows_, cols.size());
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols.size(); ++j) s(i, j) = (*this)(i, cols[j]);
        return s;
    }

    Vector multiply(const Vector& x) const {
        Vector y(rows_, 0.0);
        for (std::size_t i = 0; i < rows_; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < cols_; ++j) acc += (*this)(i, j) * x[j];
            y[i] = acc;
        }
        return y;
    }

    Vector multiply_transposed(const Vector& y) const {
        Vector x(cols_, 0.0);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) x[j] += (*this)(i, j) * y[i];
        return x;
    }

    bool all_finite() const {
        for (double v : a_)
            if (!std::isfinite(v)) return false;
        return true;
    }

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> a_;
};

inline double norm2(const Vector& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

inline double dot(const Vector& a, const Vector& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

struct LstsqResult {
    Vector x;
    std::size_t rank = 0;
    /// Columns (indices into the input matrix) that were treated as linearly
    /// dependent and pinned to zero in the basic solution.
    std::vector<std::size_t> dependent_columns;
};

/// Least squares min ||Ax - b|| via Householder QR with column pivoting.
/// On rank deficiency the free variables of the pivoted basic solution are
/// set to zero and reported in dependent_columns.
inline LstsqResult lstsq(const Matrix& A, const Vector& b, double rank_tol_rel = 1e-12) {
    const std::size_t m = A.rows();
    const std::size_t p = A.cols();
    Matrix R = A;               // reduced in place
    Vector qtb = b;             // accumulates Q^T b
    std::vector<std::size_t> perm(p);
    for (std::size_t j = 0; j < p; ++j) perm[j] = j;

    Vector colnorm2(p, 0.0);
    for (std::size_t j = 0; j < p; ++j)
        for (std::size_t i = 0; i < m; ++i) colnorm2[j] += R(i, j) * R(i, j);

    const std::size_t steps = std::min(m, p);
    std::size_t rank = steps;
    double r00 = 0.0;

    for (std::size_t kstep = 0; kstep < steps; ++kstep) {
        // Pivot: bring the column with the largest remaining norm to front.
        std::size_t piv = kstep;
        double best = -1.0;
        for (std::size_t j = kstep; j < p; ++j) {
            double nrm = 0.0;
            for (std::size_t i = kstep; i < m; ++i) nrm += R(i, j) * R(i, j);
            if (nrm > best) {
                best = nrm;
                piv = j;
            }
        }
        if (piv != kstep) {
            for (std::size_t i = 0; i < m; ++i) std::swap(R(i, kstep), R(i, piv));
            std::swap(perm[kstep], perm[piv]);
        }

        // Householder vector for column kstep.
        double alpha = 0.0;
        for (std::size_t i = kstep; i < m; ++i) alpha += R(i, kstep) * R(i, kstep);
        alpha = std::sqrt(alpha);
        if (kstep == 0) r00 = alpha;
        if (alpha <= rank_tol_rel * r00 || alpha == 0.0) {
            rank = kstep;
            break;
        }
        if (R(kstep, kstep) > 0) alpha = -alpha;

        Vector v(m - kstep);
        v[0] = R(kstep, kstep) - alpha;
        for (std::size_t i = kstep + 1; i < m; ++i) v[i - kstep] = R(i, kstep);
        double vnorm2 = 0.0;
        for (double t : v) vnorm2 += t * t;
        if (vnorm2 == 0.0) {
            rank = kstep;
            break;
        }

        R(kstep, kstep) = alpha;
        for (std::size_t i = kstep + 1; i < m; ++i) R(i, kstep) = 0.0;

        for (std::size_t j = kstep + 1; j < p; ++j) {
            double proj = 0.0;
            for (std::size_t i = kstep; i < m; ++i) proj += v[i - kstep] * R(i, j);
            proj *= 2.0 / vnorm2;
            for (std::size_t i = kstep; i < m; ++i) R(i, j) -= proj * v[i - kstep];
        }
        double projb = 0.0;
        for (std::size_t i = kstep; i < m; ++i) projb += v[i - kstep] * qtb[i];
        projb *= 2.0 / vnorm2;
        for (std::size_t i = kstep; i < m; ++i) qtb[i] -= projb * v[i - kstep];
    }

    // Back substitution on the leading rank x rank triangle.
    Vector xp(p, 0.0);
    for (std::size_t ii = rank; ii-- > 0;) {
        double s = qtb[ii];
        for (std::size_t j = ii + 1; j < rank; ++j) s -= R(ii, j) * xp[j];
        xp[ii] = s / R(ii, ii);
    }

    LstsqResult out;
    out.x.assign(p, 0.0);
    out.rank = rank;
    for (std::size_t j = 0; j < p; ++j) {
        if (j < rank)
            out.x[perm[j]] = xp[j];
        else
            out.dependent_columns.push_back(perm[j]);
    }
    return out;
}

/// Singular values by one-sided Jacobi rotations, descending order.
/// Exact enough for condition estimates on regression-sized matrices.
inline Vector singular_values(const Matrix& A) {
    const std::size_t m = A.rows();
    const std::size_t p = A.cols();
    if (p == 0) return {};
    // Work on columns of a copy; rotations orthogonalize column pairs.
    std::vector<Vector> u(p, Vector(m));
    for (std::size_t j = 0; j < p; ++j)
        for (std::size_t i = 0; i < m; ++i) u[j][i] = A(i, j);

    const double eps = 1e-14;
    for (int sweep = 0; sweep < 60; ++sweep) {
        bool rotated = false;
        for (std::size_t a = 0; a + 1 < p; ++a) {
            for (std::size_t c = a + 1; c < p; ++c) {
                double apq = dot(u[a], u[c]);
                double app = dot(u[a], u[a]);
                double aqq = dot(u[c], u[c]);
                if (std::abs(apq) <= eps * std::sqrt(app * aqq)) continue;
                rotated = true;
                double tau = (aqq - app) / (2.0 * apq);
                double t = (tau >= 0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                double cs = 1.0 / std::sqrt(1.0 + t * t);
                double sn = cs * t;
                for (std::size_t i = 0; i < m; ++i) {
                    double va = u[a][i];
                    double vc = u[c][i];
                    u[a][i] = cs * va - sn * vc;
                    u[c][i] = sn * va + cs * vc;
                }
            }
        }
        if (!rotated) break;
    }

    Vector sv(p);
    for (std::size_t j = 0; j < p; ++j) sv[j] = norm2(u[j]);
    std::sort(sv.begin(), sv.end(), [](double a, double b) { return a > b; });
    return sv;
}

/// 2-norm condition number. Returns +inf when the smallest singular value
/// underflows relative to the largest.
inline double condition_number(const Matrix& A) {
    Vector sv = singular_values(A);
    if (sv.empty()) return 0.0;
    double hi = sv.front();
    double lo = sv.back();
    if (hi == 0.0) return 0.0;
    if (lo <= hi * 1e-300) return std::numeric_limits<double>::infinity();
    return hi / lo;
}

/// Cholesky factor L (lower triangular, C = L L^T) tolerant of positive
/// semidefinite input: a pivot within tol of zero zeroes its column. Throws
/// NonFiniteInput-style errors for indefinite matrices.
inline Matrix cholesky_psd(const Matrix& C, double tol = 1e-10) {
    const std::size_t n = C.rows();
    if (C.cols() != n) throw Error(ErrorKind::InvalidSpec, "correlation matrix must be square");
    Matrix L(n, n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        double d = C(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= L(j, k) * L(j, k);
        if (d < -tol)
            throw Error(ErrorKind::InvalidSpec, "correlation matrix is not positive semidefinite");
        if (d <= tol) {
            // Semidefinite direction: the column collapses onto earlier ones.
            continue;
        }
        double root = std::sqrt(d);
        L(j, j) = root;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = C(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= L(i, k) * L(j, k);
            L(i, j) = s / root;
        }
    }
    return L;
}

}  // namespace scorebreak
