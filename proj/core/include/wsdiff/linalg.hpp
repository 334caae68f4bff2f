#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace wsdiff {

// Dense row-major matrix. Sized for desk problems: d x d covariances
// (d <= a few) and c x c label-transition solves.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Matrix() = default;
    Matrix(int r, int c, double fill = 0.0) : rows(r), cols(c), a(static_cast<size_t>(r) * c, fill) {}

    double& at(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
    double at(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }

    static Matrix identity(int n) {
        Matrix m(n, n);
        for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
        return m;
    }
};

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// Lower-triangular Cholesky factor of an SPD matrix.
inline Matrix cholesky(const Matrix& m) {
    if (m.rows != m.cols) throw std::invalid_argument("cholesky: matrix not square");
    const int n = m.rows;
    Matrix l(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            double s = m.at(i, j);
            for (int k = 0; k < j; ++k) s -= l.at(i, k) * l.at(j, k);
            if (i == j) {
                if (s <= 0.0) throw std::invalid_argument("cholesky: matrix not positive definite");
                l.at(i, i) = std::sqrt(s);
            } else {
                l.at(i, j) = s / l.at(j, j);
            }
        }
    }
    return l;
}

// Solves (L L^T) x = b given the lower Cholesky factor.
inline std::vector<double> cholesky_solve(const Matrix& l, std::span<const double> b) {
    const int n = l.rows;
    std::vector<double> y(b.begin(), b.end());
    for (int i = 0; i < n; ++i) {
        for (int k = 0; k < i; ++k) y[i] -= l.at(i, k) * y[k];
        y[i] /= l.at(i, i);
    }
    for (int i = n - 1; i >= 0; --i) {
        for (int k = i + 1; k < n; ++k) y[i] -= l.at(k, i) * y[k];
        y[i] /= l.at(i, i);
    }
    return y;
}

inline double cholesky_log_det(const Matrix& l) {
    double s = 0.0;
    for (int i = 0; i < l.rows; ++i) s += std::log(l.at(i, i));
    return 2.0 * s;
}

// LU solve with partial pivoting; throws on (numerically) singular systems.
inline std::vector<double> solve_linear(Matrix a, std::vector<double> b) {
    if (a.rows != a.cols || a.rows != static_cast<int>(b.size()))
        throw std::invalid_argument("solve_linear: shape mismatch");
    const int n = a.rows;
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r)
            if (std::fabs(a.at(r, col)) > std::fabs(a.at(piv, col))) piv = r;
        if (std::fabs(a.at(piv, col)) < 1e-300)
            throw std::runtime_error("solve_linear: singular matrix");
        if (piv != col) {
            for (int j = 0; j < n; ++j) std::swap(a.at(col, j), a.at(piv, j));
            std::swap(b[col], b[piv]);
        }
        for (int r = col + 1; r < n; ++r) {
            const double f = a.at(r, col) / a.at(col, col);
            if (f == 0.0) continue;
            for (int j = col; j < n; ++j) a.at(r, j) -= f * a.at(col, j);
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n);
    for (int i = n - 1; i >= 0; --i) {
        double s = b[i];
        for (int j = i + 1; j < n; ++j) s -= a.at(i, j) * x[j];
        x[i] = s / a.at(i, i);
    }
    return x;
}

inline Matrix inverse(const Matrix& a) {
    if (a.rows != a.cols) throw std::invalid_argument("inverse: matrix not square");
    const int n = a.rows;
    Matrix inv(n, n);
    for (int j = 0; j < n; ++j) {
        std::vector<double> e(n, 0.0);
        e[j] = 1.0;
        auto col = solve_linear(a, std::move(e));
        for (int i = 0; i < n; ++i) inv.at(i, j) = col[i];
    }
    return inv;
}

inline double norm1(const Matrix& a) {
    double best = 0.0;
    for (int j = 0; j < a.cols; ++j) {
        double s = 0.0;
        for (int i = 0; i < a.rows; ++i) s += std::fabs(a.at(i, j));
        best = std::max(best, s);
    }
    return best;
}

// 1-norm condition number via the explicit inverse; fine at these sizes.
inline double condition_number(const Matrix& a) {
    try {
        return norm1(a) * norm1(inverse(a));
    } catch (const std::runtime_error&) {
        return std::numeric_limits<double>::infinity();
    }
}

inline double logsumexp(std::span<const double> v) {
    if (v.empty()) throw std::invalid_argument("logsumexp: empty input");
    double m = v[0];
    for (double x : v) m = std::max(m, x);
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

// Wichura's AS241 inverse of the standard normal CDF, good to ~1e-15.
double inverse_normal_cdf(double p);

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

} // namespace wsdiff
