#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace clop {

// Dense row-major double matrix. Rows carry embeddings throughout the
// library; no view machinery, copies are explicit and cheap at this scale.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> a;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), a(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }

    double* row(std::size_t i) { return a.data() + i * cols; }
    const double* row(std::size_t i) const { return a.data() + i * cols; }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }
};

inline bool operator==(const Matrix& x, const Matrix& y) {
    return x.rows == y.rows && x.cols == y.cols && x.a == y.a;
}

using Vec = std::vector<double>;

inline double dot(const double* x, const double* y, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
    return s;
}

inline double norm2(const double* x, std::size_t n) {
    return std::sqrt(dot(x, x, n));
}

inline double row_dot(const Matrix& m, std::size_t i, std::size_t j) {
    return dot(m.row(i), m.row(j), m.cols);
}

inline double row_norm(const Matrix& m, std::size_t i) {
    return norm2(m.row(i), m.cols);
}

// C = A * B^T. The common kernel here: similarity matrices Z Z^T and
// projections X V with V given row-wise.
inline Matrix mul_abt(const Matrix& A, const Matrix& B) {
    Matrix C(A.rows, B.rows);
    for (std::size_t i = 0; i < A.rows; ++i)
        for (std::size_t j = 0; j < B.rows; ++j)
            C(i, j) = dot(A.row(i), B.row(j), A.cols);
    return C;
}

// C = A^T * B, accumulated row-by-row (used for parameter gradients).
inline Matrix mul_atb(const Matrix& A, const Matrix& B) {
    Matrix C(A.cols, B.cols);
    for (std::size_t r = 0; r < A.rows; ++r) {
        const double* ar = A.row(r);
        const double* br = B.row(r);
        for (std::size_t i = 0; i < A.cols; ++i) {
            double ai = ar[i];
            if (ai == 0.0) continue;
            double* ci = C.row(i);
            for (std::size_t j = 0; j < B.cols; ++j) ci[j] += ai * br[j];
        }
    }
    return C;
}

inline Matrix transpose(const Matrix& A) {
    Matrix T(A.cols, A.rows);
    for (std::size_t i = 0; i < A.rows; ++i)
        for (std::size_t j = 0; j < A.cols; ++j) T(j, i) = A(i, j);
    return T;
}

inline double max_abs(const Matrix& A) {
    double m = 0.0;
    for (double v : A.a) m = std::max(m, std::fabs(v));
    return m;
}

inline bool all_finite(const Matrix& A) {
    for (double v : A.a)
        if (!std::isfinite(v)) return false;
    return true;
}

} // namespace clop
