#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>

#include "clop/errors.hpp"
#include "clop/matrix.hpp"

namespace clop::diagnostics {

struct SvdResult {
    Vec sigma;   // descending, length k = min(rows, cols) of the input
    Matrix U;    // rows x k, orthonormal columns (left vectors)
    Matrix V;    // cols x k, orthonormal columns (right vectors)
};

namespace detail {

inline constexpr double kJacobiTol = 1e-12;

// One-sided Jacobi on the columns of A (n x k, n >= k): right-multiplies
// rotations until all column pairs are orthogonal, accumulating them in V.
// On exit A's columns are U * sigma and V holds the right singular vectors.
// Small and deterministic; speed is not the concern at this scale.
inline void jacobi_orthogonalize(Matrix& A, Matrix& V) {
    const std::size_t n = A.rows, k = A.cols;
    V = Matrix::identity(k);
    if (k < 2) return;
    // Columns whose squared norm falls below this floor are cancellation
    // residue of an exactly deficient input; rotating them against each other
    // chases roundoff noise and never converges.
    double scale2 = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
        double c2 = 0.0;
        for (std::size_t r = 0; r < n; ++r) c2 += A(r, j) * A(r, j);
        scale2 = std::max(scale2, c2);
    }
    const double floor2 = scale2 * 1e-30;
    const std::size_t max_sweeps = 10 * k * k;
    for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
        bool converged = true;
        for (std::size_t p = 0; p + 1 < k; ++p) {
            for (std::size_t q = p + 1; q < k; ++q) {
                double app = 0.0, aqq = 0.0, apq = 0.0;
                for (std::size_t r = 0; r < n; ++r) {
                    double x = A(r, p), y = A(r, q);
                    app += x * x;
                    aqq += y * y;
                    apq += x * y;
                }
                if (app <= floor2 || aqq <= floor2) continue;
                if (std::fabs(apq) <= kJacobiTol * std::sqrt(app * aqq) || apq == 0.0)
                    continue;
                converged = false;
                double zeta = (aqq - app) / (2.0 * apq);
                double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                           (std::fabs(zeta) + std::sqrt(1.0 + zeta * zeta));
                double c = 1.0 / std::sqrt(1.0 + t * t);
                double s = c * t;
                for (std::size_t r = 0; r < n; ++r) {
                    double x = A(r, p), y = A(r, q);
                    A(r, p) = c * x - s * y;
                    A(r, q) = s * x + c * y;
                }
                for (std::size_t r = 0; r < k; ++r) {
                    double x = V(r, p), y = V(r, q);
                    V(r, p) = c * x - s * y;
                    V(r, q) = s * x + c * y;
                }
            }
        }
        if (converged) return;
    }
    throw ConvergenceFailure("Jacobi SVD did not converge within the sweep budget");
}

// Thin SVD of A (n x k) with n >= k.
inline SvdResult svd_tall(Matrix A) {
    const std::size_t n = A.rows, k = A.cols;
    Matrix V;
    jacobi_orthogonalize(A, V);
    SvdResult r;
    r.sigma.resize(k);
    for (std::size_t j = 0; j < k; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += A(i, j) * A(i, j);
        r.sigma[j] = std::sqrt(s);
    }
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return r.sigma[a] > r.sigma[b]; });
    SvdResult out;
    out.sigma.resize(k);
    out.U = Matrix(n, k);
    out.V = Matrix(k, k);
    for (std::size_t jj = 0; jj < k; ++jj) {
        std::size_t j = order[jj];
        double s = r.sigma[j];
        out.sigma[jj] = s;
        // Zero singular value: leave the U column zero; V still carries an
        // orthonormal direction, which is all the callers need.
        for (std::size_t i = 0; i < n; ++i)
            out.U(i, jj) = s > 0.0 ? A(i, j) / s : 0.0;
        for (std::size_t i = 0; i < k; ++i) out.V(i, jj) = V(i, j);
    }
    return out;
}

} // namespace detail

// Thin SVD of M (any shape): M = U diag(sigma) V^T with sigma descending.
inline SvdResult jacobi_svd(const Matrix& M) {
    if (M.rows >= M.cols) return detail::svd_tall(M);
    SvdResult t = detail::svd_tall(transpose(M));
    return SvdResult{std::move(t.sigma), std::move(t.V), std::move(t.U)};
}

// Singular values only, descending, each >= 0.
inline Vec singular_spectrum(const Matrix& M) {
    return jacobi_svd(M).sigma;
}

} // namespace clop::diagnostics
