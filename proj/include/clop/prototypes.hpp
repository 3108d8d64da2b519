#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "clop/errors.hpp"
#include "clop/matrix.hpp"
#include "clop/rng.hpp"
#include "clop/svd.hpp"

namespace clop::prototypes {

enum class ProtoMode { orthonormal, etf, random };

inline std::string to_string(ProtoMode m) {
    switch (m) {
        case ProtoMode::orthonormal: return "orthonormal";
        case ProtoMode::etf: return "etf";
        default: return "random";
    }
}

inline ProtoMode proto_mode_from_string(const std::string& s) {
    if (s == "orthonormal") return ProtoMode::orthonormal;
    if (s == "etf") return ProtoMode::etf;
    if (s == "random") return ProtoMode::random;
    throw UsageError("unknown prototype mode: " + s);
}

// Frozen class anchors c_1..c_k, unit rows. Never trained.
struct PrototypeSet {
    Matrix vectors;  // k x dim
    ProtoMode mode = ProtoMode::orthonormal;
    std::uint64_t seed = 0;
    std::size_t k = 0;
    std::size_t dim = 0;

    const double* row(std::size_t c) const { return vectors.row(c); }
};

inline Matrix gram(const PrototypeSet& C) { return mul_abt(C.vectors, C.vectors); }

namespace detail {

// Deterministic sign convention: first entry of visible magnitude positive.
inline void fix_row_signs(Matrix& M) {
    for (std::size_t i = 0; i < M.rows; ++i) {
        double lead = 0.0;
        for (std::size_t j = 0; j < M.cols; ++j) {
            if (std::fabs(M(i, j)) > 1e-12) {
                lead = M(i, j);
                break;
            }
        }
        if (lead < 0.0)
            for (std::size_t j = 0; j < M.cols; ++j) M(i, j) = -M(i, j);
    }
}

inline void renormalize_rows(Matrix& M) {
    for (std::size_t i = 0; i < M.rows; ++i) {
        double n = row_norm(M, i);
        for (std::size_t j = 0; j < M.cols; ++j) M(i, j) /= n;
    }
}

} // namespace detail

// Orthonormal family spanning the row space of a seeded Gaussian k x m'
// sample: the left singular vectors of the transposed sample, sign-fixed.
inline PrototypeSet generate_orthonormal(std::size_t k, std::size_t m_prime,
                                         std::uint64_t seed) {
    if (k > m_prime)
        throw TooManyClasses("orthonormal prototypes need k <= dim, got k=" +
                             std::to_string(k) + " dim=" + std::to_string(m_prime));
    if (k == 0) throw UsageError("k must be >= 1");
    Rng rng(derive_seed(seed, 0xC0));
    Matrix G = rng.gaussian_matrix(k, m_prime);
    // Thin SVD of G^T (m' x k): its left factor has orthonormal columns that
    // span G's row space.
    diagnostics::SvdResult s = diagnostics::jacobi_svd(transpose(G));
    Matrix P = transpose(s.U);  // k x m'
    detail::fix_row_signs(P);
    detail::renormalize_rows(P);
    return PrototypeSet{std::move(P), ProtoMode::orthonormal, seed, k, m_prime};
}

// Simplex equiangular tight frame: k unit rows with every pairwise inner
// product equal to -1/(k-1). Built in the (k-1)-dimensional complement of the
// all-ones direction via the Helmert basis, then zero-padded to m'.
inline PrototypeSet generate_etf(std::size_t k, std::size_t m_prime) {
    if (k < 2) throw TooManyClasses("ETF needs k >= 2");
    if (k > m_prime + 1)
        throw TooManyClasses("ETF needs k <= dim+1, got k=" + std::to_string(k) +
                             " dim=" + std::to_string(m_prime));
    // Helmert rows h_r (r = 1..k-1) form an orthonormal basis of 1^perp:
    // h_r = (1,..,1,-r,0,..,0)/sqrt(r(r+1)) with r ones.
    Matrix H(k - 1, k);
    for (std::size_t r = 1; r < k; ++r) {
        double denom = std::sqrt(static_cast<double>(r) * (r + 1));
        for (std::size_t j = 0; j < r; ++j) H(r - 1, j) = 1.0 / denom;
        H(r - 1, r) = -static_cast<double>(r) / denom;
    }
    // Row i of sqrt(k/(k-1)) (I - J/k), expressed in Helmert coordinates.
    double scale = std::sqrt(static_cast<double>(k) / (k - 1));
    Matrix P(k, m_prime);
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t r = 0; r + 1 < k; ++r) {
            // (e_i - 1/k) . h_r = H(r, i) since h_r is orthogonal to ones.
            P(i, r) = scale * H(r, i);
        }
    }
    detail::renormalize_rows(P);
    return PrototypeSet{std::move(P), ProtoMode::etf, 0, k, m_prime};
}

// Independent Gaussian directions, unit length, no orthogonality guarantee:
// the non-orthonormal baseline.
inline PrototypeSet generate_random_unit(std::size_t k, std::size_t m_prime,
                                         std::uint64_t seed) {
    if (k == 0 || m_prime == 0) throw UsageError("k and dim must be >= 1");
    Rng rng(derive_seed(seed, 0xC1));
    Matrix P = rng.gaussian_matrix(k, m_prime);
    detail::renormalize_rows(P);
    return PrototypeSet{std::move(P), ProtoMode::random, seed, k, m_prime};
}

inline PrototypeSet generate(ProtoMode mode, std::size_t k, std::size_t m_prime,
                             std::uint64_t seed) {
    switch (mode) {
        case ProtoMode::orthonormal: return generate_orthonormal(k, m_prime, seed);
        case ProtoMode::etf: return generate_etf(k, m_prime);
        default: return generate_random_unit(k, m_prime, seed);
    }
}

} // namespace clop::prototypes
