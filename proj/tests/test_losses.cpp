#include <catch_amalgamated.hpp>

#include <cmath>

#include "clop/losses.hpp"
#include "clop/prototypes.hpp"
#include "clop/rng.hpp"
#include "oracles.hpp"

using namespace clop;
using core::PairMap;
using core::RawEmbeddingSet;
using core::UnitEmbeddingSet;
using losses::LabeledBatch;
using losses::SimilarityKind;
using prototypes::PrototypeSet;

namespace {

UnitEmbeddingSet random_unit(std::size_t n, std::size_t m, std::uint64_t seed) {
    Rng rng(seed);
    return core::normalize(RawEmbeddingSet{rng.gaussian_matrix(n, m)});
}

Matrix all_equal_rows(std::size_t n, const Vec& u) {
    Matrix X(n, u.size());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < u.size(); ++j) X(i, j) = u[j];
    return X;
}

PrototypeSet axis_prototypes(std::size_t k, std::size_t m) {
    PrototypeSet C;
    C.k = k;
    C.dim = m;
    C.mode = prototypes::ProtoMode::orthonormal;
    C.vectors = Matrix(k, m);
    for (std::size_t i = 0; i < k; ++i) C.vectors(i, i) = 1.0;
    return C;
}

} // namespace

TEST_CASE("infonce with a single pair is exactly zero") {
    Matrix Z(2, 3);
    Z(0, 0) = 1.0;
    Z(1, 1) = 1.0;
    CHECK(losses::infonce_value(UnitEmbeddingSet{Z}, PairMap::adjacent(2), 0.1) == 0.0);
}

TEST_CASE("infonce over four coincident embeddings is 4 ln 3 at any temperature") {
    Matrix Z = all_equal_rows(4, {1.0, 0.0, 0.0});
    for (double tau : {0.1, 0.7}) {
        double v = losses::infonce_value(UnitEmbeddingSet{Z}, PairMap::adjacent(4), tau);
        CHECK(v == Catch::Approx(4.0 * std::log(3.0)).margin(1e-12));
    }
}

TEST_CASE("infonce matches a brute-force double-loop evaluation") {
    auto Z = random_unit(6, 4, 2024);
    PairMap pairs = PairMap::adjacent(6);
    double lib = losses::infonce_value(Z, pairs, 0.1);
    double ref = oracle::infonce_direct(Z.data, pairs.partner, 0.1);
    CHECK(lib == Catch::Approx(ref).epsilon(1e-12));
    CHECK(lib >= 0.0);
}

TEST_CASE("infonce value is nonnegative on random batches") {
    for (std::uint64_t s = 0; s < 10; ++s) {
        auto Z = random_unit(8, 5, 300 + s);
        CHECK(losses::infonce_value(Z, PairMap::adjacent(8), 0.2) >= 0.0);
    }
}

TEST_CASE("infonce raw gradient vanishes on collinear configurations") {
    Matrix X = all_equal_rows(6, {0.3, -0.4, 1.2});
    Matrix G = losses::infonce_grad_raw(RawEmbeddingSet{X}, PairMap::adjacent(6), 0.1);
    CHECK(max_abs(G) <= 1e-10);

    // Signed-collinear with assorted raw norms.
    Matrix Y(4, 3);
    const double signs[4] = {1.0, -1.0, -1.0, 1.0};
    const double norms[4] = {0.5, 1.3, 2.0, 0.8};
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 3; ++j) Y(i, j) = signs[i] * norms[i] * (j == 1 ? 0.8 : 0.6) * (j == 2 ? 0.0 : 1.0);
    Matrix GY = losses::infonce_grad_raw(RawEmbeddingSet{Y}, PairMap::adjacent(4), 0.1);
    CHECK(max_abs(GY) <= 1e-10);
}

TEST_CASE("infonce raw gradient matches finite differences") {
    Rng rng(5150);
    for (int t = 0; t < 5; ++t) {
        std::size_t n = 4 + 2 * rng.integer(3);
        std::size_t m = 3 + rng.integer(3);
        Matrix X = rng.gaussian_matrix(n, m);
        PairMap pairs = PairMap::adjacent(n);
        double tau = 0.1;
        Matrix G = losses::infonce_grad_raw(RawEmbeddingSet{X}, pairs, tau);
        Matrix F = oracle::fd_grad(X, [&](const Matrix& Y) {
            return losses::infonce_value(core::normalize(RawEmbeddingSet{Y}), pairs, tau);
        });
        CHECK(oracle::rel_grad_err(G, F) <= 1e-5);
    }
}

TEST_CASE("probability matrix hand values") {
    Matrix Zc = all_equal_rows(2, {0.0, 1.0});
    Matrix Pc = losses::prob_matrix(UnitEmbeddingSet{Zc}, 0.37);
    CHECK(Pc(0, 1) == Catch::Approx(0.5).margin(1e-14));
    CHECK(Pc(1, 0) == Catch::Approx(0.5).margin(1e-14));
    CHECK(Pc(0, 0) == 0.0);

    Matrix Zo(2, 2);
    Zo(0, 0) = 1.0;
    Zo(1, 1) = 1.0;
    Matrix Po = losses::prob_matrix(UnitEmbeddingSet{Zo}, 1.0);
    CHECK(Po(0, 1) == Catch::Approx(1.0 / (1.0 + std::exp(1.0))).margin(1e-14));
}

TEST_CASE("probability row sums stay below the merged-pair cap") {
    for (std::uint64_t s = 0; s < 8; ++s) {
        std::size_t n = 3 + s;
        auto Z = random_unit(n, 4, 900 + s);
        Matrix P = losses::prob_matrix(Z, 0.1);
        double cap = static_cast<double>(n - 1) / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            double row = 0.0;
            for (std::size_t a = 0; a < n; ++a) row += P(i, a);
            CHECK(row <= cap + 1e-12);
            CHECK(row > 0.0);
        }
    }
}

TEST_CASE("repulsive loss hand values") {
    Matrix Z4 = all_equal_rows(4, {0.6, 0.8});
    CHECK(losses::repulsive_value(UnitEmbeddingSet{Z4}, 0.3) ==
          Catch::Approx(4.0 * std::log(4.0)).margin(1e-12));

    Matrix Za(2, 2);
    Za(0, 0) = 1.0;
    Za(1, 0) = -1.0;
    CHECK(losses::repulsive_value(UnitEmbeddingSet{Za}, 1.0) ==
          Catch::Approx(2.0 * std::log1p(std::exp(-2.0))).margin(1e-14));

    Matrix Z1(1, 3);
    Z1(0, 2) = 1.0;
    CHECK(losses::repulsive_value(UnitEmbeddingSet{Z1}, 0.1) == 0.0);
}

TEST_CASE("repulsive loss matches a brute-force evaluation") {
    auto Z = random_unit(7, 5, 777);
    double lib = losses::repulsive_value(Z, 0.2);
    double ref = oracle::repulsive_direct(Z.data, 0.2);
    CHECK(lib == Catch::Approx(ref).epsilon(1e-12));
}

TEST_CASE("repulsive raw gradient: stationary at coincidence, hand value when orthogonal") {
    Matrix Xc = all_equal_rows(5, {1.0, 2.0, 2.0});
    Matrix Gc = losses::repulsive_grad_raw(RawEmbeddingSet{Xc}, 0.1);
    CHECK(max_abs(Gc) <= 1e-10);

    // Two orthogonal unit-norm raw points, tau = 1: each row moves toward the
    // other scaled by 2 P01 = 2 / (1 + e); the pullback is the identity here
    // because the motion is already tangential.
    Matrix Xo(2, 2);
    Xo(0, 0) = 1.0;
    Xo(1, 1) = 1.0;
    Matrix Go = losses::repulsive_grad_raw(RawEmbeddingSet{Xo}, 1.0);
    double expect = 2.0 / (1.0 + std::exp(1.0));
    CHECK(Go(0, 1) == Catch::Approx(expect).margin(1e-14));
    CHECK(Go(1, 0) == Catch::Approx(expect).margin(1e-14));
    CHECK(Go(0, 0) == Catch::Approx(0.0).margin(1e-14));
    CHECK(Go(1, 1) == Catch::Approx(0.0).margin(1e-14));
}

TEST_CASE("repulsive raw gradient matches finite differences") {
    Rng rng(4242);
    Matrix X = rng.gaussian_matrix(8, 5);
    Matrix G = losses::repulsive_grad_raw(RawEmbeddingSet{X}, 0.1);
    Matrix F = oracle::fd_grad(X, [&](const Matrix& Y) {
        return losses::repulsive_value(core::normalize(RawEmbeddingSet{Y}), 0.1);
    });
    CHECK(oracle::rel_grad_err(G, F) <= 1e-5);
}

TEST_CASE("clop penalty hand values and the empty-set convention") {
    PrototypeSet C = axis_prototypes(3, 4);
    LabeledBatch batch;
    batch.labels = {0, 1, 2, 0};
    batch.mask = {1, 1, 0, 0};

    Matrix Z(4, 4);
    Z(0, 0) = 1.0;  // equals prototype 0
    Z(1, 1) = 1.0;  // equals prototype 1
    Z(2, 2) = 1.0;
    Z(3, 3) = 1.0;
    CHECK(losses::clop_penalty(Z, batch, C, SimilarityKind::cosine) ==
          Catch::Approx(0.0).margin(1e-15));

    Matrix Zp(4, 4);
    Zp(0, 3) = 1.0;  // orthogonal to prototype 0
    Zp(1, 3) = 1.0;  // orthogonal to prototype 1
    Zp(2, 2) = 1.0;
    Zp(3, 3) = 1.0;
    CHECK(losses::clop_penalty(Zp, batch, C, SimilarityKind::cosine) ==
          Catch::Approx(1.0).margin(1e-15));

    LabeledBatch empty;
    empty.labels = {0, 1, 2, 0};
    empty.mask = {0, 0, 0, 0};
    CHECK(losses::clop_penalty(Zp, empty, C, SimilarityKind::cosine) == 0.0);
}

TEST_CASE("clop penalty rejects out-of-range labels") {
    PrototypeSet C = axis_prototypes(2, 3);
    LabeledBatch batch;
    batch.labels = {0, 5};
    batch.mask = {1, 1};
    Matrix Z(2, 3);
    Z(0, 0) = 1.0;
    Z(1, 1) = 1.0;
    CHECK_THROWS_AS(losses::clop_penalty(Z, batch, C, SimilarityKind::cosine), LabelOutOfRange);
}

TEST_CASE("cosine penalty stays in [0, 2]") {
    PrototypeSet C = axis_prototypes(4, 6);
    Rng rng(31);
    for (int t = 0; t < 20; ++t) {
        auto Z = random_unit(8, 6, 1000 + t);
        LabeledBatch batch;
        batch.labels.resize(8);
        batch.mask.resize(8);
        for (std::size_t i = 0; i < 8; ++i) {
            batch.labels[i] = static_cast<int>(rng.integer(4));
            batch.mask[i] = rng.integer(2) == 0;
        }
        double p = losses::clop_penalty(Z.data, batch, C, SimilarityKind::cosine);
        CHECK(p >= 0.0);
        CHECK(p <= 2.0);
    }
}

TEST_CASE("clop_total reduces to infonce with an empty mask and adds 1 for one orthogonal label") {
    PrototypeSet C = axis_prototypes(3, 4);
    Rng rng(88);
    Matrix X = rng.gaussian_matrix(4, 4);
    X(0, 0) = 0.0;
    X(0, 1) = 0.0;
    X(0, 2) = 0.0;
    X(0, 3) = 2.0;  // normalizes to e4, orthogonal to every prototype
    PairMap pairs = PairMap::adjacent(4);

    LabeledBatch empty;
    empty.labels = {0, 1, 2, 0};
    empty.mask = {0, 0, 0, 0};
    auto base = losses::clop_total(RawEmbeddingSet{X}, pairs, empty, C, 0.1, 1.0,
                                   SimilarityKind::cosine);
    double nce = losses::infonce_value(core::normalize(RawEmbeddingSet{X}), pairs, 0.1);
    CHECK(base.value == nce);

    LabeledBatch one;
    one.labels = {0, 1, 2, 0};
    one.mask = {1, 0, 0, 0};
    auto rep = losses::clop_total(RawEmbeddingSet{X}, pairs, one, C, 0.1, 1.0,
                                  SimilarityKind::cosine);
    CHECK(rep.value == Catch::Approx(nce + 1.0).margin(1e-12));
    CHECK(rep.value ==
          Catch::Approx(rep.infonce + 1.0 * rep.clop_penalty).margin(1e-12));
    CHECK(all_finite(rep.grad_raw));
}

TEST_CASE("clop_total gradients match finite differences for every similarity kind") {
    Rng rng(606);
    PrototypeSet C = prototypes::generate_orthonormal(3, 5, 99);
    LabeledBatch batch;
    batch.labels = {0, 1, 2, 0, 1, 2};
    batch.mask = {1, 0, 1, 0, 1, 0};
    PairMap pairs = PairMap::adjacent(6);
    for (SimilarityKind sim : {SimilarityKind::cosine, SimilarityKind::neg_sq_euclidean,
                               SimilarityKind::neg_l1}) {
        Matrix X = rng.gaussian_matrix(6, 5);
        auto rep = losses::clop_total(RawEmbeddingSet{X}, pairs, batch, C, 0.1, 0.7, sim);
        Matrix F = oracle::fd_grad(X, [&](const Matrix& Y) {
            return losses::clop_total(RawEmbeddingSet{Y}, pairs, batch, C, 0.1, 0.7, sim).value;
        });
        CHECK(oracle::rel_grad_err(rep.grad_raw, F) <= 1e-5);
    }
}

TEST_CASE("losses are invariant under a global rotation") {
    auto Z = random_unit(8, 6, 515);
    Matrix R = oracle::random_rotation(6, 99);
    Matrix ZR = mul_abt(Z.data, transpose(R));

    PairMap pairs = PairMap::adjacent(8);
    CHECK(losses::infonce_value(UnitEmbeddingSet{ZR}, pairs, 0.1) ==
          Catch::Approx(losses::infonce_value(Z, pairs, 0.1)).margin(1e-10));
    CHECK(losses::repulsive_value(UnitEmbeddingSet{ZR}, 0.1) ==
          Catch::Approx(losses::repulsive_value(Z, 0.1)).margin(1e-10));

    PrototypeSet C = prototypes::generate_orthonormal(3, 6, 7);
    PrototypeSet CR = C;
    CR.vectors = mul_abt(C.vectors, transpose(R));
    LabeledBatch batch;
    batch.labels = {0, 1, 2, 0, 1, 2, 0, 1};
    batch.mask = {1, 1, 0, 1, 0, 1, 1, 0};
    double before = losses::clop_penalty(Z.data, batch, C, SimilarityKind::cosine);
    double after = losses::clop_penalty(ZR, batch, CR, SimilarityKind::cosine);
    CHECK(after == Catch::Approx(before).margin(1e-10));
}

TEST_CASE("permuting points permutes the gradient rows and keeps the value") {
    Rng rng(246);
    std::size_t n = 6, m = 4;
    Matrix X = rng.gaussian_matrix(n, m);
    PairMap pairs = PairMap::adjacent(n);
    double v0 = losses::infonce_value(core::normalize(RawEmbeddingSet{X}), pairs, 0.1);
    Matrix G0 = losses::infonce_grad_raw(RawEmbeddingSet{X}, pairs, 0.1);

    std::vector<std::size_t> p = {3, 0, 5, 1, 2, 4};  // permutation: new index of old i
    Matrix Xp(n, m);
    PairMap pp;
    pp.mode = core::PairMode::paired;
    pp.partner.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) Xp(p[i], j) = X(i, j);
        pp.partner[p[i]] = p[pairs.partner[i]];
    }
    double v1 = losses::infonce_value(core::normalize(RawEmbeddingSet{Xp}), pp, 0.1);
    Matrix G1 = losses::infonce_grad_raw(RawEmbeddingSet{Xp}, pp, 0.1);
    CHECK(v1 == Catch::Approx(v0).margin(1e-12));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j)
            CHECK(G1(p[i], j) == Catch::Approx(G0(i, j)).margin(1e-12));
}
