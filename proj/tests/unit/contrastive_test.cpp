// Copyright (C) 2026 The chartgcl Authors
// SPDX-License-Identifier: Apache-2.0

#include "chartgcl/contrastive.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

namespace chartgcl {
namespace {

SimilarityConfig cfg_with(double tau, bool symmetric) {
    SimilarityConfig c;
    c.tau = tau;
    c.symmetric = symmetric;
    return c;
}

PairMap identity_pairs(int m) {
    PairMap p;
    for (int i = 0; i < m; ++i) p.pairs.emplace_back(i, i);
    return p;
}

// Analytic one-direction gradient w.r.t. the anchors, derived from
// dL/dZ = (softmax(Z) - I) / M with Z = S / tau and the cosine Jacobian.
Matrix anchor_grad_oracle(const Matrix& u, const Matrix& v, double tau) {
    const Eigen::Index m = u.rows();
    Matrix g = Matrix::Zero(u.rows(), u.cols());
    for (Eigen::Index i = 0; i < m; ++i) {
        std::vector<double> z(static_cast<std::size_t>(m));
        double mx = -1e300;
        for (Eigen::Index k = 0; k < m; ++k) {
            z[std::size_t(k)] = testing::cosine(u, i, v, k) / tau;
            mx = std::max(mx, z[std::size_t(k)]);
        }
        double denom = 0;
        for (double x : z) denom += std::exp(x - mx);
        const double nu = u.row(i).norm();
        for (Eigen::Index k = 0; k < m; ++k) {
            const double p = std::exp(z[std::size_t(k)] - mx) / denom;
            const double coef = (p - (k == i ? 1.0 : 0.0)) / (double(m) * tau);
            const double c = testing::cosine(u, i, v, k);
            const RowVector dcos = v.row(k) / (nu * v.row(k).norm()) - c * u.row(i) / (nu * nu);
            g.row(i) += coef * dcos;
        }
    }
    return g;
}

TEST(InfoNce, SingletonIsExactlyZero) {
    std::mt19937_64 rng(1);
    for (int i = 0; i < 10; ++i) {
        const Matrix u = testing::random_matrix(rng, 1, 5);
        const Matrix v = testing::random_matrix(rng, 1, 5);
        EXPECT_EQ(info_nce(u, v, {}), 0.0);
    }
}

TEST(InfoNce, UniformSimilarityGivesLogM) {
    for (int m = 2; m <= 8; ++m) {
        const Matrix u = Matrix::Ones(m, 4);
        EXPECT_NEAR(info_nce(u, u, cfg_with(0.5, true)), std::log(double(m)), 1e-9);
        EXPECT_NEAR(info_nce(u, 3.0 * u, cfg_with(0.1, false)), std::log(double(m)), 1e-9);
    }
}

TEST(InfoNce, MatchesDirectEvaluation) {
    std::mt19937_64 rng(2);
    const Matrix u = testing::random_unit_rows(rng, 3, 4);
    const Matrix v = testing::random_unit_rows(rng, 3, 4);
    EXPECT_NEAR(info_nce(u, v, cfg_with(0.5, false)), testing::infonce_direct(u, v, 0.5), 1e-8);
    EXPECT_NEAR(info_nce(u, v, cfg_with(0.5, true)), testing::infonce_direct_symmetric(u, v, 0.5), 1e-8);
    for (int t = 0; t < 50; ++t) {
        const int m = testing::uniform_int(rng, 1, 8);
        const int d = testing::uniform_int(rng, 1, 16);
        const double tau = testing::uniform(rng, 0.1, 2.0);
        const Matrix a = testing::random_matrix(rng, m, d);
        const Matrix b = testing::random_matrix(rng, m, d);
        EXPECT_NEAR(info_nce(a, b, cfg_with(tau, false)), testing::infonce_direct(a, b, tau), 1e-8);
        EXPECT_NEAR(info_nce(a, b, cfg_with(tau, true)), testing::infonce_direct_symmetric(a, b, tau), 1e-8);
    }
}

TEST(InfoNce, BoundsAndInvariances) {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 40; ++t) {
        const int m = testing::uniform_int(rng, 2, 8);
        const int d = testing::uniform_int(rng, 2, 10);
        const Matrix u = testing::random_matrix(rng, m, d);
        const Matrix v = testing::random_matrix(rng, m, d);
        const auto c = cfg_with(testing::uniform(rng, 0.1, 1.0), true);
        const double base = info_nce(u, v, c);
        EXPECT_GE(base, 0.0);

        // Joint orthogonal rotation.
        const Eigen::HouseholderQR<Matrix> qr(testing::random_matrix(rng, d, d));
        const Matrix q = qr.householderQ();
        EXPECT_NEAR(info_nce(u * q, v * q, c), base, 1e-10);

        // Positive rescaling of a single vector.
        Matrix u2 = u;
        u2.row(testing::uniform_int(rng, 0, m - 1)) *= testing::uniform(rng, 0.1, 10.0);
        EXPECT_NEAR(info_nce(u2, v, c), base, 1e-10);

        // Pair order.
        std::vector<int> perm(static_cast<std::size_t>(m));
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        Matrix up(m, d), vp(m, d);
        for (int i = 0; i < m; ++i) {
            up.row(i) = u.row(perm[std::size_t(i)]);
            vp.row(i) = v.row(perm[std::size_t(i)]);
        }
        EXPECT_NEAR(info_nce(up, vp, c), base, 1e-12);
    }
}

TEST(InfoNce, DominantPositivesStayBelowLogM) {
    std::mt19937_64 rng(4);
    for (int t = 0; t < 30; ++t) {
        const int m = testing::uniform_int(rng, 2, 8);
        // Near-identical pairs make every positive the row maximum.
        const Matrix u = testing::random_unit_rows(rng, m, 16);
        const Matrix v = u + testing::random_matrix(rng, m, 16, 1e-3);
        EXPECT_LE(info_nce(u, v, cfg_with(0.5, false)), std::log(double(m)));
    }
}

TEST(InfoNce, RejectsEmptyAndNonFinite) {
    EXPECT_THROW(info_nce(Matrix(0, 3), Matrix(0, 3), {}), Error);
    Matrix u = Matrix::Ones(2, 3);
    Matrix v = u;
    v(0, 0) = std::nan("");
    EXPECT_THROW(info_nce(u, v, {}), Error);
    SimilarityConfig bad;
    bad.tau = 0;
    EXPECT_THROW(bad.validate(), Error);
}

TEST(InfoNce, GradientMatchesOracleAcrossTemperatures) {
    std::mt19937_64 rng(5);
    for (int t = 0; t < 10; ++t) {
        const Matrix u = testing::random_matrix(rng, 5, 6);
        const Matrix v = testing::random_matrix(rng, 5, 6);
        for (const double tau : {0.3, 0.6}) {
            const auto r = info_nce_with_grad(u, v, cfg_with(tau, false));
            EXPECT_LT((r.d_anchors - anchor_grad_oracle(u, v, tau)).cwiseAbs().maxCoeff(), 1e-10);
        }
    }
}

TEST(InfoNce, GradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(6);
    for (const bool sym : {false, true}) {
        Matrix u = testing::random_matrix(rng, 6, 5);
        Matrix v = testing::random_matrix(rng, 6, 5);
        const auto c = cfg_with(0.4, sym);
        const auto r = info_nce_with_grad(u, v, c);
        EXPECT_NEAR(r.loss, info_nce(u, v, c), 1e-14);
        auto f = [&] { return info_nce(u, v, c); };
        EXPECT_LT(testing::max_fd_error(u, r.d_anchors, f), 1e-4);
        EXPECT_LT(testing::max_fd_error(v, r.d_positives, f), 1e-4);
    }
}

TEST(InfoNce, StationaryWhenAllVectorsIdentical) {
    const Matrix u = Matrix::Constant(4, 3, 0.7);
    const auto r = info_nce_with_grad(u, u, cfg_with(0.5, true));
    EXPECT_LT((r.d_anchors.colwise().sum() + r.d_positives.colwise().sum()).norm(), 1e-12);
}

TEST(InterModal, OnlyPairedRowsParticipate) {
    std::mt19937_64 rng(7);
    const Matrix hv = testing::random_matrix(rng, 5, 4);
    const Matrix ht = testing::random_matrix(rng, 9, 4);  // rows 5..8 play OCR nodes
    ContrastiveBatch b{hv, ht, identity_pairs(5), std::nullopt, std::nullopt};
    const double loss = inter_modal_loss(b, {});
    EXPECT_NEAR(loss, info_nce(hv, ht.topRows(5), {}), 1e-14);
    Matrix ht2 = ht;
    ht2.bottomRows(4) = testing::random_matrix(rng, 4, 4);
    b.h_t = ht2;
    EXPECT_EQ(inter_modal_loss(b, {}), loss);
}

TEST(InterModal, IdenticalPairsAtLowTemperature) {
    std::mt19937_64 rng(8);
    const Matrix h = testing::random_unit_rows(rng, 5, 16);
    ContrastiveBatch b{h, h, identity_pairs(5), std::nullopt, std::nullopt};
    EXPECT_LT(inter_modal_loss(b, cfg_with(0.05, true)), 1e-3);
}

TEST(InterModal, PairOrderAndIndexErrors) {
    std::mt19937_64 rng(9);
    const Matrix hv = testing::random_matrix(rng, 6, 4);
    const Matrix ht = testing::random_matrix(rng, 6, 4);
    PairMap p;
    p.pairs = {{0, 3}, {1, 0}, {2, 5}, {3, 1}, {4, 2}, {5, 4}};
    ContrastiveBatch b{hv, ht, p, std::nullopt, std::nullopt};
    const double base = inter_modal_loss(b, {});
    std::reverse(b.pairs.pairs.begin(), b.pairs.pairs.end());
    EXPECT_NEAR(inter_modal_loss(b, {}), base, 1e-12);
    b.pairs.pairs.push_back({0, 6});
    EXPECT_THROW(inter_modal_loss(b, {}), Error);
    b.pairs.pairs.clear();
    EXPECT_THROW(inter_modal_loss(b, {}), Error);
}

TEST(FullLoss, ThreeTermOracle) {
    std::mt19937_64 rng(10);
    for (int t = 0; t < 20; ++t) {
        const int n = testing::uniform_int(rng, 2, 7);
        const Matrix hv = testing::random_matrix(rng, n, 5);
        const Matrix ht = testing::random_matrix(rng, n + 2, 5);
        const Matrix hva = testing::random_matrix(rng, n, 5);
        const Matrix hta = testing::random_matrix(rng, n + 2, 5);
        ContrastiveBatch b{hv, ht, identity_pairs(n), hva, hta};
        const auto c = cfg_with(0.5, true);
        const auto terms = full_loss(b, c);
        const double expected = testing::infonce_direct_symmetric(hv, hva, 0.5) +
                                testing::infonce_direct_symmetric(ht, hta, 0.5) +
                                testing::infonce_direct_symmetric(hv, ht.topRows(n), 0.5);
        EXPECT_NEAR(terms.total(), expected, 1e-8);
        EXPECT_DOUBLE_EQ(terms.total() - terms.inter, terms.intra_visual + terms.intra_textual);
        EXPECT_EQ(terms.inter, inter_modal_loss(b, c));
    }
}

TEST(FullLoss, IdentityAugmentation) {
    std::mt19937_64 rng(11);
    const Matrix hv = testing::random_matrix(rng, 4, 3);
    const Matrix ht = testing::random_matrix(rng, 4, 3);
    ContrastiveBatch b{hv, ht, identity_pairs(4), hv, ht};
    const auto terms = full_loss(b, {});
    EXPECT_EQ(terms.intra_visual, info_nce(hv, hv, {}));
    EXPECT_EQ(terms.intra_textual, info_nce(ht, ht, {}));
    b.h_v_aug.reset();
    EXPECT_THROW(full_loss(b, {}), Error);
}

TEST(FullLoss, AugmentedTextVariant) {
    std::mt19937_64 rng(12);
    const Matrix hv = testing::random_matrix(rng, 4, 3);
    const Matrix ht = testing::random_matrix(rng, 4, 3);
    const Matrix hta = testing::random_matrix(rng, 4, 3);
    SimilarityConfig c;
    c.inter_uses_augmented_text = true;
    ContrastiveBatch b{hv, ht, identity_pairs(4), hv, hta};
    EXPECT_NEAR(inter_modal_loss(b, c), info_nce(hv, hta, c), 1e-14);
}

TEST(Objective, BackwardMatchesFiniteDifferences) {
    std::mt19937_64 rng(13);
    for (const bool proj : {false, true}) {
        SimilarityConfig c = cfg_with(0.5, true);
        std::optional<ProjectionHead> head;
        if (proj) {
            c.theta = Similarity::cosine_projection;
            head = ProjectionHead::init(4, 6, 4, rng);
            head->b1 = testing::random_matrix(rng, 1, 6, 0.1);
            // A zero output bias lets a row with all hidden units off project to
            // the origin, where cosine is undefined.
            head->b2 = testing::random_matrix(rng, 1, 4, 0.5);
        }
        ContrastiveBatch b{testing::random_matrix(rng, 5, 4), testing::random_matrix(rng, 7, 4), identity_pairs(5),
                           testing::random_matrix(rng, 5, 4), testing::random_matrix(rng, 7, 4)};
        const ProjectionHead* hp = head ? &*head : nullptr;
        ContrastiveObjective obj(c, hp);
        obj.forward(b, true);
        const auto g = obj.backward(1.0);
        auto f = [&] { return full_loss(b, c, hp).total(); };
        double worst = testing::max_fd_error(b.h_v, g.h_v, f);
        worst = std::max(worst, testing::max_fd_error(b.h_t, g.h_t, f));
        worst = std::max(worst, testing::max_fd_error(*b.h_v_aug, *g.h_v_aug, f));
        worst = std::max(worst, testing::max_fd_error(*b.h_t_aug, *g.h_t_aug, f));
        if (proj) {
            worst = std::max(worst, testing::max_fd_error(head->w1, g.projection->w1, f));
            worst = std::max(worst, testing::max_fd_error(head->b1, g.projection->b1, f));
            worst = std::max(worst, testing::max_fd_error(head->w2, g.projection->w2, f));
            worst = std::max(worst, testing::max_fd_error(head->b2, g.projection->b2, f));
        }
        EXPECT_LT(worst, 1e-4) << "projection " << proj;
    }
}

TEST(Objective, BackwardBeforeForwardThrows) {
    ContrastiveObjective obj({});
    EXPECT_THROW(obj.backward(), Error);
    SimilarityConfig c;
    c.theta = Similarity::cosine_projection;
    EXPECT_THROW(ContrastiveObjective(c, nullptr), Error);
}

}  // namespace
}  // namespace chartgcl
