// Copyright (C) 2026 The chartgcl Authors
// SPDX-License-Identifier: Apache-2.0

#include "chartgcl/encoders.hpp"
#include "oracles.hpp"

#include <httplib.h>
#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <atomic>
#include <cmath>
#include <numeric>
#include <thread>

namespace chartgcl {
namespace {

Graph random_graph(std::mt19937_64& rng, int n, int dim, double edge_p = 0.4) {
    Graph g;
    for (int i = 0; i < n; ++i) g.nodes.push_back({i, i, -1});
    g.features = testing::random_matrix(rng, n, dim);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            if (testing::uniform(rng, 0, 1) < edge_p) g.edges.push_back({i, j, testing::uniform(rng, 0.05, 1.0)});
        }
    }
    return g;
}

GCNParams random_params(std::mt19937_64& rng, const std::vector<int>& dims) {
    GCNParams p = GCNParams::glorot(dims, rng);
    for (auto& l : p.layers) l.bias = testing::random_matrix(rng, 1, l.weight.cols(), 0.1);
    return p;
}

std::vector<std::pair<Matrix, RowVector>> layers_of(const GCNParams& p) {
    std::vector<std::pair<Matrix, RowVector>> out;
    for (const auto& l : p.layers) out.emplace_back(l.weight, l.bias);
    return out;
}

TEST(Gcn, SingleNodeIdentity) {
    Graph g;
    g.nodes.push_back({0, 0, -1});
    g.features = Matrix(1, 3);
    g.features << 1, -2, 3;
    GCNParams p;
    p.layers.push_back({Matrix::Identity(3, 3), RowVector::Zero(3)});
    EXPECT_EQ(normalized_adjacency(g), Matrix::Ones(1, 1));
    EXPECT_EQ(gcn_forward(g, p), g.features);
}

TEST(Gcn, SymmetricPairGivesEqualRows) {
    Graph g;
    g.nodes = {{0, 0, -1}, {1, 1, -1}};
    g.features = Matrix::Ones(2, 3);
    g.edges.push_back({0, 1, 1.0});
    std::mt19937_64 rng(2);
    const Matrix out = gcn_forward(g, random_params(rng, {3, 4, 2}));
    EXPECT_NEAR((out.row(0) - out.row(1)).norm(), 0.0, 1e-15);
}

TEST(Gcn, MatchesDenseOracle) {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        const Graph g = random_graph(rng, 6, 5);
        const GCNParams p = random_params(rng, {5, 7, 3});
        const Matrix a_hat = testing::dense_normalized_adjacency(6, g.edges);
        EXPECT_LT((normalized_adjacency(g) - a_hat).cwiseAbs().maxCoeff(), 1e-14);
        const Matrix expected = testing::loop_gcn(a_hat, g.features, layers_of(p));
        EXPECT_LT((gcn_forward(g, p) - expected).cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(Gcn, RejectsNonFiniteAndBadShapes) {
    std::mt19937_64 rng(4);
    Graph g = random_graph(rng, 4, 3);
    GCNParams p = random_params(rng, {3, 2});
    g.features(1, 1) = std::nan("");
    EXPECT_THROW(gcn_forward(g, p), Error);
    g = random_graph(rng, 4, 3);
    p.layers[0].weight(0, 0) = INFINITY;
    EXPECT_THROW(gcn_forward(g, p), Error);
    EXPECT_THROW(gcn_forward(g, random_params(rng, {4, 2})), Error);
    EXPECT_THROW(gcn_backward(GCNCache{}, p, Matrix::Zero(4, 2)), Error);
}

TEST(Gcn, EquivariantUnderRenumbering) {
    std::mt19937_64 rng(12);
    const Graph g = random_graph(rng, 7, 4);
    const GCNParams p = random_params(rng, {4, 6, 3});
    std::vector<int> perm(7);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Graph h = g;
    for (int i = 0; i < 7; ++i) h.features.row(perm[std::size_t(i)]) = g.features.row(i);
    for (auto& e : h.edges) {
        const int a = perm[std::size_t(e.src)], b = perm[std::size_t(e.dst)];
        e = {std::min(a, b), std::max(a, b), e.weight};
    }
    GCNCache cg, ch;
    const Matrix out_g = gcn_forward(g, p, &cg);
    const Matrix out_h = gcn_forward(h, p, &ch);
    for (int i = 0; i < 7; ++i) EXPECT_LT((out_h.row(perm[std::size_t(i)]) - out_g.row(i)).norm(), 1e-12);

    // Loss sum(out .* R) with R permuted alongside: parameter gradients agree.
    const Matrix r = testing::random_matrix(rng, 7, 3);
    Matrix r_perm(7, 3);
    for (int i = 0; i < 7; ++i) r_perm.row(perm[std::size_t(i)]) = r.row(i);
    const GCNGrads gg = gcn_backward(cg, p, r);
    const GCNGrads gh = gcn_backward(ch, p, r_perm);
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        EXPECT_LT((gg.weight[l] - gh.weight[l]).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LT((gg.bias[l] - gh.bias[l]).cwiseAbs().maxCoeff(), 1e-12);
    }
    for (int i = 0; i < 7; ++i) EXPECT_LT((gh.input.row(perm[std::size_t(i)]) - gg.input.row(i)).norm(), 1e-12);
}

TEST(Gcn, IsolatedNodeDoesNotDisturbOthers) {
    std::mt19937_64 rng(14);
    const Graph g = random_graph(rng, 5, 3);
    const GCNParams p = random_params(rng, {3, 4, 2});
    Graph h = g;
    h.nodes.push_back({5, 5, -1});
    h.features.conservativeResize(6, Eigen::NoChange);
    h.features.row(5) = testing::random_matrix(rng, 1, 3);
    EXPECT_LT((gcn_forward(h, p).topRows(5) - gcn_forward(g, p)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Gcn, LinearWithoutActivation) {
    std::mt19937_64 rng(15);
    const Graph g = random_graph(rng, 5, 3);
    GCNParams p = GCNParams::glorot({3, 4, 2}, rng);
    p.hidden_activation = Activation::identity;
    Graph scaled = g;
    scaled.features *= 2.5;
    EXPECT_LT((gcn_forward(scaled, p) - 2.5 * gcn_forward(g, p)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Gcn, BackwardMatchesFiniteDifferences) {
    std::mt19937_64 rng(21);
    Graph g = random_graph(rng, 5, 4, 0.6);
    GCNParams p = random_params(rng, {4, 6, 3});
    const Matrix r = testing::random_matrix(rng, 5, 3);
    // Smooth scalar of the output so relu kinks are the only non-smooth points.
    auto loss = [&] {
        const Matrix out = gcn_forward(g, p);
        return (out.array() * r.array()).sum() + 0.5 * out.squaredNorm();
    };
    GCNCache cache;
    const Matrix out = gcn_forward(g, p, &cache);
    const GCNGrads grads = gcn_backward(cache, p, r + out);
    double worst = 0;
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        worst = std::max(worst, testing::max_fd_error(p.layers[l].weight, grads.weight[l], loss));
        worst = std::max(worst, testing::max_fd_error(p.layers[l].bias, grads.bias[l], loss));
    }
    worst = std::max(worst, testing::max_fd_error(g.features, grads.input, loss));
    EXPECT_LT(worst, 1e-4);
}

TEST(Gcn, ZeroUpstreamGivesZeroGrads) {
    std::mt19937_64 rng(22);
    const Graph g = random_graph(rng, 5, 4);
    const GCNParams p = random_params(rng, {4, 6, 3});
    GCNCache cache;
    gcn_forward(g, p, &cache);
    const GCNGrads grads = gcn_backward(cache, p, Matrix::Zero(5, 3));
    for (const auto& w : grads.weight) EXPECT_EQ(w.cwiseAbs().maxCoeff(), 0.0);
    for (const auto& b : grads.bias) EXPECT_EQ(b.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(grads.input.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Gcn, GlorotShapesAndValidation) {
    std::mt19937_64 rng(1);
    const GCNParams p = GCNParams::glorot({8, 64, 16}, rng);
    ASSERT_EQ(p.layers.size(), 2u);
    EXPECT_EQ(p.input_dim(), 8);
    EXPECT_EQ(p.output_dim(), 16);
    EXPECT_EQ(p.layers[1].bias, RowVector::Zero(16));
    const double limit = std::sqrt(6.0 / (8 + 64));
    EXPECT_LE(p.layers[0].weight.cwiseAbs().maxCoeff(), limit);
    EXPECT_NO_THROW(p.validate());
    EXPECT_THROW(GCNParams::glorot({8}, rng), Error);
}

TEST(StubEmbed, DeterministicUnitNorm) {
    EXPECT_EQ(stub_embed("bar", 32, 17), stub_embed("bar", 32, 17));
    EXPECT_NE(stub_embed("bar", 32, 17), stub_embed("bar", 32, 18));
    std::mt19937_64 rng(3);
    for (int i = 0; i < 100; ++i) {
        const std::string s = testing::random_sentence(rng, 1, 4);
        EXPECT_NEAR(stub_embed(s, 48, 5).norm(), 1.0, 1e-9);
    }
    EXPECT_THROW(stub_embed("x", 0, 1), Error);
}

TEST(StubEmbed, DistinctTextsAreFarApart) {
    const Vector a = stub_embed("bar", 64, 17);
    const Vector b = stub_embed("line", 64, 17);
    EXPECT_LT(a.dot(b), 0.9);
    for (int i = 0; i < 100; ++i) {
        const Vector u = stub_embed("label-" + std::to_string(i), 64, 17);
        const Vector v = stub_embed("label-" + std::to_string(i + 1000), 64, 17);
        EXPECT_LT(u.dot(v), 0.9);
    }
}

TEST(StubEmbedder, EmbedAllStacksRows) {
    StubEmbedder e(16, 3);
    const Matrix m = e.embed_all({"a", "b", "a"});
    ASSERT_EQ(m.rows(), 3);
    EXPECT_EQ(m.row(0), m.row(2));
    EXPECT_EQ(Vector(m.row(1).transpose()), stub_embed("b", 16, 3));
    EXPECT_EQ(e.backend(), EmbedderBackend::deterministic_stub);
}

TEST(HttpEmbedder, TalksToLocalService) {
    httplib::Server server;
    std::atomic<int> requests{0};
    server.Post("/embed", [&](const httplib::Request& req, httplib::Response& res) {
        ++requests;
        const auto body = nlohmann::json::parse(req.body);
        nlohmann::json vectors = nlohmann::json::array();
        for (const auto& t : body.at("texts")) {
            const auto s = t.get<std::string>();
            vectors.push_back({double(s.size()), 1.0, -1.0});
        }
        res.set_content(nlohmann::json{{"vectors", vectors}}.dump(), "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread worker([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    {
        HttpEmbedder e("http://127.0.0.1:" + std::to_string(port) + "/embed", 3, 5.0);
        e.prefetch({"ab", "xyz"});
        EXPECT_EQ(requests.load(), 1);
        EXPECT_EQ(e.embed("ab"), Vector::Map(std::vector<double>{2, 1, -1}.data(), 3));
        EXPECT_EQ(e.embed("xyz")(0), 3.0);
        EXPECT_EQ(requests.load(), 1);
        EXPECT_EQ(e.embed("q")(0), 1.0);
        EXPECT_EQ(requests.load(), 2);
        EXPECT_EQ(e.backend(), EmbedderBackend::external_encoder);

        HttpEmbedder wrong_dim("http://127.0.0.1:" + std::to_string(port) + "/embed", 4, 5.0);
        EXPECT_THROW(wrong_dim.embed("a"), Error);
    }
    server.stop();
    worker.join();
}

}  // namespace
}  // namespace chartgcl
