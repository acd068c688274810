#include "support.hpp"

#include "hetss/error.hpp"
#include "hetss/graph.hpp"

#include <doctest.h>

#include <algorithm>
#include <sstream>

using namespace hetss;

namespace {

Eigen::MatrixXd random_feats(std::mt19937_64& rng, int n, int d) {
    std::normal_distribution<double> nd(0.0, 1.0);
    return Eigen::MatrixXd::NullaryExpr(n, d, [&] { return nd(rng); });
}

// Brute force: rank every other row by cosine (desc), ties to the lower index.
std::vector<std::pair<int, int>> knn_oracle(const Eigen::MatrixXd& f, int k) {
    const int n = static_cast<int>(f.rows());
    std::vector<std::pair<int, int>> out;
    for (int i = 0; i < n; ++i) {
        std::vector<std::pair<double, int>> cand;
        for (int j = 0; j < n; ++j) {
            if (j != i) {
                const double c = f.row(i).dot(f.row(j)) / (f.row(i).norm() * f.row(j).norm());
                cand.emplace_back(-c, j);
            }
        }
        std::sort(cand.begin(), cand.end());
        const int take = std::min<int>(k, n - 1);
        std::vector<int> picked;
        for (int t = 0; t < take; ++t) {
            picked.push_back(cand[static_cast<std::size_t>(t)].second);
        }
        std::sort(picked.begin(), picked.end());
        for (int j : picked) {
            out.emplace_back(i, j);
        }
    }
    return out;
}

PatchFeatures random_patch_feats(std::mt19937_64& rng, int n, int d) {
    PatchFeatures f;
    f.pan = random_feats(rng, n, d);
    for (auto& b : f.band) {
        b = random_feats(rng, n, d);
    }
    return f;
}

} // namespace

TEST_CASE("node indexing is PAN first then band-major per patch") {
    const int n = 6;
    CHECK(pan_node(3) == 3);
    CHECK(band_node(0, 0, n) == 6);
    CHECK(band_node(2, 3, n) == 6 + 8 + 3);
    for (int flat = 0; flat < 5 * n; ++flat) {
        const NodeIndex idx = NodeIndex::from_flat(flat, n);
        CHECK(idx.flat == flat);
        if (flat < n) {
            CHECK(idx == NodeIndex::pan(flat));
        } else {
            CHECK(idx == NodeIndex::band_of((flat - n) / 4, (flat - n) % 4, n));
        }
    }
}

TEST_CASE("cosine similarity and clamped edge weight") {
    Eigen::RowVectorXd a(3);
    Eigen::RowVectorXd b(3);
    a << 1, 0, 0;
    b << 1, 1, 0;
    CHECK(cosine_similarity(a, b) == doctest::Approx(1.0 / std::sqrt(2.0)));
    CHECK(cosine_similarity(a, -a) == doctest::Approx(-1.0));
    CHECK(cosine_similarity(a, Eigen::RowVectorXd::Zero(3)) == 0.0);
    CHECK(edge_weight(-0.3) == 0.0);
    CHECK(edge_weight(0.4) == 0.4);
    CHECK(edge_weight(1.0000001) == 1.0);
}

TEST_CASE("knn edges agree with a brute-force ranking") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 3 + trial;
        const int k = 1 + trial % 5;
        const Eigen::MatrixXd f = random_feats(rng, n, 4);
        const auto edges = knn_edges(f, k);
        const auto expect = knn_oracle(f, k);
        REQUIRE(edges.size() == expect.size());
        for (std::size_t e = 0; e < edges.size(); ++e) {
            CHECK(edges[e].dst == expect[e].first);
            CHECK(edges[e].src == expect[e].second);
            CHECK(edges[e].weight == doctest::Approx(edge_weight(cosine_similarity(f.row(edges[e].dst), f.row(edges[e].src)))));
        }
    }
}

TEST_CASE("knn ties resolve to the lower index") {
    Eigen::MatrixXd f(4, 2);
    f << 1, 0, 1, 0, 1, 0, 1, 0;
    const auto e = knn_edges(f, 2);
    REQUIRE(e.size() == 8);
    CHECK(e[0].src == 1);
    CHECK(e[1].src == 2);
    CHECK(e[2].src == 0);
    CHECK(e[3].src == 2);
}

TEST_CASE("HetSS graph respects node-type signatures") {
    std::mt19937_64 rng(12);
    for (int n : {2, 5, 12}) {
        for (int k : {1, 3, 8}) {
            const HetGraph g = build_hetss_graph(random_patch_feats(rng, n, 6), k);
            CHECK(g.node_count == 5 * n);
            CHECK(check_hetss_invariants(g).empty());
            const int kk = std::min(k, n - 1);
            CHECK(g.relations[0].nnz() == static_cast<std::size_t>(n * kk));
            CHECK(g.relations[1].nnz() == static_cast<std::size_t>(4 * n * kk));
            CHECK(g.relations[2].nnz() == static_cast<std::size_t>(8 * n));
            for (const Edge& e : g.relations[1].edges) {
                const NodeIndex a = NodeIndex::from_flat(e.dst, n);
                const NodeIndex b = NodeIndex::from_flat(e.src, n);
                CHECK(a.kind == NodeKind::Band);
                CHECK(b.kind == NodeKind::Band);
                CHECK(a.band == b.band);
            }
            for (const Edge& e : g.relations[2].edges) {
                const NodeIndex a = NodeIndex::from_flat(e.dst, n);
                const NodeIndex b = NodeIndex::from_flat(e.src, n);
                CHECK(a.kind != b.kind);
                CHECK(a.patch == b.patch);
                CHECK(g.relations[2].contains(e.src, e.dst));
            }
            for (const auto& rel : g.relations) {
                for (const Edge& e : rel.edges) {
                    CHECK(e.dst != e.src);
                    CHECK(e.weight >= 0.0);
                    CHECK(e.weight <= 1.0);
                }
            }
        }
    }
}

TEST_CASE("invariant checker flags a cross-type k-NN edge") {
    std::mt19937_64 rng(13);
    HetGraph g = build_hetss_graph(random_patch_feats(rng, 4, 3), 2);
    g.relations[0].edges.push_back({0, band_node(1, 0, 4), 0.5});
    g.relations[0].canonicalize();
    CHECK_FALSE(check_hetss_invariants(g).empty());
}

TEST_CASE("canonicalize sorts and rejects duplicates") {
    Relation r;
    r.edges = {{2, 1, 0.1}, {0, 3, 0.2}, {2, 0, 0.3}};
    r.canonicalize();
    CHECK(r.edges[0].dst == 0);
    CHECK(r.edges[1].src == 0);
    CHECK(r.find(2, 1) == 2);
    CHECK(r.find(1, 2) == -1);
    r.edges.push_back({0, 3, 0.9});
    CHECK_THROWS_AS(r.canonicalize(), ValidationError);
}

TEST_CASE("edge dump uses 1-based relations and six decimals") {
    HetGraph g;
    g.node_count = 3;
    g.relations[1].edges = {{0, 2, 0.25}};
    std::ostringstream out;
    dump_edges(out, g);
    CHECK(out.str() == "2 2 0 0.250000\n");
}
