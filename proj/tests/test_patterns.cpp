#include "support.hpp"

#include "hetss/error.hpp"
#include "hetss/patterns.hpp"
#include "hetss/synth.hpp"
#include "hetss/model.hpp"

#include <doctest.h>

#include <bit>
#include <map>
#include <sstream>

using namespace hetss;

namespace {

// Independent reference: accumulate each pair's relation signature in an ordered map.
std::map<unsigned, std::map<std::pair<int, int>, double>> signature_oracle(const HetGraph& g) {
    std::map<std::pair<int, int>, std::pair<unsigned, double>> pairs;
    for (int r = 0; r < kRelations; ++r) {
        for (const Edge& e : g.relations[static_cast<std::size_t>(r)].edges) {
            auto& slot = pairs[{e.dst, e.src}];
            slot.first |= 1u << r;
            slot.second += e.weight;
        }
    }
    std::map<unsigned, std::map<std::pair<int, int>, double>> out;
    for (const auto& [key, v] : pairs) {
        out[v.first][key] = v.second / std::popcount(v.first);
    }
    return out;
}

} // namespace

TEST_CASE("generated patterns match an independent signature oracle") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 1 + static_cast<int>(rng() % 30);
        const double density = 0.05 + 0.4 * static_cast<double>(rng() % 100) / 100.0;
        const HetGraph g = testutil::random_multiplex(rng, n, density);
        const PatternSet ps = generate_patterns(g);
        const auto expect = signature_oracle(g);
        REQUIRE(ps.count() == expect.size());
        for (const Pattern& p : ps.patterns) {
            REQUIRE(expect.count(p.mask) == 1);
            const auto& m = expect.at(p.mask);
            REQUIRE(p.nnz() == m.size());
            auto it = m.begin();
            for (const PatternEntry& e : p.entries) {
                CHECK(e.row == it->first.first);
                CHECK(e.col == it->first.second);
                CHECK(e.weight == doctest::Approx(it->second).epsilon(1e-12));
                ++it;
            }
        }
        CHECK(patterns_equal(ps, pattern_oracle(g)));
    }
}

TEST_CASE("patterns partition the connected pairs") {
    std::mt19937_64 rng(22);
    for (int trial = 0; trial < 100; ++trial) {
        const HetGraph g = testutil::random_multiplex(rng, 20, 0.2);
        const PatternSet ps = generate_patterns(g);
        std::map<std::pair<int, int>, int> seen;
        for (const Pattern& p : ps.patterns) {
            CHECK(p.mask >= 1u);
            CHECK(p.mask <= static_cast<unsigned>(kMaxPatterns));
            for (const PatternEntry& e : p.entries) {
                ++seen[{e.row, e.col}];
                for (int r = 0; r < kRelations; ++r) {
                    CHECK(g.relations[static_cast<std::size_t>(r)].contains(e.row, e.col) == ((p.mask >> r) & 1u));
                }
            }
        }
        std::map<std::pair<int, int>, int> connected;
        for (const auto& rel : g.relations) {
            for (const Edge& e : rel.edges) {
                connected[{e.dst, e.src}] = 1;
            }
        }
        CHECK(seen.size() == connected.size());
        CHECK(ps.total_nnz() == connected.size());
        for (const auto& [_, c] : seen) {
            CHECK(c == 1);
        }
    }
}

TEST_CASE("empty and single-relation graphs") {
    HetGraph g;
    g.node_count = 4;
    CHECK(generate_patterns(g).count() == 0);
    g.relations[1].edges = {{0, 1, 0.5}, {2, 3, 0.7}};
    const PatternSet ps = generate_patterns(g);
    REQUIRE(ps.count() == 1);
    CHECK(ps.patterns[0].mask == 2u);
    CHECK(ps.patterns[0].slot() == 1);
    CHECK(ps.find(2) != nullptr);
    CHECK(ps.find(1) == nullptr);
}

TEST_CASE("overlapping relations average their weights") {
    HetGraph g;
    g.node_count = 2;
    g.relations[0].edges = {{0, 1, 0.2}};
    g.relations[2].edges = {{0, 1, 0.6}, {1, 0, 0.9}};
    const PatternSet ps = generate_patterns(g);
    REQUIRE(ps.count() == 2);
    CHECK(ps.patterns[0].mask == 4u);
    CHECK(ps.patterns[1].mask == 5u);
    CHECK(ps.patterns[1].entries[0].weight == doctest::Approx(0.4));
    CHECK(mask_label(5) == "{1,3}");
    CHECK(mask_label(7) == "{1,2,3}");
}

TEST_CASE("HetSS graphs have type-disjoint relation supports") {
    ModelParams p = init_params([] {
        TrainConfig c;
        c.patch = 4;
        c.stride = 4;
        c.dim = 8;
        c.k = 1;
        return c;
    }());
    TrainConfig cfg;
    const ForwardResult fr = forward(toy_scene(0), p, cfg);
    CHECK(fr.graph.n_patches == 2);
    REQUIRE(fr.patterns.count() == 3);
    CHECK(fr.patterns.patterns[0].mask == 1u);
    CHECK(fr.patterns.patterns[1].mask == 2u);
    CHECK(fr.patterns.patterns[2].mask == 4u);
    CHECK(fr.patterns.patterns[0].nnz() == 2);
    CHECK(fr.patterns.patterns[1].nnz() == 8);
    CHECK(fr.patterns.patterns[2].nnz() == 16);
}

TEST_CASE("pattern dump format") {
    HetGraph g;
    g.node_count = 3;
    g.relations[0].edges = {{1, 0, 0.5}};
    g.relations[1].edges = {{1, 0, 0.25}};
    std::ostringstream out;
    dump_patterns(out, generate_patterns(g));
    CHECK(out.str() == "pattern S={1,2} nnz=1\n0 1 0.375000\n");
}

TEST_CASE("oracle refuses very large graphs") {
    HetGraph g;
    g.node_count = 10001;
    CHECK_THROWS_AS(pattern_oracle(g), ValidationError);
}
