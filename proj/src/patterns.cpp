#include "hetss/patterns.hpp"

#include "hetss/error.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <iterator>
#include <ostream>
#include <unordered_map>
#include <utility>

namespace hetss {

namespace {

using Key = std::pair<int, int>; // (row, col)

std::vector<Key> support(const Relation& rel) {
    std::vector<Key> keys;
    keys.reserve(rel.nnz());
    for (const Edge& e : rel.edges) {
        keys.emplace_back(e.dst, e.src);
    }
    return keys;
}

} // namespace

const Pattern* PatternSet::find(unsigned mask) const noexcept {
    for (const Pattern& p : patterns) {
        if (p.mask == mask) {
            return &p;
        }
    }
    return nullptr;
}

std::size_t PatternSet::total_nnz() const noexcept {
    std::size_t n = 0;
    for (const Pattern& p : patterns) {
        n += p.nnz();
    }
    return n;
}

std::string mask_label(unsigned mask) {
    std::string s = "{";
    for (int r = 0; r < kRelations; ++r) {
        if (mask & (1u << r)) {
            if (s.size() > 1) {
                s += ',';
            }
            s += std::to_string(r + 1);
        }
    }
    return s + "}";
}

PatternSet generate_patterns(const HetGraph& g) {
    std::array<std::vector<Key>, kRelations> supports;
    for (int r = 0; r < kRelations; ++r) {
        supports[static_cast<std::size_t>(r)] = support(g.relations[static_cast<std::size_t>(r)]);
    }

    PatternSet ps;
    ps.node_count = g.node_count;
    for (unsigned mask = 1; mask <= static_cast<unsigned>(kMaxPatterns); ++mask) {
        // AND over relations with logical variable 1: intersection of supports.
        std::vector<Key> keep;
        bool first = true;
        for (int r = 0; r < kRelations; ++r) {
            if (!(mask & (1u << r))) {
                continue;
            }
            const auto& s = supports[static_cast<std::size_t>(r)];
            if (first) {
                keep = s;
                first = false;
            } else {
                std::vector<Key> next;
                std::set_intersection(keep.begin(), keep.end(), s.begin(), s.end(), std::back_inserter(next));
                keep = std::move(next);
            }
        }
        // AND with XNOR(A_r, 0) = complement: remove pairs present in unselected relations.
        for (int r = 0; r < kRelations && !keep.empty(); ++r) {
            if (mask & (1u << r)) {
                continue;
            }
            const auto& s = supports[static_cast<std::size_t>(r)];
            std::vector<Key> next;
            std::set_difference(keep.begin(), keep.end(), s.begin(), s.end(), std::back_inserter(next));
            keep = std::move(next);
        }
        if (keep.empty()) {
            continue; // zero matrix: pattern absent from this graph
        }

        Pattern p;
        p.mask = mask;
        p.entries.reserve(keep.size());
        const int members = std::popcount(mask);
        for (const auto& [row, col] : keep) {
            double sum = 0.0;
            for (int r = 0; r < kRelations; ++r) {
                if (mask & (1u << r)) {
                    const auto& rel = g.relations[static_cast<std::size_t>(r)];
                    sum += rel.edges[static_cast<std::size_t>(rel.find(row, col))].weight;
                }
            }
            p.entries.push_back({row, col, sum / members});
        }
        ps.patterns.push_back(std::move(p));
    }
    return ps;
}

PatternSet pattern_oracle(const HetGraph& g) {
    const int n = g.node_count;
    if (n > 10000) {
        throw ValidationError("pattern oracle limited to 10,000 nodes");
    }
    std::array<std::unordered_map<std::uint64_t, double>, kRelations> lookup;
    for (int r = 0; r < kRelations; ++r) {
        for (const Edge& e : g.relations[static_cast<std::size_t>(r)].edges) {
            lookup[static_cast<std::size_t>(r)][static_cast<std::uint64_t>(e.dst) * static_cast<std::uint64_t>(n) +
                                                static_cast<std::uint64_t>(e.src)] = e.weight;
        }
    }

    std::array<std::vector<PatternEntry>, kMaxPatterns + 1> by_mask;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const std::uint64_t key = static_cast<std::uint64_t>(i) * static_cast<std::uint64_t>(n) +
                                      static_cast<std::uint64_t>(j);
            unsigned signature = 0;
            double sum = 0.0;
            for (int r = 0; r < kRelations; ++r) {
                const auto it = lookup[static_cast<std::size_t>(r)].find(key);
                if (it != lookup[static_cast<std::size_t>(r)].end()) {
                    signature |= 1u << r;
                    sum += it->second;
                }
            }
            if (signature != 0) {
                by_mask[signature].push_back({i, j, sum / std::popcount(signature)});
            }
        }
    }

    PatternSet ps;
    ps.node_count = n;
    for (unsigned mask = 1; mask <= static_cast<unsigned>(kMaxPatterns); ++mask) {
        if (!by_mask[mask].empty()) {
            ps.patterns.push_back({mask, std::move(by_mask[mask])});
        }
    }
    return ps;
}

bool patterns_equal(const PatternSet& a, const PatternSet& b, double tol) {
    if (a.node_count != b.node_count || a.count() != b.count()) {
        return false;
    }
    for (std::size_t m = 0; m < a.count(); ++m) {
        const Pattern& pa = a.patterns[m];
        const Pattern& pb = b.patterns[m];
        if (pa.mask != pb.mask || pa.nnz() != pb.nnz()) {
            return false;
        }
        for (std::size_t e = 0; e < pa.nnz(); ++e) {
            const auto& x = pa.entries[e];
            const auto& y = pb.entries[e];
            if (x.row != y.row || x.col != y.col || !(std::abs(x.weight - y.weight) <= tol)) {
                return false;
            }
        }
    }
    return true;
}

void dump_patterns(std::ostream& out, const PatternSet& ps) {
    char buf[96];
    for (const Pattern& p : ps.patterns) {
        out << "pattern S=" << mask_label(p.mask) << " nnz=" << p.nnz() << '\n';
        for (const PatternEntry& e : p.entries) {
            std::snprintf(buf, sizeof buf, "%d %d %.6f\n", e.col, e.row, e.weight);
            out << buf;
        }
    }
}

} // namespace hetss
