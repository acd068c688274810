#pragma once

#include "hetss/graph.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace hetss {

inline constexpr int kMaxPatterns = (1 << kRelations) - 1;

struct PatternEntry {
    int row = 0; // receiving node
    int col = 0; // sending node
    double weight = 0.0;

    friend bool operator==(const PatternEntry&, const PatternEntry&) = default;
};

/// Basic relationship pattern: the node pairs linked by exactly the relations in `mask`
/// (bit r set <=> relation r+1 present). Entries sorted by (row, col).
struct Pattern {
    unsigned mask = 0;
    std::vector<PatternEntry> entries;

    std::size_t nnz() const noexcept { return entries.size(); }
    /// Slot of this pattern in 7-entry parameter vectors (alpha, beta).
    int slot() const noexcept { return static_cast<int>(mask) - 1; }
};

/// Nonempty patterns sorted by mask.
struct PatternSet {
    int node_count = 0;
    std::vector<Pattern> patterns;

    std::size_t count() const noexcept { return patterns.size(); }
    const Pattern* find(unsigned mask) const noexcept;
    std::size_t total_nnz() const noexcept;
};

/// Relation subset label, e.g. "{1,3}".
std::string mask_label(unsigned mask);

/// Pattern extraction by logical algebra on the binary relation supports: per mask,
/// XNOR each support with the mask bit and AND the results (a sparse intersection of the
/// selected supports minus the union of the others). Entry weights are the mean of the
/// participating relations' weights; empty patterns are dropped.
PatternSet generate_patterns(const HetGraph& g);

/// Reference implementation: classifies every ordered node pair by its relation signature.
/// Throws ValidationError beyond 10,000 nodes.
PatternSet pattern_oracle(const HetGraph& g);

/// Same masks, same supports, weights within `tol`.
bool patterns_equal(const PatternSet& a, const PatternSet& b, double tol = 1e-9);

/// Blocks of `pattern S=<subset> nnz=<n>` followed by `src dst weight` lines.
void dump_patterns(std::ostream& out, const PatternSet& ps);

} // namespace hetss
