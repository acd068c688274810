#pragma once

#include "hetss/patches.hpp"

#include <Eigen/Dense>

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

namespace hetss {

inline constexpr int kBands = 4;
inline constexpr int kRelations = 3;

enum class NodeKind { Pan, Band };

/// Typed node address. PAN node i sits at flat index i, BAND node (i, b) at N + 4i + b.
struct NodeIndex {
    NodeKind kind = NodeKind::Pan;
    int patch = 0;
    int band = -1;
    int flat = 0;

    static NodeIndex pan(int patch) { return {NodeKind::Pan, patch, -1, patch}; }
    static NodeIndex band_of(int patch, int band, int n_patches) {
        return {NodeKind::Band, patch, band, n_patches + kBands * patch + band};
    }
    static NodeIndex from_flat(int flat, int n_patches);

    friend bool operator==(const NodeIndex&, const NodeIndex&) = default;
};

inline int pan_node(int patch) noexcept { return patch; }
inline int band_node(int patch, int band, int n_patches) noexcept { return n_patches + kBands * patch + band; }

/// Directed weighted edge src -> dst; stored in row `dst` of the adjacency ("row = receiver").
struct Edge {
    int dst = 0;
    int src = 0;
    double weight = 0.0;

    friend bool operator==(const Edge&, const Edge&) = default;
};

/// One edge type of the multiplex graph, edges sorted by (dst, src) without duplicates.
struct Relation {
    std::vector<Edge> edges;

    std::size_t nnz() const noexcept { return edges.size(); }
    /// Index of edge src -> dst, or -1.
    long find(int dst, int src) const noexcept;
    bool contains(int dst, int src) const noexcept { return find(dst, src) >= 0; }
    /// Sorts and rejects duplicate (dst, src) pairs.
    void canonicalize();
};

/// Attributed multiplex heterogeneous graph over 5N nodes (N PAN + 4N BAND) with 3 relations:
/// 0 = PAN-PAN k-NN, 1 = same-band BAND-BAND k-NN, 2 = same-patch BAND<->PAN.
///
/// Generic multiplex graphs (used for pattern tests) leave n_patches at 0 and only set
/// node_count and relations.
struct HetGraph {
    int n_patches = 0;
    int node_count = 0;
    int k = 0;
    Eigen::MatrixXd U; // node_count x d node attributes
    std::array<Relation, kRelations> relations;

    int dim() const noexcept { return static_cast<int>(U.cols()); }
};

/// Patch features: pan is N x d, band[b] is N x d.
struct PatchFeatures {
    Eigen::MatrixXd pan;
    std::array<Eigen::MatrixXd, kBands> band;
};

/// Row i of the patch matrix is the flattened patch i (N x p*p*channels).
Eigen::MatrixXd patch_matrix(const PatchGrid& grid);

/// x_i = W_p * flatten(pan patch i), y_i^b = W_b * flatten(band-b patch i).
/// Embedding matrices are d x p^2; every band grid must be single-channel with the pan grid's N.
PatchFeatures embed_patches(const PatchGrid& pan_grid, const std::array<PatchGrid, kBands>& band_grids,
                            const Eigen::MatrixXd& embed_pan, const std::array<Eigen::MatrixXd, kBands>& embed_band);

/// Cosine similarity; 0 when either vector has zero norm.
double cosine_similarity(const Eigen::Ref<const Eigen::RowVectorXd>& a, const Eigen::Ref<const Eigen::RowVectorXd>& b);

/// Edge weight for a similarity: clamp(cos, 0, 1).
inline double edge_weight(double cos) noexcept { return cos < 0.0 ? 0.0 : (cos > 1.0 ? 1.0 : cos); }

/// For every row i, the min(k, M-1) other rows with the highest cosine similarity
/// (ties to the lower index), as edges j -> i sorted by (dst, src).
std::vector<Edge> knn_edges(const Eigen::MatrixXd& feats, int k);

HetGraph build_hetss_graph(const PatchFeatures& feats, int k);

/// Node-type signature violations of a HetSS graph (empty when valid).
std::vector<std::string> check_hetss_invariants(const HetGraph& g);

/// `relation src dst weight` lines, relations numbered 1..3, six-decimal weights.
void dump_edges(std::ostream& out, const HetGraph& g);

} // namespace hetss
