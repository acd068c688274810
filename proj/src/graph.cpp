#include "hetss/graph.hpp"

#include "hetss/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

namespace hetss {

NodeIndex NodeIndex::from_flat(int flat, int n_patches) {
    if (flat < 0 || flat >= (1 + kBands) * n_patches) {
        throw ValidationError("flat node index out of range");
    }
    if (flat < n_patches) {
        return pan(flat);
    }
    const int rel = flat - n_patches;
    return band_of(rel / kBands, rel % kBands, n_patches);
}

long Relation::find(int dst, int src) const noexcept {
    const auto it = std::lower_bound(edges.begin(), edges.end(), std::pair{dst, src}, [](const Edge& e, auto key) {
        return std::pair{e.dst, e.src} < key;
    });
    if (it != edges.end() && it->dst == dst && it->src == src) {
        return static_cast<long>(it - edges.begin());
    }
    return -1;
}

void Relation::canonicalize() {
    std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
        return std::pair{a.dst, a.src} < std::pair{b.dst, b.src};
    });
    for (std::size_t i = 1; i < edges.size(); ++i) {
        if (edges[i].dst == edges[i - 1].dst && edges[i].src == edges[i - 1].src) {
            throw ValidationError("duplicate edge in relation");
        }
    }
}

Eigen::MatrixXd patch_matrix(const PatchGrid& grid) {
    Eigen::MatrixXd m(grid.count(), grid.patch_len());
    for (int i = 0; i < grid.count(); ++i) {
        const auto vals = grid.patch_values(i);
        for (int j = 0; j < grid.patch_len(); ++j) {
            m(i, j) = vals[static_cast<std::size_t>(j)];
        }
    }
    return m;
}

PatchFeatures embed_patches(const PatchGrid& pan_grid, const std::array<PatchGrid, kBands>& band_grids,
                            const Eigen::MatrixXd& embed_pan, const std::array<Eigen::MatrixXd, kBands>& embed_band) {
    if (pan_grid.channels != 1 || embed_pan.cols() != pan_grid.patch_len()) {
        throw ValidationError("PAN embedding must map p*p values of a single-channel grid");
    }
    PatchFeatures out;
    out.pan = patch_matrix(pan_grid) * embed_pan.transpose();
    for (int b = 0; b < kBands; ++b) {
        const PatchGrid& g = band_grids[static_cast<std::size_t>(b)];
        const Eigen::MatrixXd& w = embed_band[static_cast<std::size_t>(b)];
        if (g.channels != 1 || g.count() != pan_grid.count() || w.cols() != g.patch_len() ||
            w.rows() != embed_pan.rows()) {
            throw ValidationError("band embedding or grid does not match the PAN grid");
        }
        out.band[static_cast<std::size_t>(b)] = patch_matrix(g) * w.transpose();
    }
    return out;
}

double cosine_similarity(const Eigen::Ref<const Eigen::RowVectorXd>& a, const Eigen::Ref<const Eigen::RowVectorXd>& b) {
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0) {
        return 0.0;
    }
    return a.dot(b) / (na * nb);
}

std::vector<Edge> knn_edges(const Eigen::MatrixXd& feats, int k) {
    const int m = static_cast<int>(feats.rows());
    if (m < 2) {
        throw ValidationError("k-NN needs at least two nodes");
    }
    if (k < 1) {
        throw ValidationError("k must be >= 1");
    }
    if (!feats.allFinite()) {
        throw ValidationError("non-finite features passed to k-NN");
    }
    const int kk = std::min(k, m - 1);

    Eigen::MatrixXd unit = feats;
    for (int i = 0; i < m; ++i) {
        const double n = feats.row(i).norm();
        unit.row(i) = n > 0.0 ? Eigen::RowVectorXd(feats.row(i) / n) : Eigen::RowVectorXd::Zero(feats.cols());
    }
    const Eigen::MatrixXd sims = unit * unit.transpose();

    std::vector<Edge> edges;
    edges.reserve(static_cast<std::size_t>(m) * kk);
    std::vector<int> cand(static_cast<std::size_t>(m - 1));
    for (int i = 0; i < m; ++i) {
        std::size_t c = 0;
        for (int j = 0; j < m; ++j) {
            if (j != i) {
                cand[c++] = j;
            }
        }
        std::partial_sort(cand.begin(), cand.begin() + kk, cand.end(), [&](int a, int b) {
            const double sa = sims(i, a);
            const double sb = sims(i, b);
            return sa != sb ? sa > sb : a < b;
        });
        std::vector<int> chosen(cand.begin(), cand.begin() + kk);
        std::sort(chosen.begin(), chosen.end());
        for (int j : chosen) {
            edges.push_back({i, j, edge_weight(cosine_similarity(feats.row(i), feats.row(j)))});
        }
    }
    return edges;
}

HetGraph build_hetss_graph(const PatchFeatures& feats, int k) {
    const int n = static_cast<int>(feats.pan.rows());
    const int d = static_cast<int>(feats.pan.cols());
    if (n < 2) {
        throw ValidationError("HetSS graph needs at least two patches");
    }
    for (const auto& bf : feats.band) {
        if (bf.rows() != n || bf.cols() != d) {
            throw ValidationError("band features must match PAN feature shape");
        }
    }

    HetGraph g;
    g.n_patches = n;
    g.node_count = (1 + kBands) * n;
    g.k = k;
    g.U.resize(g.node_count, d);
    g.U.topRows(n) = feats.pan;
    for (int i = 0; i < n; ++i) {
        for (int b = 0; b < kBands; ++b) {
            g.U.row(band_node(i, b, n)) = feats.band[static_cast<std::size_t>(b)].row(i);
        }
    }

    g.relations[0].edges = knn_edges(feats.pan, k);

    auto& intra = g.relations[1].edges;
    for (int b = 0; b < kBands; ++b) {
        for (const Edge& e : knn_edges(feats.band[static_cast<std::size_t>(b)], k)) {
            intra.push_back({band_node(e.dst, b, n), band_node(e.src, b, n), e.weight});
        }
    }
    g.relations[1].canonicalize();

    auto& cross = g.relations[2].edges;
    for (int i = 0; i < n; ++i) {
        for (int b = 0; b < kBands; ++b) {
            const double w =
                edge_weight(cosine_similarity(feats.pan.row(i), feats.band[static_cast<std::size_t>(b)].row(i)));
            cross.push_back({pan_node(i), band_node(i, b, n), w});
            cross.push_back({band_node(i, b, n), pan_node(i), w});
        }
    }
    g.relations[2].canonicalize();
    return g;
}

std::vector<std::string> check_hetss_invariants(const HetGraph& g) {
    std::vector<std::string> issues;
    const int n = g.n_patches;
    auto describe = [](int r, const Edge& e, const char* why) {
        return "relation " + std::to_string(r + 1) + " edge " + std::to_string(e.src) + "->" + std::to_string(e.dst) +
               ": " + why;
    };
    const int expect_deg = std::min(g.k, n - 1);
    std::vector<int> deg0(static_cast<std::size_t>(g.node_count), 0);
    std::vector<int> deg1(static_cast<std::size_t>(g.node_count), 0);
    for (int r = 0; r < kRelations; ++r) {
        for (const Edge& e : g.relations[static_cast<std::size_t>(r)].edges) {
            if (!(e.weight >= 0.0 && e.weight <= 1.0)) {
                issues.push_back(describe(r, e, "weight outside [0,1]"));
            }
            const NodeIndex dst = NodeIndex::from_flat(e.dst, n);
            const NodeIndex src = NodeIndex::from_flat(e.src, n);
            if (r == 0) {
                if (dst.kind != NodeKind::Pan || src.kind != NodeKind::Pan || e.dst == e.src) {
                    issues.push_back(describe(r, e, "not a PAN-PAN pair"));
                }
                ++deg0[static_cast<std::size_t>(e.dst)];
            } else if (r == 1) {
                if (dst.kind != NodeKind::Band || src.kind != NodeKind::Band || dst.band != src.band ||
                    e.dst == e.src) {
                    issues.push_back(describe(r, e, "not a same-band BAND-BAND pair"));
                }
                ++deg1[static_cast<std::size_t>(e.dst)];
            } else {
                if (dst.kind == src.kind || dst.patch != src.patch) {
                    issues.push_back(describe(r, e, "not a same-patch BAND-PAN pair"));
                }
            }
        }
    }
    for (int v = 0; v < g.node_count; ++v) {
        const bool is_pan = v < n;
        const int got = is_pan ? deg0[static_cast<std::size_t>(v)] : deg1[static_cast<std::size_t>(v)];
        if (got != expect_deg) {
            issues.push_back("node " + std::to_string(v) + " has in-degree " + std::to_string(got) + ", expected " +
                             std::to_string(expect_deg));
        }
    }
    return issues;
}

void dump_edges(std::ostream& out, const HetGraph& g) {
    char buf[96];
    for (int r = 0; r < kRelations; ++r) {
        for (const Edge& e : g.relations[static_cast<std::size_t>(r)].edges) {
            std::snprintf(buf, sizeof buf, "%d %d %d %.6f\n", r + 1, e.src, e.dst, e.weight);
            out << buf;
        }
    }
}

} // namespace hetss
