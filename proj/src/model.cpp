#include "hetss/model.hpp"

#include "hetss/error.hpp"
#include "hetss/resample.hpp"
#include "pipeline.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <random>

namespace hetss {

void ModelParams::for_each(const std::function<void(const std::string&, Eigen::Ref<Eigen::MatrixXd>)>& fn) {
    fn("embed_pan", embed_pan);
    for (int b = 0; b < kBands; ++b) {
        fn("embed_band." + std::to_string(b), embed_band[static_cast<std::size_t>(b)]);
    }
    fn("alpha", alpha);
    fn("beta", beta);
    for (std::size_t i = 0; i < w_local.size(); ++i) {
        fn("w_local." + std::to_string(i), w_local[i]);
    }
    for (std::size_t i = 0; i < w_global.size(); ++i) {
        fn("w_global." + std::to_string(i), w_global[i]);
    }
    for (int b = 0; b < kBands; ++b) {
        fn("recon." + std::to_string(b), recon[static_cast<std::size_t>(b)]);
    }
}

void ModelParams::for_each(const std::function<void(const std::string&, Eigen::Ref<const Eigen::MatrixXd>)>& fn) const {
    auto& self = const_cast<ModelParams&>(*this);
    self.for_each([&](const std::string& name, Eigen::Ref<Eigen::MatrixXd> m) { fn(name, m); });
}

std::size_t ModelParams::size() const {
    std::size_t n = 0;
    for_each([&](const std::string&, Eigen::Ref<const Eigen::MatrixXd> m) { n += static_cast<std::size_t>(m.size()); });
    return n;
}

ModelParams ModelParams::zeros_like() const {
    ModelParams z = *this;
    z.for_each([](const std::string&, Eigen::Ref<Eigen::MatrixXd> m) { m.setZero(); });
    return z;
}

bool ModelParams::all_finite() const {
    bool ok = true;
    for_each([&](const std::string&, Eigen::Ref<const Eigen::MatrixXd> m) { ok = ok && m.allFinite(); });
    return ok;
}

void ModelParams::axpy(double scale, const ModelParams& other) {
    std::vector<Eigen::MatrixXd> src;
    other.for_each([&](const std::string&, Eigen::Ref<const Eigen::MatrixXd> m) { src.emplace_back(m); });
    std::size_t i = 0;
    for_each([&](const std::string& name, Eigen::Ref<Eigen::MatrixXd> m) {
        if (i >= src.size() || src[i].rows() != m.rows() || src[i].cols() != m.cols()) {
            throw ValidationError("axpy: shape mismatch at " + name);
        }
        m += scale * src[i++];
    });
}

ModelParams init_params(const TrainConfig& cfg, int pattern_count) {
    cfg.validate();
    if (pattern_count < 1) {
        throw ValidationError("pattern_count must be >= 1");
    }
    std::mt19937_64 rng(cfg.seed);
    auto glorot = [&](int rows, int cols) {
        const double a = std::sqrt(6.0 / (rows + cols));
        std::uniform_real_distribution<double> u(-a, a);
        Eigen::MatrixXd m(rows, cols);
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            for (Eigen::Index i = 0; i < m.rows(); ++i) {
                m(i, j) = u(rng);
            }
        }
        return m;
    };
    const int d = cfg.dim;
    const int p2 = cfg.patch * cfg.patch;

    ModelParams p;
    p.patch = cfg.patch;
    p.stride = cfg.stride;
    p.k = cfg.k;
    p.tau = cfg.tau;
    p.gamma = cfg.gamma;
    p.embed_pan = glorot(d, p2);
    for (auto& w : p.embed_band) {
        w = glorot(d, p2);
    }
    p.alpha = Eigen::VectorXd::Constant(kMaxPatterns, 1.0 / pattern_count);
    p.beta = Eigen::VectorXd::Ones(kMaxPatterns);
    for (int i = 0; i < cfg.layers; ++i) {
        p.w_local.push_back(glorot(d, d));
    }
    for (int i = 0; i < cfg.layers; ++i) {
        p.w_global.push_back(glorot(d, d));
    }
    for (auto& r : p.recon) {
        r = Eigen::MatrixXd::Zero(p2, 2 * d);
    }
    return p;
}

Eigen::SparseMatrix<double, Eigen::RowMajor> local_operator(const PatternSet& ps, const Eigen::VectorXd& alpha) {
    if (alpha.size() != kMaxPatterns) {
        throw ValidationError("alpha must have one entry per pattern mask");
    }
    const int n = ps.node_count;
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(2 * ps.total_nnz() + static_cast<std::size_t>(n));
    for (const Pattern& pat : ps.patterns) {
        const double a = alpha(pat.slot());
        for (const PatternEntry& e : pat.entries) {
            trip.emplace_back(e.row, e.col, 0.5 * a * e.weight);
            trip.emplace_back(e.col, e.row, 0.5 * a * e.weight);
        }
    }
    for (int i = 0; i < n; ++i) {
        trip.emplace_back(i, i, 1.0);
    }
    Eigen::SparseMatrix<double, Eigen::RowMajor> m(n, n);
    m.setFromTriplets(trip.begin(), trip.end());
    Eigen::VectorXd dinv(n);
    for (int i = 0; i < n; ++i) {
        const double deg = m.row(i).sum();
        dinv(i) = deg > 0.0 ? 1.0 / std::sqrt(deg) : 0.0;
    }
    for (int i = 0; i < n; ++i) {
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(m, i); it; ++it) {
            it.valueRef() *= dinv(i) * dinv(it.col());
        }
    }
    return m;
}

namespace {

Eigen::MatrixXd chain(const std::vector<Eigen::MatrixXd>& w, int upto) {
    Eigen::MatrixXd p = w.at(0);
    for (int i = 1; i < upto; ++i) {
        p = p * w.at(static_cast<std::size_t>(i));
    }
    return p;
}

void check_weights(const std::vector<Eigen::MatrixXd>& w, Eigen::Index d) {
    if (w.empty()) {
        throw ValidationError("at least one layer is required");
    }
    for (const auto& m : w) {
        if (m.rows() != d || m.cols() != d) {
            throw ValidationError("layer weights must be d x d");
        }
    }
}

} // namespace

Eigen::MatrixXd aggregate_local(const PatternSet& ps, const Eigen::MatrixXd& U, const Eigen::VectorXd& alpha,
                                const std::vector<Eigen::MatrixXd>& w_local) {
    if (U.rows() != ps.node_count) {
        throw ValidationError("U rows must equal the node count");
    }
    check_weights(w_local, U.cols());
    const Eigen::MatrixXd AU = local_operator(ps, alpha) * U;
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(U.rows(), U.cols());
    Eigen::MatrixXd cur = AU;
    for (const auto& w : w_local) {
        cur = cur * w;
        h += cur;
    }
    return h / static_cast<double>(w_local.size());
}

Eigen::MatrixXd build_global_pattern_matrix(const PatternSet& ps, const Eigen::VectorXd& beta) {
    if (ps.count() == 0) {
        throw ValidationError("global pattern matrix needs at least one pattern");
    }
    if (beta.size() != kMaxPatterns) {
        throw ValidationError("beta must have one entry per pattern mask");
    }
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(ps.node_count, static_cast<Eigen::Index>(ps.count()));
    for (std::size_t m = 0; m < ps.count(); ++m) {
        const Pattern& pat = ps.patterns[m];
        for (const PatternEntry& e : pat.entries) {
            B(e.row, static_cast<Eigen::Index>(m)) += e.weight;
        }
        B.col(static_cast<Eigen::Index>(m)) *= beta(pat.slot());
    }
    return B;
}

Eigen::MatrixXd global_similarity(const Eigen::MatrixXd& B) {
    if (!B.allFinite()) {
        throw ValidationError("non-finite global pattern matrix");
    }
    Eigen::MatrixXd S = B * B.transpose();
    for (Eigen::Index i = 0; i < S.rows(); ++i) {
        const double r = S.row(i).cwiseAbs().sum();
        if (r > 0.0) {
            S.row(i) /= r;
        }
    }
    return S;
}

Eigen::MatrixXd aggregate_global(const Eigen::MatrixXd& global_sim, const Eigen::MatrixXd& U,
                                 const std::vector<Eigen::MatrixXd>& w_global) {
    if (global_sim.rows() != global_sim.cols() || global_sim.cols() != U.rows()) {
        throw ValidationError("global similarity must be square with U's row count");
    }
    check_weights(w_global, U.cols());
    return (global_sim * U) * chain(w_global, static_cast<int>(w_global.size()));
}

Eigen::MatrixXd fuse(const Eigen::MatrixXd& local, const Eigen::MatrixXd& global) {
    if (local.rows() != global.rows() || local.cols() != global.cols()) {
        throw ValidationError("fuse: shape mismatch");
    }
    return (local + global) / 2.0;
}

Image reconstruct(const Eigen::MatrixXd& H, const PatchGrid& geometry, const std::array<Eigen::MatrixXd, kBands>& recon,
                  const Image& lrms_up) {
    const int N = geometry.count();
    const int d = static_cast<int>(H.cols());
    const int p = geometry.patch;
    if (H.rows() != (1 + kBands) * N) {
        throw ValidationError("H must have 5N rows");
    }
    if (lrms_up.channels() != kBands || lrms_up.height() != geometry.height || lrms_up.width() != geometry.width) {
        throw ValidationError("upsampled LR-MS does not match the patch geometry");
    }
    for (const auto& r : recon) {
        if (r.rows() != p * p || r.cols() != 2 * d) {
            throw ValidationError("reconstruction heads must be p^2 x 2d");
        }
    }
    std::vector<double> acc(lrms_up.size(), 0.0);
    const std::vector<int> cover = geometry.coverage();
    Eigen::VectorXd f(2 * d);
    for (int i = 0; i < N; ++i) {
        for (int b = 0; b < kBands; ++b) {
            f.head(d) = H.row(pan_node(i)).transpose();
            f.tail(d) = H.row(band_node(i, b, N)).transpose();
            const Eigen::VectorXd block = recon[static_cast<std::size_t>(b)] * f;
            for (int q = 0; q < p * p; ++q) {
                const int y = geometry.origin_y(i) + q / p;
                const int x = geometry.origin_x(i) + q % p;
                acc[(static_cast<std::size_t>(y) * geometry.width + static_cast<std::size_t>(x)) * kBands +
                    static_cast<std::size_t>(b)] += block(q);
            }
        }
    }
    Image out(lrms_up.height(), lrms_up.width(), kBands);
    const auto up = lrms_up.data();
    auto dst = out.data();
    for (std::size_t k = 0; k < acc.size(); ++k) {
        const double v = acc[k] / cover[k / kBands] + up[k];
        dst[k] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
    return out;
}

namespace detail {

SceneData prepare_scene(const ScenePair& scene, int patch, int stride) {
    scene.validate();
    SceneData sd;
    sd.lrms_up = upsample_bicubic(scene.lrms, scene.scale);
    const PatchGrid pan_grid = extract_patches(scene.pan, patch, stride);
    sd.geometry = pan_grid.geometry();
    sd.geometry.channels = kBands;
    sd.cover = pan_grid.coverage();
    sd.pan_patches = patch_matrix(pan_grid);
    for (int b = 0; b < kBands; ++b) {
        sd.band_patches[static_cast<std::size_t>(b)] = patch_matrix(extract_patches(sd.lrms_up.channel(b), patch, stride));
    }
    sd.gt = scene.gt;
    return sd;
}

Topology make_topology(const HetGraph& g, const PatternSet& ps) {
    Topology t;
    t.n_patches = g.n_patches;
    t.node_count = g.node_count;
    for (int r = 0; r < kRelations; ++r) {
        for (const Edge& e : g.relations[static_cast<std::size_t>(r)].edges) {
            t.edges[static_cast<std::size_t>(r)].emplace_back(e.dst, e.src);
        }
    }

    std::vector<std::pair<int, int>> pairs;
    pairs.reserve(2 * ps.total_nnz() + static_cast<std::size_t>(g.node_count));
    for (const Pattern& pat : ps.patterns) {
        for (const PatternEntry& e : pat.entries) {
            PatternLink lk;
            lk.row = e.row;
            lk.col = e.col;
            lk.slot = pat.slot();
            lk.members = std::popcount(pat.mask);
            for (int r = 0; r < kRelations; ++r) {
                if (pat.mask & (1u << r)) {
                    lk.edge[static_cast<std::size_t>(r)] = g.relations[static_cast<std::size_t>(r)].find(e.row, e.col);
                }
            }
            t.links.push_back(lk);
            pairs.emplace_back(e.row, e.col);
            pairs.emplace_back(e.col, e.row);
        }
    }
    for (int i = 0; i < g.node_count; ++i) {
        pairs.emplace_back(i, i);
    }
    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());

    t.row_ptr.assign(static_cast<std::size_t>(g.node_count) + 1, 0);
    t.col.reserve(pairs.size());
    for (const auto& [r, c] : pairs) {
        ++t.row_ptr[static_cast<std::size_t>(r) + 1];
        t.col.push_back(c);
    }
    for (int i = 0; i < g.node_count; ++i) {
        t.row_ptr[static_cast<std::size_t>(i) + 1] += t.row_ptr[static_cast<std::size_t>(i)];
    }
    auto position = [&](int r, int c) {
        const auto first = t.col.begin() + t.row_ptr[static_cast<std::size_t>(r)];
        const auto last = t.col.begin() + t.row_ptr[static_cast<std::size_t>(r) + 1];
        return static_cast<int>(std::lower_bound(first, last, c) - t.col.begin());
    };
    t.diag.resize(static_cast<std::size_t>(g.node_count));
    for (int i = 0; i < g.node_count; ++i) {
        t.diag[static_cast<std::size_t>(i)] = position(i, i);
    }
    for (PatternLink& lk : t.links) {
        lk.fwd = position(lk.row, lk.col);
        lk.bwd = position(lk.col, lk.row);
    }
    return t;
}

void validate_params(const ModelParams& params, int patch_len) {
    const auto require = [](bool ok, const char* msg) {
        if (!ok) {
            throw ValidationError(std::string("parameters: ") + msg);
        }
    };
    const Eigen::Index d = params.embed_pan.rows();
    require(params.patch >= 1 && params.stride >= 1 && params.stride <= params.patch, "bad patch/stride");
    require(params.k >= 1 && params.tau > 0.0 && params.gamma >= 0.0, "bad k, tau or gamma");
    require(d >= 1 && params.embed_pan.cols() == patch_len, "embed_pan must be d x p^2");
    for (const auto& e : params.embed_band) {
        require(e.rows() == d && e.cols() == patch_len, "embed_band must be d x p^2");
    }
    require(params.alpha.size() == kMaxPatterns && params.beta.size() == kMaxPatterns, "alpha and beta need 7 slots");
    require(!params.w_local.empty() && params.w_global.size() == params.w_local.size(), "layer counts differ");
    for (const auto* ws : {&params.w_local, &params.w_global}) {
        for (const auto& w : *ws) {
            require(w.rows() == d && w.cols() == d, "layer weights must be d x d");
        }
    }
    for (const auto& r : params.recon) {
        require(r.rows() == patch_len && r.cols() == 2 * d, "reconstruction heads must be p^2 x 2d");
    }
}

Structure build_structure(const SceneData& sd, const ModelParams& params) {
    validate_params(params, static_cast<int>(sd.pan_patches.cols()));
    PatchFeatures feats;
    feats.pan = sd.pan_patches * params.embed_pan.transpose();
    for (int b = 0; b < kBands; ++b) {
        feats.band[static_cast<std::size_t>(b)] =
            sd.band_patches[static_cast<std::size_t>(b)] * params.embed_band[static_cast<std::size_t>(b)].transpose();
    }
    if (!feats.pan.allFinite()) {
        throw DivergenceError("patch embeddings became non-finite");
    }
    Structure s;
    s.graph = build_hetss_graph(feats, params.k);
    s.patterns = generate_patterns(s.graph);
    s.topo = make_topology(s.graph, s.patterns);
    return s;
}

} // namespace detail

ForwardResult forward(const ScenePair& scene, const ModelParams& params, const TrainConfig& cfg) {
    const detail::SceneData sd = detail::prepare_scene(scene, params.patch, params.stride);
    detail::Structure st = detail::build_structure(sd, params);
    const auto ev = detail::evaluate<double>(sd, params, cfg.ablate, st.topo, false);

    ForwardResult out;
    out.fused = Image(sd.geometry.height, sd.geometry.width, kBands);
    auto dst = out.fused.data();
    for (std::size_t k = 0; k < ev.pred.size(); ++k) {
        dst[k] = static_cast<float>(ev.pred[k]);
    }
    out.repr.local = ev.local;
    out.repr.global = ev.global;
    out.repr.fused = ev.fused;
    out.graph = std::move(st.graph);
    out.patterns = std::move(st.patterns);
    return out;
}

} // namespace hetss
