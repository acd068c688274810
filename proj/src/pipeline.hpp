#pragma once

// Internal: the forward pass and its hand-written reverse pass, templated on the scalar
// type so gradient checks can run the identical computation in long double.

#include "hetss/config.hpp"
#include "hetss/error.hpp"
#include "hetss/graph.hpp"
#include "hetss/image.hpp"
#include "hetss/model.hpp"
#include "hetss/patches.hpp"
#include "hetss/patterns.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace hetss::detail {

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <class T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

/// Everything about a scene that does not depend on the parameters.
struct SceneData {
    PatchGrid geometry; // values cleared
    Eigen::MatrixXd pan_patches;
    std::array<Eigen::MatrixXd, kBands> band_patches;
    std::vector<int> cover;
    Image lrms_up;
    std::optional<Image> gt;
};

SceneData prepare_scene(const ScenePair& scene, int patch, int stride);

/// One pattern entry with the relation edges it averages.
struct PatternLink {
    int row = 0;
    int col = 0;
    int slot = 0;
    int members = 0;
    std::array<long, kRelations> edge{-1, -1, -1};
    int fwd = 0; // CSR position of (row, col)
    int bwd = 0; // CSR position of (col, row)
};

/// Discrete structure of one forward pass: k-NN choices and pattern supports.
struct Topology {
    int n_patches = 0;
    int node_count = 0;
    std::array<std::vector<std::pair<int, int>>, kRelations> edges; // (dst, src)
    std::vector<PatternLink> links;
    std::vector<int> row_ptr; // CSR of support(M) U support(M^T) U diagonal
    std::vector<int> col;
    std::vector<int> diag;
};

Topology make_topology(const HetGraph& g, const PatternSet& ps);

struct Structure {
    HetGraph graph;
    PatternSet patterns;
    Topology topo;
};

/// Graph and patterns for the current parameters (selection done in double).
Structure build_structure(const SceneData& sd, const ModelParams& params);

template <class T>
struct Evaluation {
    bool has_loss = false;
    T l1 = 0;
    T lcl = 0;
    T total = 0;
    Mat<T> local;
    Mat<T> global;
    Mat<T> fused;
    std::vector<T> pred; // height x width x 4, clamped, not rounded
    ModelParams grad;
};

template <class T>
T sign_of(T v) {
    return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0));
}

/// P[0] = I, P[j+1] = P[j] W[j].
template <class T>
std::vector<Mat<T>> prefix_products(const std::vector<Eigen::MatrixXd>& w, int d) {
    std::vector<Mat<T>> p;
    p.reserve(w.size() + 1);
    p.push_back(Mat<T>::Identity(d, d));
    for (const auto& m : w) {
        p.push_back(p.back() * m.cast<T>());
    }
    return p;
}

/// Gradient of K = sum_j c[j] P[j+1] with respect to each W[j], given dK.
template <class T>
void chain_grad(const std::vector<Eigen::MatrixXd>& w, const std::vector<Mat<T>>& p, const Mat<T>& dk,
                const std::vector<T>& c, std::vector<Eigen::MatrixXd>& out) {
    const int l = static_cast<int>(w.size());
    Mat<T> q = c[static_cast<std::size_t>(l - 1)] * dk;
    for (int j = l - 1; j >= 0; --j) {
        if (j < l - 1) {
            q = c[static_cast<std::size_t>(j)] * dk + q * w[static_cast<std::size_t>(j + 1)].cast<T>().transpose();
        }
        out[static_cast<std::size_t>(j)] = (p[static_cast<std::size_t>(j)].transpose() * q).template cast<double>();
    }
}

template <class T>
Mat<T> normalize_rows(const Mat<T>& a, Vec<T>& norms) {
    norms = a.rowwise().norm();
    Mat<T> out = a;
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        if (norms(i) > T(0)) {
            out.row(i) /= norms(i);
        } else {
            out.row(i).setZero();
        }
    }
    return out;
}

/// Reverse of normalize_rows.
template <class T>
Mat<T> normalize_rows_grad(const Mat<T>& unit, const Vec<T>& norms, const Mat<T>& dunit) {
    Mat<T> out = Mat<T>::Zero(unit.rows(), unit.cols());
    for (Eigen::Index i = 0; i < unit.rows(); ++i) {
        if (norms(i) > T(0)) {
            const T proj = unit.row(i).dot(dunit.row(i));
            out.row(i) = (dunit.row(i) - proj * unit.row(i)) / norms(i);
        }
    }
    return out;
}

template <class T>
Evaluation<T> evaluate(const SceneData& sd, const ModelParams& params, Ablation ablate, const Topology& topo,
                       bool want_grad) {
    using std::exp;
    using std::log;
    using std::sqrt;

    const int N = topo.n_patches;
    const int n = topo.node_count;
    const int d = params.dim();
    const int l = params.layers();
    const int p = params.patch;
    const int p2 = p * p;
    const int H = sd.geometry.height;
    const int W = sd.geometry.width;
    const std::size_t npix = static_cast<std::size_t>(H) * static_cast<std::size_t>(W);
    const bool use_local = ablate != Ablation::GlobalOnly;
    const bool use_global = ablate != Ablation::LocalOnly;
    const bool use_cl = ablate == Ablation::Full;
    const T tau = T(params.tau);
    const T gamma = T(params.gamma);

    if (sd.geometry.count() != N || sd.pan_patches.cols() != p2 || params.embed_pan.cols() != p2) {
        throw ValidationError("parameters do not match the scene patch geometry");
    }
    if (want_grad && !sd.gt) {
        throw ValidationError("gradients need a reference image");
    }

    Evaluation<T> out;

    // Patch embeddings and node attributes.
    const Mat<T> ppan = sd.pan_patches.cast<T>();
    std::array<Mat<T>, kBands> pband;
    Mat<T> U(n, d);
    U.topRows(N) = ppan * params.embed_pan.cast<T>().transpose();
    for (int b = 0; b < kBands; ++b) {
        pband[static_cast<std::size_t>(b)] = sd.band_patches[static_cast<std::size_t>(b)].cast<T>();
        const Mat<T> y = pband[static_cast<std::size_t>(b)] * params.embed_band[static_cast<std::size_t>(b)].cast<T>().transpose();
        for (int i = 0; i < N; ++i) {
            U.row(band_node(i, b, N)) = y.row(i);
        }
    }

    // Edge weights clamp(cos, 0, 1) on the frozen supports.
    const Vec<T> unorm = U.rowwise().norm();
    std::array<std::vector<T>, kRelations> ecos;
    std::array<std::vector<T>, kRelations> ew;
    for (int r = 0; r < kRelations; ++r) {
        const auto& edges = topo.edges[static_cast<std::size_t>(r)];
        auto& cs = ecos[static_cast<std::size_t>(r)];
        auto& ws = ew[static_cast<std::size_t>(r)];
        cs.resize(edges.size());
        ws.resize(edges.size());
        for (std::size_t e = 0; e < edges.size(); ++e) {
            const auto [dst, src] = edges[e];
            const T nu = unorm(dst);
            const T nv = unorm(src);
            const T c = (nu > T(0) && nv > T(0)) ? T(U.row(dst).dot(U.row(src)) / (nu * nv)) : T(0);
            cs[e] = c;
            ws[e] = std::clamp(c, T(0), T(1));
        }
    }

    // Pattern entry weights: mean over participating relations.
    const std::size_t nlinks = topo.links.size();
    std::vector<T> lw(nlinks, T(0));
    for (std::size_t e = 0; e < nlinks; ++e) {
        const PatternLink& lk = topo.links[e];
        T s = 0;
        for (int r = 0; r < kRelations; ++r) {
            if (lk.edge[static_cast<std::size_t>(r)] >= 0) {
                s += ew[static_cast<std::size_t>(r)][static_cast<std::size_t>(lk.edge[static_cast<std::size_t>(r)])];
            }
        }
        lw[e] = s / T(lk.members);
    }

    const Vec<T> alpha = params.alpha.cast<T>();
    const Vec<T> beta = params.beta.cast<T>();

    // Local branch.
    const std::size_t nnz = topo.col.size();
    std::vector<T> ms;
    std::vector<T> ahat;
    Vec<T> deg;
    Vec<T> dinv;
    Mat<T> Z;
    Mat<T> KL;
    std::vector<Mat<T>> PL;
    if (use_local) {
        ms.assign(nnz, T(0));
        for (int i = 0; i < n; ++i) {
            ms[static_cast<std::size_t>(topo.diag[static_cast<std::size_t>(i)])] = T(1);
        }
        for (std::size_t e = 0; e < nlinks; ++e) {
            const PatternLink& lk = topo.links[e];
            const T a = alpha(lk.slot) * lw[e] / T(2);
            ms[static_cast<std::size_t>(lk.fwd)] += a;
            ms[static_cast<std::size_t>(lk.bwd)] += a;
        }
        deg = Vec<T>::Zero(n);
        dinv = Vec<T>::Zero(n);
        for (int i = 0; i < n; ++i) {
            for (int q = topo.row_ptr[static_cast<std::size_t>(i)]; q < topo.row_ptr[static_cast<std::size_t>(i) + 1]; ++q) {
                deg(i) += ms[static_cast<std::size_t>(q)];
            }
            dinv(i) = deg(i) > T(0) ? T(1) / sqrt(deg(i)) : T(0);
        }
        ahat.resize(nnz);
        Z = Mat<T>::Zero(n, d);
        for (int i = 0; i < n; ++i) {
            for (int q = topo.row_ptr[static_cast<std::size_t>(i)]; q < topo.row_ptr[static_cast<std::size_t>(i) + 1]; ++q) {
                const int j = topo.col[static_cast<std::size_t>(q)];
                const T a = ms[static_cast<std::size_t>(q)] * dinv(i) * dinv(j);
                ahat[static_cast<std::size_t>(q)] = a;
                Z.row(i) += a * U.row(j);
            }
        }
        PL = prefix_products<T>(params.w_local, d);
        KL = Mat<T>::Zero(d, d);
        for (int j = 1; j <= l; ++j) {
            KL += PL[static_cast<std::size_t>(j)];
        }
        KL /= T(l);
        out.local = Z * KL;
    } else {
        out.local = Mat<T>::Zero(n, d);
    }

    // Global branch. G = diag(1/r) B B^T is applied in factored form.
    Mat<T> B0;
    Mat<T> B;
    Mat<T> S;
    Vec<T> rinv;
    Mat<T> GU;
    std::vector<Mat<T>> PG;
    if (use_global) {
        B0 = Mat<T>::Zero(n, kMaxPatterns);
        for (std::size_t e = 0; e < nlinks; ++e) {
            B0(topo.links[e].row, topo.links[e].slot) += lw[e];
        }
        B = B0 * beta.asDiagonal();
        S = B * B.transpose();
        rinv = Vec<T>::Zero(n);
        for (int i = 0; i < n; ++i) {
            const T r = S.row(i).cwiseAbs().sum();
            rinv(i) = r > T(0) ? T(1) / r : T(0);
        }
        GU = rinv.asDiagonal() * (B * (B.transpose() * U));
        PG = prefix_products<T>(params.w_global, d);
        out.global = GU * PG[static_cast<std::size_t>(l)];
    } else {
        out.global = Mat<T>::Zero(n, d);
    }

    if (ablate == Ablation::Full) {
        out.fused = (out.local + out.global) / T(2);
    } else {
        out.fused = use_local ? out.local : out.global;
    }

    // Contrastive alignment of local and global representations (node-averaged InfoNCE).
    Mat<T> lhat;
    Mat<T> ghat;
    Vec<T> lnorm;
    Vec<T> gnorm;
    Mat<T> prob;
    if (use_cl) {
        lhat = normalize_rows<T>(out.local, lnorm);
        ghat = normalize_rows<T>(out.global, gnorm);
        prob = (lhat * ghat.transpose()) / tau;
        T acc = 0;
        for (int i = 0; i < n; ++i) {
            const T m = prob.row(i).maxCoeff();
            const T own = prob(i, i);
            T sum = 0;
            for (int j = 0; j < n; ++j) {
                const T e = exp(prob(i, j) - m);
                sum += e;
                prob(i, j) = e;
            }
            acc += m + log(sum) - own;
            prob.row(i) /= sum;
        }
        out.lcl = acc / T(n);
    }

    // Residual reconstruction head and overlap averaging.
    std::array<Mat<T>, kBands> F;
    std::vector<T> pre(npix * kBands, T(0));
    const PatchGrid& geo = sd.geometry;
    for (int b = 0; b < kBands; ++b) {
        Mat<T>& f = F[static_cast<std::size_t>(b)];
        f.resize(N, 2 * d);
        f.leftCols(d) = out.fused.topRows(N);
        for (int i = 0; i < N; ++i) {
            f.row(i).tail(d) = out.fused.row(band_node(i, b, N));
        }
        const Mat<T> V = f * params.recon[static_cast<std::size_t>(b)].cast<T>().transpose();
        for (int i = 0; i < N; ++i) {
            const int oy = geo.origin_y(i);
            const int ox = geo.origin_x(i);
            for (int q = 0; q < p2; ++q) {
                const std::size_t pix = static_cast<std::size_t>(oy + q / p) * W + static_cast<std::size_t>(ox + q % p);
                pre[pix * kBands + static_cast<std::size_t>(b)] += V(i, q);
            }
        }
    }
    const auto lrms_up = sd.lrms_up.data();
    out.pred.resize(pre.size());
    for (std::size_t pix = 0; pix < npix; ++pix) {
        for (int b = 0; b < kBands; ++b) {
            const std::size_t k = pix * kBands + static_cast<std::size_t>(b);
            pre[k] = pre[k] / T(sd.cover[pix]) + T(lrms_up[k]);
            out.pred[k] = std::clamp(pre[k], T(0), T(1));
        }
    }

    if (sd.gt) {
        const auto gt = sd.gt->data();
        T acc = 0;
        for (std::size_t k = 0; k < out.pred.size(); ++k) {
            acc += std::abs(out.pred[k] - T(gt[k]));
        }
        out.l1 = acc / T(out.pred.size());
        out.total = out.l1 + gamma * out.lcl;
        out.has_loss = true;
        if (!std::isfinite(static_cast<double>(out.total))) {
            throw DivergenceError("loss became non-finite");
        }
    }
    if (!out.fused.allFinite()) {
        throw DivergenceError("node representations became non-finite");
    }
    if (!want_grad) {
        return out;
    }

    // ---- reverse pass ----
    ModelParams& g = out.grad;
    g = params.zeros_like();
    const auto gt = sd.gt->data();
    const T inv_count = T(1) / T(out.pred.size());

    Mat<T> dH = Mat<T>::Zero(n, d);
    for (int b = 0; b < kBands; ++b) {
        Mat<T> dV(N, p2);
        for (int i = 0; i < N; ++i) {
            const int oy = geo.origin_y(i);
            const int ox = geo.origin_x(i);
            for (int q = 0; q < p2; ++q) {
                const std::size_t pix = static_cast<std::size_t>(oy + q / p) * W + static_cast<std::size_t>(ox + q % p);
                const std::size_t k = pix * kBands + static_cast<std::size_t>(b);
                const bool inside = pre[k] > T(0) && pre[k] < T(1);
                dV(i, q) = inside ? sign_of(out.pred[k] - T(gt[k])) * inv_count / T(sd.cover[pix]) : T(0);
            }
        }
        const Mat<T>& f = F[static_cast<std::size_t>(b)];
        g.recon[static_cast<std::size_t>(b)] = (dV.transpose() * f).template cast<double>();
        const Mat<T> dF = dV * params.recon[static_cast<std::size_t>(b)].cast<T>();
        dH.topRows(N) += dF.leftCols(d);
        for (int i = 0; i < N; ++i) {
            dH.row(band_node(i, b, N)) += dF.row(i).tail(d);
        }
    }

    Mat<T> dHL;
    Mat<T> dHG;
    if (ablate == Ablation::Full) {
        dHL = dH / T(2);
        dHG = dH / T(2);
    } else if (use_local) {
        dHL = dH;
    } else {
        dHG = dH;
    }

    if (use_cl) {
        Mat<T> ds = prob;
        ds.diagonal().array() -= T(1);
        ds *= gamma / (T(n) * tau);
        const Mat<T> dl = ds * ghat;
        const Mat<T> dg = ds.transpose() * lhat;
        dHL += normalize_rows_grad<T>(lhat, lnorm, dl);
        dHG += normalize_rows_grad<T>(ghat, gnorm, dg);
    }

    Mat<T> dU = Mat<T>::Zero(n, d);
    std::vector<T> dlw(nlinks, T(0));
    Vec<T> dalpha = Vec<T>::Zero(kMaxPatterns);
    Vec<T> dbeta = Vec<T>::Zero(kMaxPatterns);

    if (use_local) {
        const Mat<T> dK = Z.transpose() * dHL;
        const Mat<T> dZ = dHL * KL.transpose();
        chain_grad<T>(params.w_local, PL, dK, std::vector<T>(static_cast<std::size_t>(l), T(1) / T(l)), g.w_local);

        std::vector<T> dA(nnz);
        Vec<T> t = Vec<T>::Zero(n);
        for (int i = 0; i < n; ++i) {
            for (int q = topo.row_ptr[static_cast<std::size_t>(i)]; q < topo.row_ptr[static_cast<std::size_t>(i) + 1]; ++q) {
                const int j = topo.col[static_cast<std::size_t>(q)];
                const T a = ahat[static_cast<std::size_t>(q)];
                dU.row(j) += a * dZ.row(i);
                const T da = dZ.row(i).dot(U.row(j));
                dA[static_cast<std::size_t>(q)] = da;
                t(i) += da * a;
                t(j) += da * a;
            }
        }
        std::vector<T> dms(nnz);
        for (int i = 0; i < n; ++i) {
            const T ddeg = deg(i) > T(0) ? -t(i) / (T(2) * deg(i)) : T(0);
            for (int q = topo.row_ptr[static_cast<std::size_t>(i)]; q < topo.row_ptr[static_cast<std::size_t>(i) + 1]; ++q) {
                const int j = topo.col[static_cast<std::size_t>(q)];
                dms[static_cast<std::size_t>(q)] = dA[static_cast<std::size_t>(q)] * dinv(i) * dinv(j) + ddeg;
            }
        }
        for (std::size_t e = 0; e < nlinks; ++e) {
            const PatternLink& lk = topo.links[e];
            const T dm = (dms[static_cast<std::size_t>(lk.fwd)] + dms[static_cast<std::size_t>(lk.bwd)]) / T(2);
            dalpha(lk.slot) += dm * lw[e];
            dlw[e] += dm * alpha(lk.slot);
        }
    }

    if (use_global) {
        const Mat<T>& KG = PG[static_cast<std::size_t>(l)];
        const Mat<T> dK = GU.transpose() * dHG;
        std::vector<T> c(static_cast<std::size_t>(l), T(0));
        c.back() = T(1);
        chain_grad<T>(params.w_global, PG, dK, c, g.w_global);

        const Mat<T> Ea = rinv.asDiagonal() * (dHG * KG.transpose());
        dU += B * (B.transpose() * Ea);
        Vec<T> dr(n);
        for (int i = 0; i < n; ++i) {
            dr(i) = -Ea.row(i).dot(GU.row(i));
        }
        const Mat<T> sgn = S.unaryExpr([](T v) { return sign_of(v); });
        const Mat<T> dB = Ea * (U.transpose() * B) + U * (Ea.transpose() * B) + dr.asDiagonal() * (sgn * B) +
                          sgn * (dr.asDiagonal() * B);
        for (int m = 0; m < kMaxPatterns; ++m) {
            dbeta(m) = dB.col(m).dot(B0.col(m));
        }
        for (std::size_t e = 0; e < nlinks; ++e) {
            const PatternLink& lk = topo.links[e];
            dlw[e] += dB(lk.row, lk.slot) * beta(lk.slot);
        }
    }

    // Pattern weights -> relation edge weights -> node attributes.
    for (int r = 0; r < kRelations; ++r) {
        std::vector<T> dw(topo.edges[static_cast<std::size_t>(r)].size(), T(0));
        for (std::size_t e = 0; e < nlinks; ++e) {
            const PatternLink& lk = topo.links[e];
            const long idx = lk.edge[static_cast<std::size_t>(r)];
            if (idx >= 0) {
                dw[static_cast<std::size_t>(idx)] += dlw[e] / T(lk.members);
            }
        }
        const auto& edges = topo.edges[static_cast<std::size_t>(r)];
        const auto& cs = ecos[static_cast<std::size_t>(r)];
        for (std::size_t e = 0; e < edges.size(); ++e) {
            const T c = cs[e];
            if (dw[e] == T(0) || !(c > T(0) && c < T(1))) {
                continue;
            }
            const auto [dst, src] = edges[e];
            const T nu = unorm(dst);
            const T nv = unorm(src);
            const auto uh = U.row(dst) / nu;
            const auto vh = U.row(src) / nv;
            dU.row(dst) += dw[e] * (vh - c * uh) / nu;
            dU.row(src) += dw[e] * (uh - c * vh) / nv;
        }
    }

    g.embed_pan = (dU.topRows(N).transpose() * ppan).template cast<double>();
    for (int b = 0; b < kBands; ++b) {
        Mat<T> dy(N, d);
        for (int i = 0; i < N; ++i) {
            dy.row(i) = dU.row(band_node(i, b, N));
        }
        g.embed_band[static_cast<std::size_t>(b)] = (dy.transpose() * pband[static_cast<std::size_t>(b)]).template cast<double>();
    }
    g.alpha = dalpha.template cast<double>();
    g.beta = dbeta.template cast<double>();

    g.for_each([](const std::string& name, Eigen::Ref<const Eigen::MatrixXd> m) {
        if (!m.allFinite()) {
            throw DivergenceError("non-finite gradient for " + name);
        }
    });
    return out;
}

} // namespace hetss::detail
