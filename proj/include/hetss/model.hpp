#pragma once

#include "hetss/config.hpp"
#include "hetss/graph.hpp"
#include "hetss/image.hpp"
#include "hetss/patches.hpp"
#include "hetss/patterns.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <array>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace hetss {

/// All learnable tensors plus the hyperparameters they were built for. forward() and
/// the loss read patch, stride, k, tau and gamma from here; the config only selects the
/// ablation and precision. The same type carries gradients (see zeros_like).
struct ModelParams {
    int patch = 8;
    int stride = 4;
    int k = 8;
    double tau = 0.5;
    double gamma = 0.01;

    Eigen::MatrixXd embed_pan;                      // d x p^2
    std::array<Eigen::MatrixXd, kBands> embed_band; // d x p^2 each
    Eigen::VectorXd alpha;                          // one slot per pattern mask (7)
    Eigen::VectorXd beta;                           // one slot per pattern mask (7)
    std::vector<Eigen::MatrixXd> w_local;           // l matrices, d x d
    std::vector<Eigen::MatrixXd> w_global;          // l matrices, d x d
    std::array<Eigen::MatrixXd, kBands> recon;      // p^2 x 2d each

    int dim() const noexcept { return static_cast<int>(embed_pan.rows()); }
    int layers() const noexcept { return static_cast<int>(w_local.size()); }

    ModelParams zeros_like() const;
    bool all_finite() const;
    /// this += scale * other (shapes must match).
    void axpy(double scale, const ModelParams& other);

    /// Visits every tensor with a stable name ("embed_pan", "embed_band.2", "w_local.0", ...).
    void for_each(const std::function<void(const std::string&, Eigen::Ref<Eigen::MatrixXd>)>& fn);
    void for_each(const std::function<void(const std::string&, Eigen::Ref<const Eigen::MatrixXd>)>& fn) const;
    /// Total number of scalar entries.
    std::size_t size() const;
};

/// Fresh parameters: Glorot-uniform embeddings and GCN weights, alpha = 1/pattern_count,
/// beta = 1, zero reconstruction heads (the first forward pass reproduces bicubic upsampling).
ModelParams init_params(const TrainConfig& cfg, int pattern_count = kRelations);

struct NodeRepr {
    Eigen::MatrixXd local;
    Eigen::MatrixXd global;
    Eigen::MatrixXd fused;
};

/// sym_norm((M + M^T)/2 + I) with M = sum_m alpha[slot(m)] * A_m.
Eigen::SparseMatrix<double, Eigen::RowMajor> local_operator(const PatternSet& ps, const Eigen::VectorXd& alpha);

/// H_local = (1/l) sum_i A_hat U W_1...W_i.
Eigen::MatrixXd aggregate_local(const PatternSet& ps, const Eigen::MatrixXd& U, const Eigen::VectorXd& alpha,
                                const std::vector<Eigen::MatrixXd>& w_local);

/// Column m: row sums of pattern m, scaled by beta[slot(m)]. Shape node_count x pattern count.
Eigen::MatrixXd build_global_pattern_matrix(const PatternSet& ps, const Eigen::VectorXd& beta);

/// Row-L1-normalized B B^T; all-zero rows stay zero.
Eigen::MatrixXd global_similarity(const Eigen::MatrixXd& B);

/// H_global = A_global U W_1...W_l (last layer only).
Eigen::MatrixXd aggregate_global(const Eigen::MatrixXd& global_sim, const Eigen::MatrixXd& U,
                                 const std::vector<Eigen::MatrixXd>& w_global);

Eigen::MatrixXd fuse(const Eigen::MatrixXd& local, const Eigen::MatrixXd& global);

/// Residual head: block(i,b) = R_b [H_pan(i); H_band(i,b)], overlap-averaged per band,
/// output = clamp(residual + lrms_up, 0, 1).
Image reconstruct(const Eigen::MatrixXd& H, const PatchGrid& geometry, const std::array<Eigen::MatrixXd, kBands>& recon,
                  const Image& lrms_up);

struct ForwardResult {
    Image fused;
    NodeRepr repr;
    HetGraph graph;
    PatternSet patterns;
};

/// upsample -> patches -> embed -> HetSS graph -> patterns -> local/global aggregation -> fuse -> reconstruct.
/// Honors cfg.ablate (a single surviving branch becomes H).
ForwardResult forward(const ScenePair& scene, const ModelParams& params, const TrainConfig& cfg);

} // namespace hetss
