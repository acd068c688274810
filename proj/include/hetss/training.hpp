#pragma once

#include "hetss/config.hpp"
#include "hetss/error.hpp"
#include "hetss/image.hpp"
#include "hetss/model.hpp"

#include <Eigen/Dense>

#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace hetss {

struct LossBreakdown {
    double l1 = 0.0;
    double lcl = 0.0;
    double total = 0.0;
    double lr_used = 0.0;
};

/// Mean absolute error over every pixel and channel.
double loss_l1(const Image& fused, const Image& gt);

/// Node-averaged InfoNCE between local and global representations with cosine similarity.
double loss_contrastive(const Eigen::MatrixXd& local, const Eigen::MatrixXd& global, double tau);

/// l1 + cfg.gamma * lcl, with lcl computed at cfg.tau.
LossBreakdown total_loss(const Image& fused, const Image& gt, const Eigen::MatrixXd& local,
                         const Eigen::MatrixXd& global, const TrainConfig& cfg);

struct Gradient {
    LossBreakdown loss;
    ModelParams grads;
};

/// Exact reverse-mode gradient of the total loss for one scene (which must carry gt).
/// Neighbor selection and pattern supports are held fixed at the current parameters.
/// Runs in long double when cfg.precision is High.
Gradient backward(const ScenePair& scene, const ModelParams& params, const TrainConfig& cfg);

/// One scalar of one tensor: `tensor` is a for_each name, `index` is column-major.
struct ParamCoord {
    std::string tensor;
    Eigen::Index index = 0;
};

double param_value(const ModelParams& params, const ParamCoord& coord);
void set_param(ModelParams& params, const ParamCoord& coord, double value);
std::vector<ParamCoord> all_coords(const ModelParams& params);

/// Central difference (f(x+h) - f(x-h)) / (2h).
long double central_difference(const std::function<long double(long double)>& f, long double x, long double h);

/// Loss with the discrete structure frozen at `baseline`; reusable across many evaluations.
class FrozenLoss {
public:
    FrozenLoss(const ScenePair& scene, const ModelParams& baseline, const TrainConfig& cfg);
    ~FrozenLoss();
    FrozenLoss(FrozenLoss&&) noexcept;
    FrozenLoss& operator=(FrozenLoss&&) noexcept;

    long double operator()(const ModelParams& params) const;

    /// Central difference along `coord` with step eps * max(1, |theta|).
    double derivative(const ModelParams& params, const ParamCoord& coord, double eps) const;

    /// Analytic gradient at `params` under the frozen structure.
    ModelParams gradient(const ModelParams& params) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Convenience wrapper: FrozenLoss(scene, params, cfg).derivative(params, coord, eps).
double finite_diff_grad(const ScenePair& scene, const ModelParams& params, const TrainConfig& cfg,
                        const ParamCoord& coord, double eps);

struct GradCheckRow {
    std::string group;
    std::size_t coords = 0;
    double max_rel = 0.0;
    double max_abs = 0.0;
};

/// |analytic - fd| / max(|analytic|, |fd|, floor).
double relative_error(double analytic, double fd, double floor = 1e-8);

/// Compares backward() with central differences on every coordinate, grouped by tensor family
/// (embed_pan, embed_band, alpha, beta, w_local, w_global, recon).
std::vector<GradCheckRow> grad_check(const ScenePair& scene, const ModelParams& params, const TrainConfig& cfg,
                                     double eps = 1e-4);

struct AdamState {
    ModelParams m;
    ModelParams v;
    long t = 0;
};

AdamState adam_init(const ModelParams& params);

/// Bias-corrected Adam update with cfg's betas and epsilon.
void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, double lr, const TrainConfig& cfg);

/// lr0 * decay^floor(iter / decay_every).
double lr_schedule(long iter, const TrainConfig& cfg);

struct TrainLogRow {
    int iter = 0;
    LossBreakdown loss;
};

struct TrainCallbacks {
    std::function<void(const TrainLogRow&)> on_iter;
    /// Called every cfg.checkpoint_every iterations and once at the end.
    std::function<void(int iter, const ModelParams&)> on_checkpoint;
};

struct TrainResult {
    ModelParams params;
    std::vector<TrainLogRow> log;
};

/// Raised when training produces a non-finite loss, gradient or update.
class TrainingDiverged : public DivergenceError {
public:
    TrainingDiverged(const std::string& what, int iter, ModelParams last_good, std::vector<TrainLogRow> log)
        : DivergenceError(what), iter_(iter), last_good_(std::move(last_good)), log_(std::move(log)) {}

    int iter() const noexcept { return iter_; }
    const ModelParams& last_good() const noexcept { return last_good_; }
    const std::vector<TrainLogRow>& log() const noexcept { return log_; }

private:
    int iter_;
    ModelParams last_good_;
    std::vector<TrainLogRow> log_;
};

/// Adam on batch-averaged gradients with seeded shuffling; every scene must carry gt.
/// Starts from `init` when given, otherwise init_params(cfg).
TrainResult train(const std::vector<ScenePair>& dataset, const TrainConfig& cfg, const TrainCallbacks& callbacks = {},
                  const std::optional<ModelParams>& init = std::nullopt);

/// CSV with header `iter,l1,lcl,total,lr`.
void write_train_log(std::ostream& out, const std::vector<TrainLogRow>& log);

} // namespace hetss
