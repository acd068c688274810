#include "hetss/training.hpp"

#include "pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <ostream>
#include <random>

namespace hetss {

namespace {

using detail::Evaluation;
using detail::SceneData;
using detail::Topology;

struct View {
    double* data;
    Eigen::Index size;
};

std::vector<View> views(ModelParams& p) {
    std::vector<View> out;
    p.for_each([&](const std::string&, Eigen::Ref<Eigen::MatrixXd> m) { out.push_back({m.data(), m.size()}); });
    return out;
}

void check_same_shape(const Image& a, const Image& b) {
    if (!a.same_shape(b)) {
        throw ValidationError("images must have the same shape");
    }
}

LossBreakdown breakdown_of(double l1, double lcl, double gamma) {
    LossBreakdown lb;
    lb.l1 = l1;
    lb.lcl = lcl;
    lb.total = l1 + gamma * lcl;
    return lb;
}

} // namespace

double loss_l1(const Image& fused, const Image& gt) {
    check_same_shape(fused, gt);
    if (fused.empty()) {
        throw ValidationError("empty image");
    }
    const auto a = fused.data();
    const auto b = gt.data();
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        acc += std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i]));
    }
    return acc / static_cast<double>(a.size());
}

double loss_contrastive(const Eigen::MatrixXd& local, const Eigen::MatrixXd& global, double tau) {
    if (!(tau > 0.0)) {
        throw ValidationError("tau must be positive");
    }
    if (local.rows() != global.rows() || local.cols() != global.cols()) {
        throw ValidationError("contrastive loss: shape mismatch");
    }
    if (local.rows() < 2) {
        throw ValidationError("contrastive loss needs at least two nodes");
    }
    detail::Vec<double> ln;
    detail::Vec<double> gn;
    const Eigen::MatrixXd lh = detail::normalize_rows<double>(local, ln);
    const Eigen::MatrixXd gh = detail::normalize_rows<double>(global, gn);
    const Eigen::MatrixXd s = (lh * gh.transpose()) / tau;
    double acc = 0.0;
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
        const double m = s.row(i).maxCoeff();
        acc += m + std::log((s.row(i).array() - m).exp().sum()) - s(i, i);
    }
    return acc / static_cast<double>(s.rows());
}

LossBreakdown total_loss(const Image& fused, const Image& gt, const Eigen::MatrixXd& local,
                         const Eigen::MatrixXd& global, const TrainConfig& cfg) {
    return breakdown_of(loss_l1(fused, gt), loss_contrastive(local, global, cfg.tau), cfg.gamma);
}

namespace {

// Loss and gradient for one prepared scene at the configured precision.
Gradient scene_gradient(const SceneData& sd, const ModelParams& params, const TrainConfig& cfg) {
    const detail::Structure st = detail::build_structure(sd, params);
    Gradient g;
    if (cfg.precision == Precision::High) {
        auto ev = detail::evaluate<long double>(sd, params, cfg.ablate, st.topo, true);
        g.loss = breakdown_of(static_cast<double>(ev.l1), static_cast<double>(ev.lcl), params.gamma);
        g.loss.total = static_cast<double>(ev.total);
        g.grads = std::move(ev.grad);
    } else {
        auto ev = detail::evaluate<double>(sd, params, cfg.ablate, st.topo, true);
        g.loss = breakdown_of(ev.l1, ev.lcl, params.gamma);
        g.loss.total = ev.total;
        g.grads = std::move(ev.grad);
    }
    return g;
}

} // namespace

Gradient backward(const ScenePair& scene, const ModelParams& params, const TrainConfig& cfg) {
    if (!scene.gt) {
        throw ValidationError("backward needs a scene with gt");
    }
    return scene_gradient(detail::prepare_scene(scene, params.patch, params.stride), params, cfg);
}

double param_value(const ModelParams& params, const ParamCoord& coord) {
    double v = 0.0;
    bool found = false;
    params.for_each([&](const std::string& name, Eigen::Ref<const Eigen::MatrixXd> m) {
        if (name == coord.tensor) {
            if (coord.index < 0 || coord.index >= m.size()) {
                throw ValidationError("parameter index out of range for " + name);
            }
            v = m.data()[coord.index];
            found = true;
        }
    });
    if (!found) {
        throw ValidationError("unknown parameter tensor " + coord.tensor);
    }
    return v;
}

void set_param(ModelParams& params, const ParamCoord& coord, double value) {
    bool found = false;
    params.for_each([&](const std::string& name, Eigen::Ref<Eigen::MatrixXd> m) {
        if (name == coord.tensor) {
            if (coord.index < 0 || coord.index >= m.size()) {
                throw ValidationError("parameter index out of range for " + name);
            }
            m.data()[coord.index] = value;
            found = true;
        }
    });
    if (!found) {
        throw ValidationError("unknown parameter tensor " + coord.tensor);
    }
}

std::vector<ParamCoord> all_coords(const ModelParams& params) {
    std::vector<ParamCoord> out;
    params.for_each([&](const std::string& name, Eigen::Ref<const Eigen::MatrixXd> m) {
        for (Eigen::Index i = 0; i < m.size(); ++i) {
            out.push_back({name, i});
        }
    });
    return out;
}

long double central_difference(const std::function<long double(long double)>& f, long double x, long double h) {
    return (f(x + h) - f(x - h)) / (2 * h);
}

struct FrozenLoss::Impl {
    SceneData sd;
    Topology topo;
    Ablation ablate = Ablation::Full;
    Precision precision = Precision::Standard;

    long double loss(const ModelParams& p) const {
        if (precision == Precision::High) {
            return detail::evaluate<long double>(sd, p, ablate, topo, false).total;
        }
        return detail::evaluate<double>(sd, p, ablate, topo, false).total;
    }
};

FrozenLoss::FrozenLoss(const ScenePair& scene, const ModelParams& baseline, const TrainConfig& cfg)
    : impl_(std::make_unique<Impl>()) {
    if (!scene.gt) {
        throw ValidationError("finite differences need a scene with gt");
    }
    impl_->sd = detail::prepare_scene(scene, baseline.patch, baseline.stride);
    impl_->topo = detail::build_structure(impl_->sd, baseline).topo;
    impl_->ablate = cfg.ablate;
    impl_->precision = cfg.precision;
}

FrozenLoss::~FrozenLoss() = default;
FrozenLoss::FrozenLoss(FrozenLoss&&) noexcept = default;
FrozenLoss& FrozenLoss::operator=(FrozenLoss&&) noexcept = default;

long double FrozenLoss::operator()(const ModelParams& params) const {
    return impl_->loss(params);
}

double FrozenLoss::derivative(const ModelParams& params, const ParamCoord& coord, double eps) const {
    const double theta = param_value(params, coord);
    const double h = eps * std::max(1.0, std::abs(theta));
    const double up = theta + h;
    const double down = theta - h;
    ModelParams probe = params;
    set_param(probe, coord, up);
    const long double lp = impl_->loss(probe);
    set_param(probe, coord, down);
    const long double lm = impl_->loss(probe);
    // The realized step, not 2h: theta +- h are rounded to double.
    return static_cast<double>((lp - lm) / (static_cast<long double>(up) - static_cast<long double>(down)));
}

ModelParams FrozenLoss::gradient(const ModelParams& params) const {
    if (impl_->precision == Precision::High) {
        return detail::evaluate<long double>(impl_->sd, params, impl_->ablate, impl_->topo, true).grad;
    }
    return detail::evaluate<double>(impl_->sd, params, impl_->ablate, impl_->topo, true).grad;
}

double finite_diff_grad(const ScenePair& scene, const ModelParams& params, const TrainConfig& cfg,
                        const ParamCoord& coord, double eps) {
    return FrozenLoss(scene, params, cfg).derivative(params, coord, eps);
}

double relative_error(double analytic, double fd, double floor) {
    const double scale = std::max({std::abs(analytic), std::abs(fd), floor});
    return std::abs(analytic - fd) / scale;
}

std::vector<GradCheckRow> grad_check(const ScenePair& scene, const ModelParams& params, const TrainConfig& cfg,
                                     double eps) {
    const FrozenLoss fl(scene, params, cfg);
    const ModelParams analytic = fl.gradient(params);
    std::vector<GradCheckRow> rows;
    for (const ParamCoord& c : all_coords(params)) {
        const std::string group = c.tensor.substr(0, c.tensor.find('.'));
        if (rows.empty() || rows.back().group != group) {
            rows.push_back({group, 0, 0.0, 0.0});
        }
        const double a = param_value(analytic, c);
        const double f = fl.derivative(params, c, eps);
        GradCheckRow& row = rows.back();
        ++row.coords;
        row.max_rel = std::max(row.max_rel, relative_error(a, f));
        row.max_abs = std::max(row.max_abs, std::abs(a - f));
    }
    return rows;
}

AdamState adam_init(const ModelParams& params) {
    AdamState s;
    s.m = params.zeros_like();
    s.v = params.zeros_like();
    return s;
}

void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, double lr, const TrainConfig& cfg) {
    auto p = views(params);
    const auto g = views(const_cast<ModelParams&>(grads));
    auto m = views(state.m);
    auto v = views(state.v);
    if (g.size() != p.size() || m.size() != p.size() || v.size() != p.size()) {
        throw ValidationError("adam_step: parameter layout mismatch");
    }
    ++state.t;
    const double b1 = cfg.adam_beta1;
    const double b2 = cfg.adam_beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
    for (std::size_t k = 0; k < p.size(); ++k) {
        if (g[k].size != p[k].size || m[k].size != p[k].size || v[k].size != p[k].size) {
            throw ValidationError("adam_step: shape mismatch");
        }
        for (Eigen::Index i = 0; i < p[k].size; ++i) {
            const double gi = g[k].data[i];
            double& mi = m[k].data[i];
            double& vi = v[k].data[i];
            mi = b1 * mi + (1.0 - b1) * gi;
            vi = b2 * vi + (1.0 - b2) * gi * gi;
            const double step = lr * (mi / c1) / (std::sqrt(vi / c2) + cfg.adam_eps);
            if (!std::isfinite(step)) {
                throw DivergenceError("non-finite Adam update");
            }
            p[k].data[i] -= step;
        }
    }
}

double lr_schedule(long iter, const TrainConfig& cfg) {
    if (iter < 0) {
        throw ValidationError("iteration must be >= 0");
    }
    return cfg.lr0 * std::pow(cfg.decay, static_cast<double>(iter / cfg.decay_every));
}

TrainResult train(const std::vector<ScenePair>& dataset, const TrainConfig& cfg, const TrainCallbacks& callbacks,
                  const std::optional<ModelParams>& init) {
    cfg.validate();
    if (dataset.empty()) {
        throw ValidationError("training needs at least one scene");
    }
    TrainResult res;
    res.params = init ? *init : init_params(cfg);
    ModelParams& params = res.params;

    std::vector<SceneData> scenes;
    scenes.reserve(dataset.size());
    for (const ScenePair& s : dataset) {
        if (!s.gt) {
            throw ValidationError("every training scene needs gt");
        }
        scenes.push_back(detail::prepare_scene(s, params.patch, params.stride));
    }

    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> order(scenes.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t cursor = 0;

    AdamState state = adam_init(params);
    for (int it = 0; it < cfg.iters; ++it) {
        std::map<std::size_t, int> picks;
        for (int b = 0; b < cfg.batch; ++b) {
            if (cursor == order.size()) {
                std::shuffle(order.begin(), order.end(), rng);
                cursor = 0;
            }
            ++picks[order[cursor++]];
        }

        const ModelParams before = params;
        TrainLogRow row;
        row.iter = it;
        try {
            ModelParams grads = params.zeros_like();
            for (const auto& [idx, count] : picks) {
                const Gradient g = scene_gradient(scenes[idx], params, cfg);
                const double w = static_cast<double>(count) / cfg.batch;
                grads.axpy(w, g.grads);
                row.loss.l1 += w * g.loss.l1;
                row.loss.lcl += w * g.loss.lcl;
            }
            row.loss.total = row.loss.l1 + params.gamma * row.loss.lcl;
            row.loss.lr_used = lr_schedule(it, cfg);
            if (!std::isfinite(row.loss.total)) {
                throw DivergenceError("loss became non-finite");
            }
            adam_step(params, grads, state, row.loss.lr_used, cfg);
        } catch (const DivergenceError& e) {
            throw TrainingDiverged(std::string(e.what()) + " at iteration " + std::to_string(it), it, before, res.log);
        }

        res.log.push_back(row);
        if (callbacks.on_iter) {
            callbacks.on_iter(row);
        }
        if (callbacks.on_checkpoint && ((it + 1) % cfg.checkpoint_every == 0) && it + 1 != cfg.iters) {
            callbacks.on_checkpoint(it + 1, params);
        }
    }
    if (callbacks.on_checkpoint) {
        callbacks.on_checkpoint(cfg.iters, params);
    }
    return res;
}

void write_train_log(std::ostream& out, const std::vector<TrainLogRow>& log) {
    out << "iter,l1,lcl,total,lr\n";
    char buf[160];
    for (const TrainLogRow& r : log) {
        std::snprintf(buf, sizeof buf, "%d,%.10g,%.10g,%.10g,%.10g\n", r.iter, r.loss.l1, r.loss.lcl, r.loss.total,
                      r.loss.lr_used);
        out << buf;
    }
}

} // namespace hetss
