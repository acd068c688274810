#include "hetss/experiments.hpp"

#include "hetss/error.hpp"
#include "hetss/metrics.hpp"
#include "hetss/synth.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ostream>
#include <random>

namespace hetss {

GradCheckSetup make_grad_check_setup(std::uint64_t seed) {
    GradCheckSetup s;
    s.cfg.patch = 4;
    s.cfg.stride = 4;
    s.cfg.dim = 8;
    s.cfg.layers = 2;
    s.cfg.k = 1;
    s.cfg.seed = seed;
    s.cfg.precision = Precision::High;
    s.scene = toy_scene(seed);
    s.params = init_params(s.cfg);
    std::mt19937_64 rng(seed + 7);
    std::normal_distribution<double> nd(0.0, 0.05);
    for (auto& r : s.params.recon) {
        r = Eigen::MatrixXd::NullaryExpr(r.rows(), r.cols(), [&] { return nd(rng); });
    }
    return s;
}

std::vector<double> window_means(const std::vector<TrainLogRow>& log, int window) {
    if (window < 1) {
        throw ValidationError("window must be >= 1");
    }
    std::vector<double> out;
    for (std::size_t start = 0; start + static_cast<std::size_t>(window) <= log.size(); start += window) {
        double s = 0.0;
        for (int i = 0; i < window; ++i) {
            s += log[start + i].loss.total;
        }
        out.push_back(s / window);
    }
    return out;
}

double nonincreasing_fraction(const std::vector<double>& values) {
    if (values.size() < 2) {
        return 1.0;
    }
    std::size_t ok = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        ok += values[i] <= values[i - 1] ? 1 : 0;
    }
    return static_cast<double>(ok) / static_cast<double>(values.size() - 1);
}

OverfitResult run_overfit(const ScenePair& scene, const TrainConfig& cfg, int window) {
    if (!scene.gt) {
        throw ValidationError("overfit scene needs gt");
    }
    OverfitResult r;
    r.baseline_psnr = psnr(forward(scene, init_params(cfg), cfg).fused, *scene.gt);
    const auto t0 = std::chrono::steady_clock::now();
    TrainResult tr = train({scene}, cfg);
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const Image fused = forward(scene, tr.params, cfg).fused;
    r.final_psnr = psnr(fused, *scene.gt);
    r.final_l1 = loss_l1(fused, *scene.gt);
    r.window_means = window_means(tr.log, window);
    r.nonincreasing_fraction = nonincreasing_fraction(r.window_means);
    r.log = std::move(tr.log);
    return r;
}

std::vector<AblationRow> run_ablation(const ScenePair& scene, const TrainConfig& cfg) {
    std::vector<AblationRow> rows;
    for (Ablation a : {Ablation::Full, Ablation::LocalOnly, Ablation::GlobalOnly}) {
        TrainConfig c = cfg;
        c.ablate = a;
        const OverfitResult r = run_overfit(scene, c);
        rows.push_back({a, r.final_l1, r.final_psnr});
    }
    return rows;
}

bool ablation_direction_holds(const std::vector<AblationRow>& rows, double slack) {
    double full = -1.0;
    double best_single = -1.0;
    for (const AblationRow& r : rows) {
        if (r.ablate == Ablation::Full) {
            full = r.final_l1;
        } else {
            best_single = best_single < 0.0 ? r.final_l1 : std::min(best_single, r.final_l1);
        }
    }
    if (full < 0.0 || best_single < 0.0) {
        throw ValidationError("ablation table needs the full row and at least one single-branch row");
    }
    return full <= best_single * (1.0 + slack);
}

void print_ablation_table(std::ostream& out, const std::vector<AblationRow>& rows) {
    out << "config,final_l1,final_psnr\n";
    char buf[128];
    for (const AblationRow& r : rows) {
        std::snprintf(buf, sizeof buf, "%s,%.6f,%.4f\n", to_string(r.ablate).c_str(), r.final_l1, r.final_psnr);
        out << buf;
    }
}

} // namespace hetss
