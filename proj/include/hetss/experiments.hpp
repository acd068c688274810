#pragma once

#include "hetss/config.hpp"
#include "hetss/image.hpp"
#include "hetss/model.hpp"
#include "hetss/training.hpp"

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace hetss {

/// Two-patch toy problem for gradient checks: p = 4, d = 8, l = 2, k = 1, high precision,
/// reconstruction heads drawn from N(0, 0.05^2) so every branch receives gradient.
struct GradCheckSetup {
    ScenePair scene;
    ModelParams params;
    TrainConfig cfg;
};

GradCheckSetup make_grad_check_setup(std::uint64_t seed = 0);

struct OverfitResult {
    double baseline_psnr = 0.0; // zero reconstruction head, i.e. bicubic upsampling
    double final_psnr = 0.0;
    double final_l1 = 0.0;
    std::vector<double> window_means;
    double nonincreasing_fraction = 0.0; // over consecutive window pairs
    std::vector<TrainLogRow> log;
    double seconds = 0.0;
};

/// Means of consecutive `window`-row blocks of total loss (a trailing partial block is dropped).
std::vector<double> window_means(const std::vector<TrainLogRow>& log, int window);

/// Fraction of consecutive pairs with next <= previous; 1 when there are fewer than two values.
double nonincreasing_fraction(const std::vector<double>& values);

/// Trains on a single scene from init_params(cfg) and scores the result against its gt.
OverfitResult run_overfit(const ScenePair& scene, const TrainConfig& cfg, int window = 50);

struct AblationRow {
    Ablation ablate = Ablation::Full;
    double final_l1 = 0.0;
    double final_psnr = 0.0;
};

/// One overfit run per configuration (full, local-only, global-only) with otherwise identical settings.
std::vector<AblationRow> run_ablation(const ScenePair& scene, const TrainConfig& cfg);

/// Passes when full <= min(local-only, global-only) * (1 + slack).
bool ablation_direction_holds(const std::vector<AblationRow>& rows, double slack = 0.05);

void print_ablation_table(std::ostream& out, const std::vector<AblationRow>& rows);

} // namespace hetss
