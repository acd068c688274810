#pragma once

#include "hetss/image.hpp"

#include <string>
#include <vector>

namespace hetss {

inline constexpr double kPsnrCap = 99.0;

struct MetricReport {
    double psnr = 0.0;
    double ssim = 0.0;
    double sam = 0.0; // radians
    double ergas = 0.0;
    double scc = 0.0;
};

struct NoRefReport {
    double d_lambda = 0.0;
    double d_s = 0.0;
    double qnr = 0.0;
};

/// 10 log10(1 / mean_b mse_b), capped at 99 dB.
double psnr(const Image& fused, const Image& gt);

/// Gaussian-window SSIM (11x11, sigma 1.5, C1 = 0.01^2, C2 = 0.03^2) over the valid
/// region, averaged over bands. The window shrinks to the largest odd size that fits.
double ssim(const Image& a, const Image& b);

/// Mean spectral angle in radians; pixels where either spectrum is zero contribute 0.
double sam(const Image& fused, const Image& gt);

/// 100/scale * sqrt(mean_b(rmse_b^2 / mean(gt_b)^2)).
double ergas(const Image& fused, const Image& gt, int scale = 4);

/// Mean per-band Pearson correlation of 3x3 Laplacian-filtered images; flat bands score 0.
double scc(const Image& fused, const Image& gt);

/// Universal image quality index of two single-channel images, averaged over all
/// block x block windows at step 1 (block clipped to the image size).
double q_index(const Image& a, const Image& b, int block = 32);

MetricReport full_reference(const Image& fused, const Image& gt, int scale = 4);

/// D_lambda, D_s with p = q = 1 and QNR = (1 - D_lambda)(1 - D_s).
NoRefReport no_reference(const Image& fused, const Image& pan, const Image& lrms, int scale = 4);

/// Normalized intensity histogram of a single-channel image over [0,1].
std::vector<double> histogram(const Image& img, int bins);

/// 1-D earth mover's distance in bin units: L1 distance of the cumulative sums.
double emd_1d(const std::vector<double>& h1, const std::vector<double>& h2);

/// 1 / (1 + emd).
inline double emd_coefficient(double emd) { return 1.0 / (1.0 + emd); }

struct PriorRow {
    std::string kind;  // pan-gt, lrms-gt, lrms-lrms, gt-gt
    std::string first; // e.g. "pan", "lrms.2", "gt.0"
    std::string second;
    double emd = 0.0;
    double coefficient = 0.0;
};

struct PriorReport {
    std::vector<PriorRow> rows;
    double mean_pan_gt = 0.0;
    double mean_lrms_gt = 0.0;
};

/// Histogram correlation table: PAN vs each GT band, upsampled LR-MS band vs the same GT
/// band, and adjacent band pairs within LR-MS and within GT.
PriorReport prior_analysis(const ScenePair& scene, int bins = 64);

} // namespace hetss
