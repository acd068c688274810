#pragma once

#include "hetss/image.hpp"

#include <vector>

namespace hetss {

/// Normalized 1-D Gaussian taps, radius ceil(3 sigma). Index `radius` is the center.
std::vector<double> gaussian_kernel(double sigma);

/// Maps any integer coordinate into [0, n) by mirror reflection with edge repetition
/// (... 1 0 | 0 1 2 ... n-1 | n-1 n-2 ...). Works for offsets larger than n.
int reflect_index(int i, int n) noexcept;

/// Separable Gaussian blur with reflective borders.
Image gaussian_blur(const Image& img, double sigma);

/// Keeps pixel (y*scale + scale/2, x*scale + scale/2) of every scale x scale cell.
Image decimate(const Image& img, int scale);

/// Wald-protocol reduction: decimate(gaussian_blur(img, scale/2), scale).
Image wald_reduce(const Image& img, int scale);

/// Builds a reduced-resolution training pair from an HR-MS reference and a co-registered PAN
/// of the same size: lrms = wald_reduce(gt), pan = pan_hr, gt retained.
ScenePair wald_degrade(const Image& gt, const Image& pan_hr, int scale);

/// Keys cubic convolution (a = -0.5), pixel-center aligned, replicated borders, clamped to [0,1].
Image upsample_bicubic(const Image& img, int scale);

/// The cubic convolution kernel used by upsample_bicubic.
double cubic_weight(double t) noexcept;

} // namespace hetss
