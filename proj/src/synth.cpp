#include "hetss/synth.hpp"

#include "hetss/error.hpp"
#include "hetss/resample.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace hetss {

namespace {

using Field = std::vector<double>;

void add_blobs(Field& f, int size, std::mt19937_64& rng, int count, double amp_lo, double amp_hi) {
    std::uniform_real_distribution<double> pos(0.0, size);
    std::uniform_real_distribution<double> sig(size / 12.0, size / 4.0);
    std::uniform_real_distribution<double> amp(amp_lo, amp_hi);
    std::bernoulli_distribution neg(0.35);
    for (int b = 0; b < count; ++b) {
        const double cy = pos(rng);
        const double cx = pos(rng);
        const double s = sig(rng);
        const double a = neg(rng) ? -amp(rng) : amp(rng);
        for (int y = 0; y < size; ++y) {
            for (int x = 0; x < size; ++x) {
                const double dy = y - cy;
                const double dx = x - cx;
                f[static_cast<std::size_t>(y) * size + x] += a * std::exp(-(dy * dy + dx * dx) / (2.0 * s * s));
            }
        }
    }
}

void add_rects(Field& f, int size, std::mt19937_64& rng, int count, int min_side, int max_side, double amp_lo,
               double amp_hi) {
    std::uniform_int_distribution<int> side(min_side, max_side);
    std::uniform_real_distribution<double> amp(amp_lo, amp_hi);
    std::bernoulli_distribution neg(0.4);
    for (int r = 0; r < count; ++r) {
        const int h = side(rng);
        const int w = side(rng);
        const int y0 = std::uniform_int_distribution<int>(0, std::max(0, size - h))(rng);
        const int x0 = std::uniform_int_distribution<int>(0, std::max(0, size - w))(rng);
        const double a = neg(rng) ? -amp(rng) : amp(rng);
        for (int y = y0; y < std::min(size, y0 + h); ++y) {
            for (int x = x0; x < std::min(size, x0 + w); ++x) {
                f[static_cast<std::size_t>(y) * size + x] += a;
            }
        }
    }
}

} // namespace

Image band_mean(const Image& img) {
    Image out(img.height(), img.width(), 1);
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            double s = 0.0;
            for (int c = 0; c < img.channels(); ++c) {
                s += img.at(y, x, c);
            }
            out.at(y, x) = static_cast<float>(s / img.channels());
        }
    }
    return out;
}

ScenePair synth_scene(std::uint64_t seed, int size) {
    if (size < 4 || size % 4 != 0) {
        throw ValidationError("synthetic scene size must be a positive multiple of 4");
    }
    std::mt19937_64 rng(seed);
    const std::size_t npix = static_cast<std::size_t>(size) * size;

    Field common(npix, 0.4);
    add_blobs(common, size, rng, 6, 0.08, 0.22);
    add_rects(common, size, rng, 5, std::max(2, size / 8), std::max(2, size / 3), 0.06, 0.16);
    // Small structures carry most of the detail lost by the reduction.
    add_rects(common, size, rng, std::max(8, size * size / 32), 1, 3, 0.1, 0.25);
    {
        std::uniform_real_distribution<double> freq(0.9, 1.8);
        std::uniform_real_distribution<double> phase(0.0, 6.283185307179586);
        for (int t = 0; t < 3; ++t) {
            const double fy = freq(rng);
            const double fx = freq(rng);
            const double ph = phase(rng);
            for (int y = 0; y < size; ++y) {
                for (int x = 0; x < size; ++x) {
                    common[static_cast<std::size_t>(y) * size + x] += 0.02 * std::sin(fy * y + fx * x + ph);
                }
            }
        }
    }

    Image gt(size, size, 4);
    std::uniform_real_distribution<double> gain(0.95, 1.05);
    std::uniform_real_distribution<double> offset(-0.02, 0.02);
    for (int b = 0; b < 4; ++b) {
        const double g = gain(rng);
        const double o = offset(rng);
        Field own(npix, 0.0);
        add_blobs(own, size, rng, 3, 0.03, 0.08);
        for (int y = 0; y < size; ++y) {
            for (int x = 0; x < size; ++x) {
                const std::size_t k = static_cast<std::size_t>(y) * size + x;
                const double v = o + g * common[k] + own[k];
                gt.at(y, x, b) = static_cast<float>(std::clamp(v, 0.0, 1.0));
            }
        }
    }
    return wald_degrade(gt, band_mean(gt), 4);
}

ScenePair toy_scene(std::uint64_t seed) {
    const ScenePair big = synth_scene(seed, 32);
    Image gt(4, 8, 4);
    for (int y = 0; y < 4; ++y) {
        for (int x = 0; x < 8; ++x) {
            for (int c = 0; c < 4; ++c) {
                gt.at(y, x, c) = big.gt->at(12 + y, 8 + x, c);
            }
        }
    }
    return wald_degrade(gt, band_mean(gt), 4);
}

} // namespace hetss
