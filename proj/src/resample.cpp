#include "hetss/resample.hpp"

#include "hetss/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace hetss {

std::vector<double> gaussian_kernel(double sigma) {
    if (!(sigma > 0.0)) {
        throw ValidationError("gaussian sigma must be positive");
    }
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> taps(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
        taps[static_cast<std::size_t>(i + radius)] = v;
        sum += v;
    }
    for (double& v : taps) {
        v /= sum;
    }
    return taps;
}

int reflect_index(int i, int n) noexcept {
    if (n == 1) {
        return 0;
    }
    const int period = 2 * n;
    int m = i % period;
    if (m < 0) {
        m += period;
    }
    return m < n ? m : period - 1 - m;
}

Image gaussian_blur(const Image& img, double sigma) {
    const auto taps = gaussian_kernel(sigma);
    const int radius = static_cast<int>(taps.size() / 2);
    const int h = img.height();
    const int w = img.width();
    const int ch = img.channels();

    std::vector<double> tmp(img.size(), 0.0);
    auto tidx = [&](int y, int x, int c) {
        return (static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)) * ch + static_cast<std::size_t>(c);
    };
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < ch; ++c) {
                double acc = 0.0;
                for (int k = -radius; k <= radius; ++k) {
                    acc += taps[static_cast<std::size_t>(k + radius)] * img.at(y, reflect_index(x + k, w), c);
                }
                tmp[tidx(y, x, c)] = acc;
            }
        }
    }
    Image out(h, w, ch);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < ch; ++c) {
                double acc = 0.0;
                for (int k = -radius; k <= radius; ++k) {
                    acc += taps[static_cast<std::size_t>(k + radius)] * tmp[tidx(reflect_index(y + k, h), x, c)];
                }
                out.at(y, x, c) = static_cast<float>(acc);
            }
        }
    }
    return out;
}

Image decimate(const Image& img, int scale) {
    if (scale < 1 || img.height() % scale != 0 || img.width() % scale != 0) {
        throw ValidationError("image size must be divisible by the scale");
    }
    const int h = img.height() / scale;
    const int w = img.width() / scale;
    const int off = scale / 2;
    Image out(h, w, img.channels());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < img.channels(); ++c) {
                out.at(y, x, c) = img.at(y * scale + off, x * scale + off, c);
            }
        }
    }
    return out;
}

Image wald_reduce(const Image& img, int scale) {
    if (scale < 1 || img.height() % scale != 0 || img.width() % scale != 0) {
        throw ValidationError("image size must be divisible by the scale");
    }
    if (scale == 1) {
        return img;
    }
    Image out = decimate(gaussian_blur(img, scale / 2.0), scale);
    out.clamp01();
    return out;
}

ScenePair wald_degrade(const Image& gt, const Image& pan_hr, int scale) {
    if (gt.height() != pan_hr.height() || gt.width() != pan_hr.width()) {
        throw ValidationError("gt and pan must share spatial size");
    }
    if (gt.channels() != 4 || pan_hr.channels() != 1) {
        throw ValidationError("wald_degrade expects 4-band gt and 1-band pan");
    }
    ScenePair scene;
    scene.scale = scale;
    scene.lrms = wald_reduce(gt, scale);
    scene.pan = pan_hr;
    scene.gt = gt;
    scene.validate();
    return scene;
}

double cubic_weight(double t) noexcept {
    constexpr double a = -0.5;
    t = std::abs(t);
    if (t <= 1.0) {
        return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
    }
    if (t < 2.0) {
        return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
    }
    return 0.0;
}

namespace {

struct Taps {
    std::array<int, 4> index;
    std::array<double, 4> weight;
};

std::vector<Taps> cubic_taps(int out_len, int in_len, int scale) {
    std::vector<Taps> taps(static_cast<std::size_t>(out_len));
    for (int o = 0; o < out_len; ++o) {
        const double src = (o + 0.5) / scale - 0.5;
        const int base = static_cast<int>(std::floor(src));
        const double t = src - base;
        Taps& tp = taps[static_cast<std::size_t>(o)];
        double sum = 0.0;
        for (int k = 0; k < 4; ++k) {
            tp.index[static_cast<std::size_t>(k)] = std::clamp(base - 1 + k, 0, in_len - 1);
            tp.weight[static_cast<std::size_t>(k)] = cubic_weight(t - (k - 1));
            sum += tp.weight[static_cast<std::size_t>(k)];
        }
        for (double& wgt : tp.weight) {
            wgt /= sum;
        }
    }
    return taps;
}

} // namespace

Image upsample_bicubic(const Image& img, int scale) {
    if (scale < 1) {
        throw ValidationError("upsample scale must be >= 1");
    }
    if (scale == 1) {
        return img;
    }
    const int h = img.height();
    const int w = img.width();
    const int ch = img.channels();
    const int oh = h * scale;
    const int ow = w * scale;
    const auto xt = cubic_taps(ow, w, scale);
    const auto yt = cubic_taps(oh, h, scale);

    std::vector<double> rows(static_cast<std::size_t>(h) * ow * ch);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < ow; ++x) {
            const Taps& tp = xt[static_cast<std::size_t>(x)];
            for (int c = 0; c < ch; ++c) {
                double acc = 0.0;
                for (int k = 0; k < 4; ++k) {
                    acc += tp.weight[static_cast<std::size_t>(k)] * img.at(y, tp.index[static_cast<std::size_t>(k)], c);
                }
                rows[(static_cast<std::size_t>(y) * ow + static_cast<std::size_t>(x)) * ch + static_cast<std::size_t>(c)] = acc;
            }
        }
    }
    Image out(oh, ow, ch);
    for (int y = 0; y < oh; ++y) {
        const Taps& tp = yt[static_cast<std::size_t>(y)];
        for (int x = 0; x < ow; ++x) {
            for (int c = 0; c < ch; ++c) {
                double acc = 0.0;
                for (int k = 0; k < 4; ++k) {
                    const auto src_y = static_cast<std::size_t>(tp.index[static_cast<std::size_t>(k)]);
                    acc += tp.weight[static_cast<std::size_t>(k)] *
                           rows[(src_y * ow + static_cast<std::size_t>(x)) * ch + static_cast<std::size_t>(c)];
                }
                out.at(y, x, c) = static_cast<float>(std::clamp(acc, 0.0, 1.0));
            }
        }
    }
    return out;
}

} // namespace hetss
