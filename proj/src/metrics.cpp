#include "hetss/metrics.hpp"

#include "hetss/error.hpp"
#include "hetss/resample.hpp"

#include <algorithm>
#include <cmath>

namespace hetss {

namespace {

using Plane = std::vector<double>;

Plane plane_of(const Image& img, int c) {
    Plane p(static_cast<std::size_t>(img.height()) * img.width());
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            p[static_cast<std::size_t>(y) * img.width() + x] = img.at(y, x, c);
        }
    }
    return p;
}

void require_same(const Image& a, const Image& b) {
    if (!a.same_shape(b) || a.empty()) {
        throw ValidationError("metric inputs must be nonempty and share a shape");
    }
}

std::vector<double> band_mse(const Image& a, const Image& b) {
    const int c = a.channels();
    std::vector<double> mse(static_cast<std::size_t>(c), 0.0);
    const auto x = a.data();
    const auto y = b.data();
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = static_cast<double>(x[i]) - static_cast<double>(y[i]);
        mse[i % static_cast<std::size_t>(c)] += d * d;
    }
    const double n = static_cast<double>(x.size() / static_cast<std::size_t>(c));
    for (double& m : mse) {
        m /= n;
    }
    return mse;
}

// Valid-region separable correlation with a symmetric kernel.
Plane filter_valid(const Plane& src, int h, int w, const std::vector<double>& k, int& oh, int& ow) {
    const int r = static_cast<int>(k.size());
    oh = h - r + 1;
    ow = w - r + 1;
    Plane tmp(static_cast<std::size_t>(h) * ow, 0.0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int t = 0; t < r; ++t) {
                s += k[static_cast<std::size_t>(t)] * src[static_cast<std::size_t>(y) * w + x + t];
            }
            tmp[static_cast<std::size_t>(y) * ow + x] = s;
        }
    }
    Plane out(static_cast<std::size_t>(oh) * ow, 0.0);
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int t = 0; t < r; ++t) {
                s += k[static_cast<std::size_t>(t)] * tmp[static_cast<std::size_t>(y + t) * ow + x];
            }
            out[static_cast<std::size_t>(y) * ow + x] = s;
        }
    }
    return out;
}

double ssim_plane(const Plane& a, const Plane& b, int h, int w) {
    constexpr double C1 = 0.01 * 0.01;
    constexpr double C2 = 0.03 * 0.03;
    int win = std::min({11, h, w});
    if (win % 2 == 0) {
        --win;
    }
    std::vector<double> k(static_cast<std::size_t>(win));
    const int half = win / 2;
    double sum = 0.0;
    for (int i = 0; i < win; ++i) {
        const double t = i - half;
        k[static_cast<std::size_t>(i)] = std::exp(-t * t / (2.0 * 1.5 * 1.5));
        sum += k[static_cast<std::size_t>(i)];
    }
    for (double& v : k) {
        v /= sum;
    }
    Plane aa(a.size());
    Plane bb(a.size());
    Plane ab(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        aa[i] = a[i] * a[i];
        bb[i] = b[i] * b[i];
        ab[i] = a[i] * b[i];
    }
    int oh = 0;
    int ow = 0;
    const Plane ma = filter_valid(a, h, w, k, oh, ow);
    const Plane mb = filter_valid(b, h, w, k, oh, ow);
    const Plane saa = filter_valid(aa, h, w, k, oh, ow);
    const Plane sbb = filter_valid(bb, h, w, k, oh, ow);
    const Plane sab = filter_valid(ab, h, w, k, oh, ow);
    double acc = 0.0;
    for (std::size_t i = 0; i < ma.size(); ++i) {
        const double va = saa[i] - ma[i] * ma[i];
        const double vb = sbb[i] - mb[i] * mb[i];
        const double cov = sab[i] - ma[i] * mb[i];
        acc += ((2.0 * ma[i] * mb[i] + C1) * (2.0 * cov + C2)) /
               ((ma[i] * ma[i] + mb[i] * mb[i] + C1) * (va + vb + C2));
    }
    return acc / static_cast<double>(ma.size());
}

Plane laplacian(const Plane& p, int h, int w) {
    Plane out(p.size());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    const int yy = reflect_index(y + dy, h);
                    const int xx = reflect_index(x + dx, w);
                    const double v = p[static_cast<std::size_t>(yy) * w + xx];
                    s += (dy == 0 && dx == 0) ? 8.0 * v : -v;
                }
            }
            out[static_cast<std::size_t>(y) * w + x] = s;
        }
    }
    return out;
}

double pearson(const Plane& a, const Plane& b) {
    const double n = static_cast<double>(a.size());
    double ma = 0.0;
    double mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double va = 0.0;
    double vb = 0.0;
    double cov = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        va += (a[i] - ma) * (a[i] - ma);
        vb += (b[i] - mb) * (b[i] - mb);
        cov += (a[i] - ma) * (b[i] - mb);
    }
    if (va <= 0.0 || vb <= 0.0) {
        return 0.0;
    }
    return cov / std::sqrt(va * vb);
}

// Summed-area table with a zero border: (h+1) x (w+1).
Plane integral(const Plane& p, int h, int w) {
    Plane s(static_cast<std::size_t>(h + 1) * (w + 1), 0.0);
    for (int y = 0; y < h; ++y) {
        double row = 0.0;
        for (int x = 0; x < w; ++x) {
            row += p[static_cast<std::size_t>(y) * w + x];
            s[static_cast<std::size_t>(y + 1) * (w + 1) + x + 1] = s[static_cast<std::size_t>(y) * (w + 1) + x + 1] + row;
        }
    }
    return s;
}

double box(const Plane& s, int w, int y, int x, int b) {
    const auto at = [&](int yy, int xx) { return s[static_cast<std::size_t>(yy) * (w + 1) + xx]; };
    return at(y + b, x + b) - at(y, x + b) - at(y + b, x) + at(y, x);
}

} // namespace

double psnr(const Image& fused, const Image& gt) {
    require_same(fused, gt);
    const auto mse = band_mse(fused, gt);
    double m = 0.0;
    for (double v : mse) {
        m += v;
    }
    m /= static_cast<double>(mse.size());
    if (m <= 0.0) {
        return kPsnrCap;
    }
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / m));
}

double ssim(const Image& a, const Image& b) {
    require_same(a, b);
    double acc = 0.0;
    for (int c = 0; c < a.channels(); ++c) {
        acc += ssim_plane(plane_of(a, c), plane_of(b, c), a.height(), a.width());
    }
    return acc / a.channels();
}

double sam(const Image& fused, const Image& gt) {
    require_same(fused, gt);
    const int c = fused.channels();
    const auto x = fused.data();
    const auto y = gt.data();
    const std::size_t npix = x.size() / static_cast<std::size_t>(c);
    double acc = 0.0;
    for (std::size_t p = 0; p < npix; ++p) {
        double na = 0.0;
        double nb = 0.0;
        for (int k = 0; k < c; ++k) {
            const double a = x[p * c + k];
            const double b = y[p * c + k];
            na += a * a;
            nb += b * b;
        }
        if (na == 0.0 || nb == 0.0) {
            continue;
        }
        na = std::sqrt(na);
        nb = std::sqrt(nb);
        double diff = 0.0;
        double sum = 0.0;
        for (int k = 0; k < c; ++k) {
            const double a = x[p * c + k] / na;
            const double b = y[p * c + k] / nb;
            diff += (a - b) * (a - b);
            sum += (a + b) * (a + b);
        }
        // Half-angle form: exact 0 for identical spectra, no acos clipping.
        acc += 2.0 * std::atan2(std::sqrt(diff), std::sqrt(sum));
    }
    return acc / static_cast<double>(npix);
}

double ergas(const Image& fused, const Image& gt, int scale) {
    require_same(fused, gt);
    if (scale < 1) {
        throw ValidationError("scale must be >= 1");
    }
    const auto mse = band_mse(fused, gt);
    double acc = 0.0;
    for (int c = 0; c < gt.channels(); ++c) {
        double mean = 0.0;
        for (int y = 0; y < gt.height(); ++y) {
            for (int x = 0; x < gt.width(); ++x) {
                mean += gt.at(y, x, c);
            }
        }
        mean /= static_cast<double>(gt.height()) * gt.width();
        acc += mse[static_cast<std::size_t>(c)] / std::max(mean * mean, 1e-12);
    }
    return 100.0 / scale * std::sqrt(acc / gt.channels());
}

double scc(const Image& fused, const Image& gt) {
    require_same(fused, gt);
    double acc = 0.0;
    for (int c = 0; c < gt.channels(); ++c) {
        acc += pearson(laplacian(plane_of(fused, c), fused.height(), fused.width()),
                       laplacian(plane_of(gt, c), gt.height(), gt.width()));
    }
    return acc / gt.channels();
}

double q_index(const Image& a, const Image& b, int block) {
    require_same(a, b);
    if (a.channels() != 1) {
        throw ValidationError("q_index expects single-channel images");
    }
    if (block < 1) {
        throw ValidationError("block must be >= 1");
    }
    const int h = a.height();
    const int w = a.width();
    const int bs = std::min({block, h, w});
    const Plane x = plane_of(a, 0);
    const Plane y = plane_of(b, 0);
    Plane xx(x.size());
    Plane yy(x.size());
    Plane xy(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
    }
    const Plane sx = integral(x, h, w);
    const Plane sy = integral(y, h, w);
    const Plane sxx = integral(xx, h, w);
    const Plane syy = integral(yy, h, w);
    const Plane sxy = integral(xy, h, w);
    const double n = static_cast<double>(bs) * bs;
    double acc = 0.0;
    int count = 0;
    for (int i = 0; i + bs <= h; ++i) {
        for (int j = 0; j + bs <= w; ++j) {
            const double mx = box(sx, w, i, j, bs) / n;
            const double my = box(sy, w, i, j, bs) / n;
            const double vx = std::max(0.0, box(sxx, w, i, j, bs) / n - mx * mx);
            const double vy = std::max(0.0, box(syy, w, i, j, bs) / n - my * my);
            const double cxy = box(sxy, w, i, j, bs) / n - mx * my;
            const double d1 = vx + vy;
            const double d2 = mx * mx + my * my;
            double q = 1.0;
            if (d1 > 1e-15 && d2 > 0.0) {
                q = 4.0 * cxy * mx * my / (d1 * d2);
            } else if (d2 > 0.0) {
                q = 2.0 * mx * my / d2;
            } else if (d1 > 1e-15) {
                q = 2.0 * cxy / d1;
            }
            acc += q;
            ++count;
        }
    }
    return acc / count;
}

MetricReport full_reference(const Image& fused, const Image& gt, int scale) {
    MetricReport r;
    r.psnr = psnr(fused, gt);
    r.ssim = ssim(fused, gt);
    r.sam = sam(fused, gt);
    r.ergas = ergas(fused, gt, scale);
    r.scc = scc(fused, gt);
    return r;
}

NoRefReport no_reference(const Image& fused, const Image& pan, const Image& lrms, int scale) {
    if (pan.channels() != 1 || fused.height() != pan.height() || fused.width() != pan.width()) {
        throw ValidationError("fused image must match the PAN size");
    }
    if (lrms.channels() != fused.channels() || lrms.height() * scale != fused.height() ||
        lrms.width() * scale != fused.width()) {
        throw ValidationError("LR-MS must be the fused size divided by the scale");
    }
    const int c = fused.channels();
    std::vector<Image> fb;
    std::vector<Image> lb;
    for (int b = 0; b < c; ++b) {
        fb.push_back(fused.channel(b));
        lb.push_back(lrms.channel(b));
    }
    double dl = 0.0;
    int pairs = 0;
    for (int i = 0; i < c; ++i) {
        for (int j = i + 1; j < c; ++j) {
            dl += std::abs(q_index(fb[static_cast<std::size_t>(i)], fb[static_cast<std::size_t>(j)]) -
                           q_index(lb[static_cast<std::size_t>(i)], lb[static_cast<std::size_t>(j)]));
            ++pairs;
        }
    }
    const Image pan_low = wald_reduce(pan, scale);
    double ds = 0.0;
    for (int b = 0; b < c; ++b) {
        ds += std::abs(q_index(fb[static_cast<std::size_t>(b)], pan) - q_index(lb[static_cast<std::size_t>(b)], pan_low));
    }
    NoRefReport r;
    r.d_lambda = pairs > 0 ? dl / pairs : 0.0;
    r.d_s = ds / c;
    r.qnr = (1.0 - r.d_lambda) * (1.0 - r.d_s);
    return r;
}

std::vector<double> histogram(const Image& img, int bins) {
    if (bins < 2) {
        throw ValidationError("histogram needs at least 2 bins");
    }
    if (img.channels() != 1 || img.empty()) {
        throw ValidationError("histogram expects a nonempty single-channel image");
    }
    std::vector<double> h(static_cast<std::size_t>(bins), 0.0);
    for (float v : img.data()) {
        const int k = std::clamp(static_cast<int>(std::floor(static_cast<double>(v) * bins)), 0, bins - 1);
        h[static_cast<std::size_t>(k)] += 1.0;
    }
    for (double& v : h) {
        v /= static_cast<double>(img.size());
    }
    return h;
}

double emd_1d(const std::vector<double>& h1, const std::vector<double>& h2) {
    if (h1.size() != h2.size()) {
        throw ValidationError("histograms must have the same number of bins");
    }
    double c1 = 0.0;
    double c2 = 0.0;
    double d = 0.0;
    for (std::size_t i = 0; i < h1.size(); ++i) {
        c1 += h1[i];
        c2 += h2[i];
        d += std::abs(c1 - c2);
    }
    return d;
}

PriorReport prior_analysis(const ScenePair& scene, int bins) {
    if (!scene.gt) {
        throw ValidationError("prior analysis needs gt");
    }
    scene.validate();
    const Image up = upsample_bicubic(scene.lrms, scene.scale);
    const auto hp = histogram(scene.pan, bins);
    std::vector<std::vector<double>> hl;
    std::vector<std::vector<double>> hg;
    for (int b = 0; b < scene.lrms.channels(); ++b) {
        hl.push_back(histogram(up.channel(b), bins));
        hg.push_back(histogram(scene.gt->channel(b), bins));
    }
    PriorReport r;
    auto add = [&](const std::string& kind, const std::string& a, const std::string& b, const std::vector<double>& x,
                   const std::vector<double>& y) {
        const double e = emd_1d(x, y);
        r.rows.push_back({kind, a, b, e, emd_coefficient(e)});
        return emd_coefficient(e);
    };
    const int nb = static_cast<int>(hg.size());
    for (int b = 0; b < nb; ++b) {
        r.mean_pan_gt += add("pan-gt", "pan", "gt." + std::to_string(b), hp, hg[static_cast<std::size_t>(b)]) / nb;
    }
    for (int b = 0; b < nb; ++b) {
        r.mean_lrms_gt += add("lrms-gt", "lrms." + std::to_string(b), "gt." + std::to_string(b),
                              hl[static_cast<std::size_t>(b)], hg[static_cast<std::size_t>(b)]) /
                          nb;
    }
    for (int b = 0; b + 1 < nb; ++b) {
        add("lrms-lrms", "lrms." + std::to_string(b), "lrms." + std::to_string(b + 1), hl[static_cast<std::size_t>(b)],
            hl[static_cast<std::size_t>(b) + 1]);
    }
    for (int b = 0; b + 1 < nb; ++b) {
        add("gt-gt", "gt." + std::to_string(b), "gt." + std::to_string(b + 1), hg[static_cast<std::size_t>(b)],
            hg[static_cast<std::size_t>(b) + 1]);
    }
    return r;
}

} // namespace hetss
