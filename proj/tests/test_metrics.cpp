#include "support.hpp"

#include "hetss/error.hpp"
#include "hetss/metrics.hpp"
#include "hetss/resample.hpp"
#include "hetss/synth.hpp"

#include <doctest.h>

#include <cmath>

using namespace hetss;

namespace {

// Direct 2-D Gaussian-weighted SSIM over every full window position.
double ssim_oracle(const Image& a, const Image& b) {
    const int h = a.height();
    const int w = a.width();
    int win = std::min({11, h, w});
    if (win % 2 == 0) {
        --win;
    }
    const int half = win / 2;
    std::vector<double> g(static_cast<std::size_t>(win * win));
    double gs = 0.0;
    for (int y = 0; y < win; ++y) {
        for (int x = 0; x < win; ++x) {
            const double r2 = (y - half) * (y - half) + (x - half) * (x - half);
            g[static_cast<std::size_t>(y * win + x)] = std::exp(-r2 / (2 * 1.5 * 1.5));
            gs += g[static_cast<std::size_t>(y * win + x)];
        }
    }
    double total = 0.0;
    for (int c = 0; c < a.channels(); ++c) {
        double acc = 0.0;
        int count = 0;
        for (int oy = 0; oy + win <= h; ++oy) {
            for (int ox = 0; ox + win <= w; ++ox) {
                double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
                for (int y = 0; y < win; ++y) {
                    for (int x = 0; x < win; ++x) {
                        const double wt = g[static_cast<std::size_t>(y * win + x)] / gs;
                        const double va = a.at(oy + y, ox + x, c);
                        const double vb = b.at(oy + y, ox + x, c);
                        ma += wt * va;
                        mb += wt * vb;
                        saa += wt * va * va;
                        sbb += wt * vb * vb;
                        sab += wt * va * vb;
                    }
                }
                const double c1 = 1e-4;
                const double c2 = 9e-4;
                acc += (2 * ma * mb + c1) * (2 * (sab - ma * mb) + c2) /
                       ((ma * ma + mb * mb + c1) * (saa - ma * ma + sbb - mb * mb + c2));
                ++count;
            }
        }
        total += acc / count;
    }
    return total / a.channels();
}

double q_oracle(const Image& a, const Image& b, int block) {
    const int bs = std::min({block, a.height(), a.width()});
    double acc = 0.0;
    int count = 0;
    for (int i = 0; i + bs <= a.height(); ++i) {
        for (int j = 0; j + bs <= a.width(); ++j) {
            double mx = 0, my = 0;
            for (int y = 0; y < bs; ++y) {
                for (int x = 0; x < bs; ++x) {
                    mx += a.at(i + y, j + x);
                    my += b.at(i + y, j + x);
                }
            }
            const double n = bs * bs;
            mx /= n;
            my /= n;
            double vx = 0, vy = 0, cxy = 0;
            for (int y = 0; y < bs; ++y) {
                for (int x = 0; x < bs; ++x) {
                    const double dx = a.at(i + y, j + x) - mx;
                    const double dy = b.at(i + y, j + x) - my;
                    vx += dx * dx;
                    vy += dy * dy;
                    cxy += dx * dy;
                }
            }
            acc += 4 * (cxy / n) * mx * my / ((vx / n + vy / n) * (mx * mx + my * my));
            ++count;
        }
    }
    return acc / count;
}

} // namespace

TEST_CASE("identical images score ideally") {
    std::mt19937_64 rng(51);
    const Image a = testutil::random_image(rng, 24, 24, 4, 0.05f, 0.95f);
    CHECK(std::abs(ssim(a, a) - 1.0) <= 1e-9);
    CHECK(std::abs(sam(a, a)) <= 1e-9);
    CHECK(std::abs(ergas(a, a)) <= 1e-9);
    CHECK(std::abs(scc(a, a) - 1.0) <= 1e-6);
    CHECK(psnr(a, a) == kPsnrCap);
    const MetricReport r = full_reference(a, a);
    CHECK(r.psnr == kPsnrCap);
    CHECK(r.ssim == doctest::Approx(1.0));
}

TEST_CASE("psnr of a constant offset") {
    const Image a(8, 8, 4, 0.5f);
    const Image b(8, 8, 4, 0.6f);
    CHECK(std::abs(psnr(a, b) - 20.0) <= 0.01);
    CHECK(psnr(Image(4, 4, 4, 0.5f), Image(4, 4, 4, 0.5000001f)) <= kPsnrCap);
}

TEST_CASE("ssim agrees with a direct windowed computation") {
    std::mt19937_64 rng(52);
    for (int size : {14, 9, 6}) {
        const Image a = testutil::random_image(rng, size, size + 2, 2);
        Image b = a;
        for (float& v : b.data()) {
            v = std::clamp(v + 0.2f * (static_cast<float>(rng() % 1000) / 1000.0f - 0.5f), 0.0f, 1.0f);
        }
        CHECK(ssim(a, b) == doctest::Approx(ssim_oracle(a, b)).epsilon(1e-10));
    }
}

TEST_CASE("spectral angle of hand-built spectra") {
    Image a(1, 2, 4, 0.0f);
    Image b(1, 2, 4, 0.0f);
    a.at(0, 0, 0) = 0.5f;
    b.at(0, 0, 0) = 0.5f;
    b.at(0, 0, 1) = 0.5f;
    a.at(0, 1, 2) = 0.3f;
    b.at(0, 1, 2) = 0.9f;
    CHECK(sam(a, b) == doctest::Approx((M_PI / 4 + 0.0) / 2.0).epsilon(1e-12));
    Image z(1, 2, 4, 0.0f);
    CHECK(sam(z, b) == 0.0);
}

TEST_CASE("ergas of a constant offset") {
    const Image gt(4, 4, 4, 0.5f);
    const Image f(4, 4, 4, 0.6f);
    CHECK(ergas(f, gt, 4) == doctest::Approx(100.0 / 4.0 * 0.2).epsilon(1e-6));
    CHECK(ergas(f, gt, 2) == doctest::Approx(100.0 / 2.0 * 0.2).epsilon(1e-6));
}

TEST_CASE("scc treats flat bands as uncorrelated and is scale invariant") {
    std::mt19937_64 rng(53);
    const Image a = testutil::random_image(rng, 10, 10, 2, 0.0f, 0.5f);
    Image b = a;
    for (float& v : b.data()) {
        v = 2.0f * v;
    }
    CHECK(scc(a, b) == doctest::Approx(1.0).epsilon(1e-6));
    Image flat = a;
    for (int y = 0; y < 10; ++y) {
        for (int x = 0; x < 10; ++x) {
            flat.at(y, x, 1) = 0.4f;
        }
    }
    CHECK(scc(flat, a) == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("q index agrees with a direct block computation") {
    std::mt19937_64 rng(54);
    const Image a = testutil::random_image(rng, 12, 10, 1, 0.1f, 0.9f);
    const Image b = testutil::random_image(rng, 12, 10, 1, 0.1f, 0.9f);
    for (int block : {3, 8, 32}) {
        CHECK(q_index(a, b, block) == doctest::Approx(q_oracle(a, b, block)).epsilon(1e-9));
    }
    CHECK(q_index(a, a) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(q_index(Image(4, 4, 1, 0.3f), Image(4, 4, 1, 0.3f)) == 1.0);
    CHECK_THROWS_AS(q_index(Image(4, 4, 2), Image(4, 4, 2)), ValidationError);
}

TEST_CASE("qnr is the product of its distortion complements") {
    const ScenePair s = synth_scene(3, 64);
    const Image fused = upsample_bicubic(s.lrms, 4);
    const NoRefReport r = no_reference(fused, s.pan, s.lrms);
    CHECK(r.qnr == (1.0 - r.d_lambda) * (1.0 - r.d_s));
    CHECK(r.d_lambda >= 0.0);
    CHECK(r.d_s >= 0.0);
    CHECK_THROWS_AS(no_reference(s.lrms, s.pan, s.lrms), ValidationError);
}

TEST_CASE("histograms and one-dimensional emd") {
    Image img(2, 2, 1);
    img.at(0, 0) = 0.0f;
    img.at(0, 1) = 0.49f;
    img.at(1, 0) = 0.51f;
    img.at(1, 1) = 1.0f;
    const auto h = histogram(img, 4);
    CHECK(h == std::vector<double>{0.25, 0.25, 0.25, 0.25});

    std::vector<double> d0(8, 0.0);
    std::vector<double> d3(8, 0.0);
    d0[1] = 1.0;
    d3[4] = 1.0;
    CHECK(emd_1d(d0, d3) == doctest::Approx(3.0));
    CHECK(emd_1d(d0, d0) == 0.0);
    CHECK(emd_coefficient(0.0) == 1.0);
    CHECK(emd_coefficient(3.0) == 0.25);
    CHECK_THROWS_AS(emd_1d(d0, std::vector<double>(3)), ValidationError);
}

TEST_CASE("prior analysis table") {
    const ScenePair s = synth_scene(9, 64);
    const PriorReport rep = prior_analysis(s, 64);
    int pan_gt = 0;
    int lrms_gt = 0;
    int lrms_lrms = 0;
    int gt_gt = 0;
    double sum_pan = 0.0;
    double sum_lrms = 0.0;
    for (const PriorRow& r : rep.rows) {
        CHECK(r.coefficient == doctest::Approx(1.0 / (1.0 + r.emd)));
        if (r.kind == "pan-gt") {
            ++pan_gt;
            sum_pan += r.coefficient;
        } else if (r.kind == "lrms-gt") {
            ++lrms_gt;
            sum_lrms += r.coefficient;
        } else if (r.kind == "lrms-lrms") {
            ++lrms_lrms;
        } else if (r.kind == "gt-gt") {
            ++gt_gt;
        }
    }
    CHECK(pan_gt == 4);
    CHECK(lrms_gt == 4);
    CHECK(lrms_lrms == 3);
    CHECK(gt_gt == 3);
    CHECK(rep.mean_pan_gt == doctest::Approx(sum_pan / 4));
    CHECK(rep.mean_lrms_gt == doctest::Approx(sum_lrms / 4));

    const Image band = s.gt->channel(0);
    CHECK(emd_1d(histogram(s.pan, 64), histogram(band, 64)) == doctest::Approx(rep.rows[0].emd));
}

TEST_CASE("metrics reject mismatched shapes") {
    CHECK_THROWS_AS(psnr(Image(2, 2, 4), Image(2, 3, 4)), ValidationError);
    CHECK_THROWS_AS(ssim(Image(), Image()), ValidationError);
}
