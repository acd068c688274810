// Acceptance harness: one PASS/FAIL line per criterion, exit 1 if any criterion fails.
// --waive-ablation reports the ablation direction without failing on it (the table is always printed).

#include "support.hpp"

#include "hetss/bench.hpp"
#include "hetss/experiments.hpp"
#include "hetss/metrics.hpp"
#include "hetss/model.hpp"
#include "hetss/resample.hpp"
#include "hetss/patterns.hpp"
#include "hetss/synth.hpp"
#include "hetss/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <iostream>
#include <map>
#include <string>

using namespace hetss;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(bool pass, const std::string& name, const std::string& detail) {
    std::printf("%s %s: %s\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
    std::fflush(stdout);
    failures += pass ? 0 : 1;
}

std::string fmt(const char* spec, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, spec, a, b, c, d);
    return buf;
}

std::vector<HetGraph> pattern_corpus() {
    std::mt19937_64 rng(2024);
    std::vector<HetGraph> out;
    for (int i = 0; i < 1000; ++i) {
        const int n = 2 + static_cast<int>(rng() % 49);
        out.push_back(testutil::random_multiplex(rng, n, 0.1));
    }
    return out;
}

void pattern_equivalence(const std::vector<HetGraph>& corpus) {
    const auto t0 = Clock::now();
    int mismatches = 0;
    for (const HetGraph& g : corpus) {
        mismatches += patterns_equal(generate_patterns(g), pattern_oracle(g), 1e-9) ? 0 : 1;
    }
    const double secs = seconds_since(t0);
    report(mismatches == 0 && secs < 30.0, "pattern-oracle-equivalence",
           fmt("%.0f/1000 graphs differ, %.2f s (limit 30 s)", mismatches, secs));
}

void pattern_partition(const std::vector<HetGraph>& corpus) {
    long violations = 0;
    for (const HetGraph& g : corpus) {
        const PatternSet ps = generate_patterns(g);
        std::map<std::pair<int, int>, int> hits;
        for (const Pattern& p : ps.patterns) {
            for (const PatternEntry& e : p.entries) {
                ++hits[{e.row, e.col}];
            }
        }
        std::map<std::pair<int, int>, int> connected;
        for (const auto& rel : g.relations) {
            for (const Edge& e : rel.edges) {
                connected[{e.dst, e.src}] = 1;
            }
        }
        for (const auto& [pair, _] : connected) {
            const auto it = hits.find(pair);
            violations += (it == hits.end() || it->second != 1) ? 1 : 0;
        }
        violations += hits.size() != connected.size() ? 1 : 0;
        violations += ps.total_nnz() != connected.size() ? 1 : 0;
    }
    report(violations == 0, "pattern-partition-conservation", fmt("%.0f violations", static_cast<double>(violations)));
}

void gradient_correctness() {
    const auto t0 = Clock::now();
    const GradCheckSetup s = make_grad_check_setup(0);
    const auto rows = grad_check(s.scene, s.params, s.cfg, 1e-4);
    double worst = 0.0;
    std::string detail;
    for (const GradCheckRow& r : rows) {
        worst = std::max(worst, r.max_rel);
        detail += r.group + "=" + fmt("%.1e", r.max_rel) + " ";
    }
    const double secs = seconds_since(t0);
    report(worst <= 1e-4 && secs < 60.0 && rows.size() == 7, "gradient-correctness",
           detail + fmt("max %.2e (tol 1e-4), %.2f s", worst, secs));
}

void equation_exactness() {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<std::string> bad;

    // layer averaging in the local branch
    PatchFeatures f;
    f.pan = Eigen::MatrixXd::NullaryExpr(6, 5, [&] { return nd(rng); });
    for (auto& b : f.band) {
        b = Eigen::MatrixXd::NullaryExpr(6, 5, [&] { return nd(rng); });
    }
    const HetGraph g = build_hetss_graph(f, 2);
    const PatternSet ps = generate_patterns(g);
    const Eigen::VectorXd alpha = Eigen::VectorXd::Constant(kMaxPatterns, 1.0 / 3.0);
    std::vector<Eigen::MatrixXd> w;
    for (int i = 0; i < 3; ++i) {
        w.push_back(Eigen::MatrixXd::NullaryExpr(5, 5, [&] { return 0.5 * nd(rng); }));
    }
    const Eigen::MatrixXd A = Eigen::MatrixXd(local_operator(ps, alpha));
    const Eigen::MatrixXd Z = A * g.U;
    const Eigen::MatrixXd expect = (Z * w[0] + Z * w[0] * w[1] + Z * w[0] * w[1] * w[2]) / 3.0;
    const Eigen::MatrixXd hl = aggregate_local(ps, g.U, alpha, w);
    if ((hl - expect).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + expect.cwiseAbs().maxCoeff())) {
        bad.push_back("layer-averaging");
    }

    // fusion
    const Eigen::MatrixXd hg = Eigen::MatrixXd::NullaryExpr(hl.rows(), hl.cols(), [&] { return nd(rng); });
    const Eigen::MatrixXd h = fuse(hl, hg);
    for (Eigen::Index i = 0; i < h.size(); ++i) {
        if (h.data()[i] != 0.5 * (hl.data()[i] + hg.data()[i])) {
            bad.push_back("fusion");
            break;
        }
    }

    // loss decomposition
    const Image a = testutil::random_image(rng, 8, 8, 4);
    const Image b = testutil::random_image(rng, 8, 8, 4);
    TrainConfig cfg;
    const LossBreakdown lb = total_loss(a, b, hl, hg, cfg);
    if (lb.total != lb.l1 + cfg.gamma * lb.lcl || lb.l1 != loss_l1(a, b) || lb.lcl != loss_contrastive(hl, hg, cfg.tau)) {
        bad.push_back("loss-decomposition");
    }

    // QNR product identity
    const ScenePair s = synth_scene(1, 64);
    const NoRefReport nr = no_reference(upsample_bicubic(s.lrms, 4), s.pan, s.lrms);
    if (nr.qnr != (1.0 - nr.d_lambda) * (1.0 - nr.d_s)) {
        bad.push_back("qnr-product");
    }

    // learning-rate schedule
    const double lr0 = lr_schedule(0, cfg);
    const double lr3000 = lr_schedule(3000, cfg);
    if (lr0 != 1e-4 || std::abs(lr3000 - 8.5e-5) > 1e-19) {
        bad.push_back("lr-schedule");
    }

    std::string detail = bad.empty() ? "all identities hold" : "broken:";
    for (const auto& x : bad) {
        detail += " " + x;
    }
    report(bad.empty(), "equation-exactness", detail + fmt(" (lr(0)=%.3g, lr(3000)=%.3g)", lr0, lr3000));
}

void metric_anchors() {
    std::mt19937_64 rng(9);
    const Image img = testutil::random_image(rng, 32, 32, 4, 0.05f, 0.95f);
    const MetricReport r = full_reference(img, img);
    const double off = psnr(Image(16, 16, 4, 0.5f), Image(16, 16, 4, 0.6f));
    const bool pass = std::abs(r.ssim - 1.0) <= 1e-9 && std::abs(r.sam) <= 1e-9 && std::abs(r.ergas) <= 1e-9 &&
                      std::abs(r.scc - 1.0) <= 1e-6 && r.psnr == kPsnrCap && std::abs(off - 20.0) <= 0.01;
    report(pass, "metric-anchors",
           fmt("ssim-1=%.1e sam=%.1e ergas=%.1e", r.ssim - 1.0, r.sam, r.ergas) +
               fmt(" scc-1=%.1e psnr=%.1f offset-psnr=%.4f", r.scc - 1.0, r.psnr, off));
}

void contrastive_closed_forms() {
    double worst = 0.0;
    for (int n : {2, 10, 100}) {
        const Eigen::MatrixXd same = Eigen::MatrixXd::Ones(n, 4);
        worst = std::max(worst, std::abs(loss_contrastive(same, same, 0.5) - std::log(static_cast<double>(n))));
        const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
        for (double tau : {0.2, 0.5, 1.0}) {
            const double expect = -std::log(std::exp(1.0 / tau) / (std::exp(1.0 / tau) + (n - 1)));
            worst = std::max(worst, std::abs(loss_contrastive(eye, eye, tau) - expect));
        }
    }
    report(worst <= 1e-6, "contrastive-closed-forms", fmt("max deviation %.2e (tol 1e-6)", worst));
}

OverfitResult overfit_smoke(const ScenePair& scene) {
    const TrainConfig cfg = [] {
        TrainConfig c;
        c.iters = 500;
        return c;
    }();
    const auto t0 = Clock::now();
    OverfitResult r = run_overfit(scene, cfg);
    const double secs = seconds_since(t0);
    const double gain = r.final_psnr - r.baseline_psnr;
    report(gain >= 1.0 && r.nonincreasing_fraction >= 0.9 && secs < 600.0, "overfit-smoke",
           fmt("baseline %.3f dB -> %.3f dB (gain %.3f, need 1.0)", r.baseline_psnr, r.final_psnr, gain) +
               fmt(", non-increasing windows %.0f%% (need 90%%), %.1f s", 100.0 * r.nonincreasing_fraction, secs));
    return r;
}

void ablation_direction(const ScenePair& scene, const OverfitResult& full, bool waive) {
    TrainConfig cfg;
    cfg.iters = 500;
    std::vector<AblationRow> rows{{Ablation::Full, full.final_l1, full.final_psnr}};
    for (Ablation a : {Ablation::LocalOnly, Ablation::GlobalOnly}) {
        TrainConfig c = cfg;
        c.ablate = a;
        const OverfitResult r = run_overfit(scene, c);
        rows.push_back({a, r.final_l1, r.final_psnr});
    }
    print_ablation_table(std::cout, rows);
    std::cout.flush();
    const bool holds = ablation_direction_holds(rows, 0.05);
    const double best = std::min(rows[1].final_l1, rows[2].final_l1);
    const std::string detail =
        fmt("full %.6f vs min(single) %.6f, ratio %.4f (limit 1.05)", rows[0].final_l1, best, rows[0].final_l1 / best);
    if (waive && !holds) {
        std::printf("WAIVED ablation-direction: %s\n", detail.c_str());
        return;
    }
    report(holds, "ablation-direction", detail);
}

void complexity_bench() {
    const BenchReport rep = run_bench({100, 200, 400, 800});
    std::string rows;
    for (const BenchRow& r : rep.rows) {
        rows += fmt("n=%.0f p=%.3fms g=%.3fms; ", r.nodes, r.pattern_ms, r.global_ms);
    }
    report(rep.pattern_exponent <= 2.3 && rep.global_exponent <= 2.3, "complexity-bench",
           rows + fmt("exponents pattern %.3f global %.3f local %.3f (limit 2.3)", rep.pattern_exponent,
                      rep.global_exponent, rep.local_exponent));
}

void prior_direction() {
    double pan = 0.0;
    double lrms = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const PriorReport rep = prior_analysis(synth_scene(seed, 64), 64);
        pan += rep.mean_pan_gt / 10.0;
        lrms += rep.mean_lrms_gt / 10.0;
    }
    report(pan > lrms, "prior-analysis-direction", fmt("mean pan-gt %.4f vs lrms-gt %.4f", pan, lrms));
}

} // namespace

int main(int argc, char** argv) {
    bool waive = false;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--waive-ablation") == 0) {
            waive = true;
        } else {
            std::fprintf(stderr, "usage: %s [--waive-ablation]\n", argv[0]);
            return 1;
        }
    }
    const std::vector<HetGraph> corpus = pattern_corpus();
    pattern_equivalence(corpus);
    pattern_partition(corpus);
    gradient_correctness();
    equation_exactness();
    metric_anchors();
    contrastive_closed_forms();
    const ScenePair scene = synth_scene(0, 64);
    const OverfitResult full = overfit_smoke(scene);
    ablation_direction(scene, full, waive);
    complexity_bench();
    prior_direction();
    std::printf("%d criterion(s) failed\n", failures);
    return failures == 0 ? 0 : 1;
}
