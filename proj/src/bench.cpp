#include "hetss/bench.hpp"

#include "hetss/error.hpp"
#include "hetss/graph.hpp"
#include "hetss/model.hpp"
#include "hetss/patterns.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>

namespace hetss {

namespace {

template <class F>
double best_ms(F&& fn, double min_ms) {
    using clock = std::chrono::steady_clock;
    double best = std::numeric_limits<double>::infinity();
    double spent = 0.0;
    int runs = 0;
    while (runs < 3 || spent < min_ms) {
        const auto t0 = clock::now();
        fn();
        const double ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
        best = std::min(best, ms);
        spent += ms;
        ++runs;
    }
    return best;
}

} // namespace

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) {
        throw ValidationError("slope fit needs at least two matching points");
    }
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) {
            throw ValidationError("log-log fit needs positive values");
        }
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= static_cast<double>(x.size());
    my /= static_cast<double>(x.size());
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

BenchReport run_bench(const std::vector<int>& nodes, int dim, int k, std::uint64_t seed, double min_ms) {
    BenchReport rep;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (int n : nodes) {
        const int patches = n / (1 + kBands);
        if (patches < 2 || patches * (1 + kBands) != n) {
            throw ValidationError("bench node counts must be multiples of 5 with at least 2 patches");
        }
        PatchFeatures f;
        f.pan = Eigen::MatrixXd::NullaryExpr(patches, dim, [&] { return nd(rng); });
        for (auto& b : f.band) {
            b = Eigen::MatrixXd::NullaryExpr(patches, dim, [&] { return nd(rng); });
        }
        const HetGraph g = build_hetss_graph(f, k);
        const Eigen::VectorXd alpha = Eigen::VectorXd::Constant(kMaxPatterns, 1.0 / 3.0);
        const Eigen::VectorXd beta = Eigen::VectorXd::Ones(kMaxPatterns);
        std::vector<Eigen::MatrixXd> w;
        for (int i = 0; i < 2; ++i) {
            w.push_back(Eigen::MatrixXd::Identity(dim, dim) +
                        0.1 * Eigen::MatrixXd::NullaryExpr(dim, dim, [&] { return nd(rng); }));
        }

        PatternSet ps;
        BenchRow row;
        row.nodes = n;
        row.pattern_ms = best_ms([&] { ps = generate_patterns(g); }, min_ms);
        double sink = 0.0;
        row.local_ms = best_ms([&] { sink += aggregate_local(ps, g.U, alpha, w)(0, 0); }, min_ms);
        row.global_ms = best_ms(
            [&] {
                const Eigen::MatrixXd G = global_similarity(build_global_pattern_matrix(ps, beta));
                sink += aggregate_global(G, g.U, w)(0, 0);
            },
            min_ms);
        if (!std::isfinite(sink)) {
            throw DivergenceError("benchmark produced non-finite output");
        }
        rep.rows.push_back(row);
    }
    if (rep.rows.size() >= 2) {
        std::vector<double> x;
        std::vector<double> yp;
        std::vector<double> yl;
        std::vector<double> yg;
        for (const BenchRow& r : rep.rows) {
            x.push_back(r.nodes);
            yp.push_back(r.pattern_ms);
            yl.push_back(r.local_ms);
            yg.push_back(r.global_ms);
        }
        rep.pattern_exponent = loglog_slope(x, yp);
        rep.local_exponent = loglog_slope(x, yl);
        rep.global_exponent = loglog_slope(x, yg);
    }
    return rep;
}

} // namespace hetss
