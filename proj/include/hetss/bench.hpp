#pragma once

#include <cstdint>
#include <vector>

namespace hetss {

struct BenchRow {
    int nodes = 0;
    double pattern_ms = 0.0;
    double local_ms = 0.0;
    double global_ms = 0.0;
};

struct BenchReport {
    std::vector<BenchRow> rows;
    double pattern_exponent = 0.0;
    double local_exponent = 0.0;
    double global_exponent = 0.0;
};

/// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

/// Times pattern generation, local aggregation and global aggregation on HetSS graphs with
/// `nodes` total nodes (nodes/5 patches, random features of width dim). Each timing is the
/// best of repeated runs lasting at least `min_ms` in total.
BenchReport run_bench(const std::vector<int>& nodes, int dim = 64, int k = 8, std::uint64_t seed = 0,
                      double min_ms = 100.0);

} // namespace hetss
