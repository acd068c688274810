#pragma once

#include "hetss/graph.hpp"
#include "hetss/image.hpp"

#include <random>

namespace testutil {

inline hetss::Image random_image(std::mt19937_64& rng, int h, int w, int c, float lo = 0.0f, float hi = 1.0f) {
    std::uniform_real_distribution<float> u(lo, hi);
    hetss::Image img(h, w, c);
    for (float& v : img.data()) {
        v = u(rng);
    }
    return img;
}

// Generic 3-relation multiplex graph: every ordered pair (i != j) carries each relation
// independently with probability `density`, weights uniform in (0, 1].
inline hetss::HetGraph random_multiplex(std::mt19937_64& rng, int n, double density) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    hetss::HetGraph g;
    g.node_count = n;
    for (auto& rel : g.relations) {
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                if (i != j && u(rng) < density) {
                    rel.edges.push_back({i, j, 1.0 - u(rng)});
                }
            }
        }
        rel.canonicalize();
    }
    return g;
}

} // namespace testutil
