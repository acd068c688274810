#include "hetss/patches.hpp"

#include "hetss/error.hpp"

#include <algorithm>

namespace hetss {

int patch_count(int len, int patch, int stride) {
    return (len - patch) / stride + 1;
}

std::vector<int> PatchGrid::coverage() const {
    std::vector<int> cover(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), 0);
    for (int i = 0; i < count(); ++i) {
        const int oy = origin_y(i);
        const int ox = origin_x(i);
        for (int y = 0; y < patch; ++y) {
            for (int x = 0; x < patch; ++x) {
                ++cover[static_cast<std::size_t>(oy + y) * width + static_cast<std::size_t>(ox + x)];
            }
        }
    }
    return cover;
}

PatchGrid PatchGrid::geometry() const {
    PatchGrid g = *this;
    g.values.clear();
    return g;
}

PatchGrid extract_patches(const Image& img, int patch, int stride) {
    if (patch < 1 || patch > std::min(img.height(), img.width())) {
        throw ValidationError("patch size must be in [1, min(height, width)]");
    }
    if (stride < 1 || stride > patch) {
        throw ValidationError("stride must be in [1, patch]");
    }
    PatchGrid g;
    g.patch = patch;
    g.stride = stride;
    g.rows = patch_count(img.height(), patch, stride);
    g.cols = patch_count(img.width(), patch, stride);
    g.height = img.height();
    g.width = img.width();
    g.channels = img.channels();
    g.values.resize(static_cast<std::size_t>(g.count()) * static_cast<std::size_t>(g.patch_len()));

    std::size_t k = 0;
    for (int i = 0; i < g.count(); ++i) {
        const int oy = g.origin_y(i);
        const int ox = g.origin_x(i);
        for (int y = 0; y < patch; ++y) {
            for (int x = 0; x < patch; ++x) {
                for (int c = 0; c < g.channels; ++c) {
                    g.values[k++] = img.at(oy + y, ox + x, c);
                }
            }
        }
    }
    return g;
}

Image reassemble_patches(const PatchGrid& grid, std::span<const float> patch_values) {
    if (patch_values.size() != static_cast<std::size_t>(grid.count()) * static_cast<std::size_t>(grid.patch_len())) {
        throw ValidationError("patch values do not match the grid shape");
    }
    std::vector<double> acc(static_cast<std::size_t>(grid.height) * grid.width * grid.channels, 0.0);
    std::size_t k = 0;
    for (int i = 0; i < grid.count(); ++i) {
        const int oy = grid.origin_y(i);
        const int ox = grid.origin_x(i);
        for (int y = 0; y < grid.patch; ++y) {
            for (int x = 0; x < grid.patch; ++x) {
                const std::size_t base =
                    (static_cast<std::size_t>(oy + y) * grid.width + static_cast<std::size_t>(ox + x)) * grid.channels;
                for (int c = 0; c < grid.channels; ++c) {
                    acc[base + static_cast<std::size_t>(c)] += patch_values[k++];
                }
            }
        }
    }
    const auto cover = grid.coverage();
    Image out(grid.height, grid.width, grid.channels);
    for (int y = 0; y < grid.height; ++y) {
        for (int x = 0; x < grid.width; ++x) {
            const int n = cover[static_cast<std::size_t>(y) * grid.width + static_cast<std::size_t>(x)];
            for (int c = 0; c < grid.channels; ++c) {
                const double v =
                    acc[(static_cast<std::size_t>(y) * grid.width + static_cast<std::size_t>(x)) * grid.channels +
                        static_cast<std::size_t>(c)];
                out.at(y, x, c) = n > 0 ? static_cast<float>(v / n) : 0.0f;
            }
        }
    }
    return out;
}

} // namespace hetss
