#pragma once

#include "hetss/image.hpp"

#include <span>
#include <vector>

namespace hetss {

/// Overlapping square patches laid out row-major over the source image.
/// Patch `i` holds p*p*channels values, pixel row-major and channel-last.
struct PatchGrid {
    int patch = 0;
    int stride = 0;
    int rows = 0;
    int cols = 0;
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<float> values;

    int count() const noexcept { return rows * cols; }
    int patch_len() const noexcept { return patch * patch * channels; }
    int origin_y(int i) const noexcept { return (i / cols) * stride; }
    int origin_x(int i) const noexcept { return (i % cols) * stride; }

    std::span<const float> patch_values(int i) const {
        return std::span<const float>(values).subspan(static_cast<std::size_t>(i) * patch_len(),
                                                      static_cast<std::size_t>(patch_len()));
    }

    /// Number of patches covering each pixel, row-major (height x width).
    std::vector<int> coverage() const;

    /// Geometry-only copy (values cleared), e.g. to reassemble predictions.
    PatchGrid geometry() const;
};

/// Patch count along an axis of length `len`.
int patch_count(int len, int patch, int stride);

PatchGrid extract_patches(const Image& img, int patch, int stride);

/// Overlap-average reassembly. `patch_values` must hold grid.count() * grid.patch_len() values.
Image reassemble_patches(const PatchGrid& grid, std::span<const float> patch_values);
inline Image reassemble_patches(const PatchGrid& grid) { return reassemble_patches(grid, grid.values); }

} // namespace hetss
