#pragma once

#include "hetss/image.hpp"

#include <cstdint>

namespace hetss {

/// Deterministic synthetic 4-band scene of `size` x `size` pixels at scale 4.
///
/// Every band shares a common structure (Gaussian blobs, rectangles and fine
/// texture) with a band-specific gain/offset plus a weak band-only blob field,
/// so bands are positively correlated while keeping distinct spectra.
/// pan = band mean of gt; lrms = wald_degrade(gt).
ScenePair synth_scene(std::uint64_t seed, int size);

/// Tiny 4x8 scene (two 4x4 patches at stride 4) cropped from synth_scene(seed, 32).
ScenePair toy_scene(std::uint64_t seed);

/// Band mean of a multi-band image.
Image band_mean(const Image& img);

} // namespace hetss
