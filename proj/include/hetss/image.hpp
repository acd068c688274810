#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace hetss {

/// Row-major, channel-last raster with values in [0,1].
class Image {
public:
    Image() = default;
    Image(int height, int width, int channels, float fill = 0.0f);
    Image(int height, int width, int channels, std::vector<float> data);

    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    int channels() const noexcept { return channels_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    float& at(int y, int x, int c = 0) { return data_[index(y, x, c)]; }
    float at(int y, int x, int c = 0) const { return data_[index(y, x, c)]; }

    std::span<float> data() noexcept { return data_; }
    std::span<const float> data() const noexcept { return data_; }

    /// Single-channel copy of band `c`.
    Image channel(int c) const;
    void set_channel(int c, const Image& band);

    /// Clamps every value into [0,1]; NaN becomes 0.
    void clamp01();

    bool same_shape(const Image& other) const noexcept {
        return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
    }

    friend bool operator==(const Image&, const Image&) = default;

private:
    std::size_t index(int y, int x, int c) const noexcept {
        return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x)) *
                   static_cast<std::size_t>(channels_) +
               static_cast<std::size_t>(c);
    }

    int height_ = 0;
    int width_ = 0;
    int channels_ = 0;
    std::vector<float> data_;
};

/// PAN + LR-MS input pair, with the HR-MS reference when one exists.
struct ScenePair {
    Image pan;
    Image lrms;
    std::optional<Image> gt;
    int scale = 4;

    /// Throws ValidationError when the sizes are inconsistent with `scale`.
    void validate() const;
};

// Native lossless format: "HSIF", u32 height, u32 width, u32 channels, f32 payload (all little-endian).
Image read_hsif(const std::filesystem::path& path);
void write_hsif(const std::filesystem::path& path, const Image& img);
Image decode_hsif(std::span<const unsigned char> bytes);
std::vector<unsigned char> encode_hsif(const Image& img);

// 8-bit previews. PGM (P5) holds one channel, PPM (P6) three.
Image read_pnm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const Image& img);
void write_ppm(const std::filesystem::path& path, const Image& img, int c0 = 0, int c1 = 1, int c2 = 2);

/// Reads `pan.hsif`, `lrms.hsif` and, if present, `gt.hsif` from a scene directory.
ScenePair read_scene(const std::filesystem::path& dir, int scale = 4);
void write_scene(const std::filesystem::path& dir, const ScenePair& scene);

} // namespace hetss
