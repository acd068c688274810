#include "hetss/image.hpp"

#include "hetss/error.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

namespace hetss {

namespace {

constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 30;
constexpr char kHsifMagic[4] = {'H', 'S', 'I', 'F'};

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xffu));
    }
}

std::uint32_t get_u32(std::span<const unsigned char> bytes, std::size_t offset) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        v |= static_cast<std::uint32_t>(bytes[offset + static_cast<std::size_t>(i)]) << (8 * i);
    }
    return v;
}

std::vector<unsigned char> slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ValidationError("cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const std::filesystem::path& path, std::span<const unsigned char> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw ValidationError("cannot write " + path.string());
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw ValidationError("write failed for " + path.string());
    }
}

unsigned char quantize8(float v) {
    const float c = std::clamp(std::isfinite(v) ? v : 0.0f, 0.0f, 1.0f);
    return static_cast<unsigned char>(std::lround(c * 255.0f));
}

} // namespace

Image::Image(int height, int width, int channels, float fill)
    : height_(height), width_(width), channels_(channels) {
    if (height < 0 || width < 0 || channels < 0) {
        throw ValidationError("negative image dimension");
    }
    data_.assign(static_cast<std::size_t>(height) * static_cast<std::size_t>(width) *
                     static_cast<std::size_t>(channels),
                 fill);
}

Image::Image(int height, int width, int channels, std::vector<float> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
    if (height < 0 || width < 0 || channels < 0) {
        throw ValidationError("negative image dimension");
    }
    if (data_.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width) *
                            static_cast<std::size_t>(channels)) {
        throw ValidationError("image data length does not match height*width*channels");
    }
}

Image Image::channel(int c) const {
    if (c < 0 || c >= channels_) {
        throw ValidationError("channel index out of range");
    }
    Image out(height_, width_, 1);
    for (int y = 0; y < height_; ++y) {
        for (int x = 0; x < width_; ++x) {
            out.at(y, x) = at(y, x, c);
        }
    }
    return out;
}

void Image::set_channel(int c, const Image& band) {
    if (c < 0 || c >= channels_ || band.channels() != 1 || band.height() != height_ || band.width() != width_) {
        throw ValidationError("set_channel: shape mismatch");
    }
    for (int y = 0; y < height_; ++y) {
        for (int x = 0; x < width_; ++x) {
            at(y, x, c) = band.at(y, x);
        }
    }
}

void Image::clamp01() {
    for (float& v : data_) {
        v = std::isnan(v) ? 0.0f : std::clamp(v, 0.0f, 1.0f);
    }
}

void ScenePair::validate() const {
    if (scale < 1) {
        throw ValidationError("scale must be >= 1");
    }
    if (pan.channels() != 1) {
        throw ValidationError("PAN must have exactly one channel");
    }
    if (lrms.channels() != 4) {
        throw ValidationError("LR-MS must have 4 channels");
    }
    if (pan.height() != scale * lrms.height() || pan.width() != scale * lrms.width()) {
        throw ValidationError("PAN size must equal scale x LR-MS size");
    }
    if (gt && (gt->channels() != 4 || gt->height() != pan.height() || gt->width() != pan.width())) {
        throw ValidationError("GT must be 4 channels at PAN size");
    }
}

std::vector<unsigned char> encode_hsif(const Image& img) {
    std::vector<unsigned char> out;
    out.reserve(16 + 4 * img.size());
    out.insert(out.end(), std::begin(kHsifMagic), std::end(kHsifMagic));
    put_u32(out, static_cast<std::uint32_t>(img.height()));
    put_u32(out, static_cast<std::uint32_t>(img.width()));
    put_u32(out, static_cast<std::uint32_t>(img.channels()));
    for (float v : img.data()) {
        put_u32(out, std::bit_cast<std::uint32_t>(v));
    }
    return out;
}

Image decode_hsif(std::span<const unsigned char> bytes) {
    if (bytes.size() < 4) {
        throw FormatError("truncated HSIF header", bytes.size());
    }
    if (std::memcmp(bytes.data(), kHsifMagic, 4) != 0) {
        throw FormatError("bad HSIF magic", 0);
    }
    if (bytes.size() < 16) {
        throw FormatError("truncated HSIF header", bytes.size());
    }
    const std::uint32_t h = get_u32(bytes, 4);
    const std::uint32_t w = get_u32(bytes, 8);
    const std::uint32_t c = get_u32(bytes, 12);
    const std::uint64_t count = std::uint64_t{h} * w * c;
    if (h == 0 || w == 0 || c == 0 || h > (1u << 20) || w > (1u << 20) || c > 1024 || count > kMaxElements) {
        throw FormatError("HSIF dimensions out of range", 4);
    }
    const std::uint64_t need = 16 + 4 * count;
    if (bytes.size() < need) {
        throw FormatError("truncated HSIF payload", bytes.size());
    }
    if (bytes.size() > need) {
        throw FormatError("trailing bytes after HSIF payload", need);
    }
    std::vector<float> data(static_cast<std::size_t>(count));
    for (std::size_t i = 0; i < data.size(); ++i) {
        const std::size_t off = 16 + 4 * i;
        const float v = std::bit_cast<float>(get_u32(bytes, off));
        if (!std::isfinite(v)) {
            throw FormatError("non-finite HSIF value", off);
        }
        if (v < 0.0f || v > 1.0f) {
            throw FormatError("HSIF value outside [0,1]", off);
        }
        data[i] = v;
    }
    return Image(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c), std::move(data));
}

Image read_hsif(const std::filesystem::path& path) {
    const auto bytes = slurp(path);
    return decode_hsif(bytes);
}

void write_hsif(const std::filesystem::path& path, const Image& img) {
    spit(path, encode_hsif(img));
}

Image read_pnm(const std::filesystem::path& path) {
    const auto bytes = slurp(path);
    std::size_t pos = 0;
    auto next_token = [&]() -> std::string {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') {
                    ++pos;
                }
            } else if (std::isspace(bytes[pos])) {
                ++pos;
            } else {
                break;
            }
        }
        std::string tok;
        while (pos < bytes.size() && !std::isspace(bytes[pos])) {
            tok.push_back(static_cast<char>(bytes[pos++]));
        }
        if (tok.empty()) {
            throw FormatError("truncated PNM header", pos);
        }
        return tok;
    };
    const std::string magic = next_token();
    int channels = 0;
    if (magic == "P5") {
        channels = 1;
    } else if (magic == "P6") {
        channels = 3;
    } else {
        throw FormatError("bad PNM magic", 0);
    }
    int w = 0;
    int h = 0;
    int maxval = 0;
    try {
        w = std::stoi(next_token());
        h = std::stoi(next_token());
        maxval = std::stoi(next_token());
    } catch (const std::logic_error&) {
        throw FormatError("malformed PNM header", pos);
    }
    if (w <= 0 || h <= 0 || maxval != 255) {
        throw FormatError("unsupported PNM geometry or depth", pos);
    }
    ++pos; // single whitespace before raster
    const std::size_t count = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * channels;
    if (bytes.size() < pos + count) {
        throw FormatError("truncated PNM payload", bytes.size());
    }
    std::vector<float> data(count);
    for (std::size_t i = 0; i < count; ++i) {
        data[i] = static_cast<float>(bytes[pos + i]) / 255.0f;
    }
    return Image(h, w, channels, std::move(data));
}

void write_pgm(const std::filesystem::path& path, const Image& img) {
    if (img.channels() != 1) {
        throw ValidationError("PGM output needs a single-channel image");
    }
    std::ostringstream header;
    header << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
    const std::string hs = header.str();
    std::vector<unsigned char> out(hs.begin(), hs.end());
    for (float v : img.data()) {
        out.push_back(quantize8(v));
    }
    spit(path, out);
}

void write_ppm(const std::filesystem::path& path, const Image& img, int c0, int c1, int c2) {
    for (int c : {c0, c1, c2}) {
        if (c < 0 || c >= img.channels()) {
            throw ValidationError("PPM band index out of range");
        }
    }
    std::ostringstream header;
    header << "P6\n" << img.width() << ' ' << img.height() << "\n255\n";
    const std::string hs = header.str();
    std::vector<unsigned char> out(hs.begin(), hs.end());
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            for (int c : {c0, c1, c2}) {
                out.push_back(quantize8(img.at(y, x, c)));
            }
        }
    }
    spit(path, out);
}

ScenePair read_scene(const std::filesystem::path& dir, int scale) {
    ScenePair scene;
    scene.scale = scale;
    scene.pan = read_hsif(dir / "pan.hsif");
    scene.lrms = read_hsif(dir / "lrms.hsif");
    if (std::filesystem::exists(dir / "gt.hsif")) {
        scene.gt = read_hsif(dir / "gt.hsif");
    }
    scene.validate();
    return scene;
}

void write_scene(const std::filesystem::path& dir, const ScenePair& scene) {
    std::filesystem::create_directories(dir);
    write_hsif(dir / "pan.hsif", scene.pan);
    write_hsif(dir / "lrms.hsif", scene.lrms);
    if (scene.gt) {
        write_hsif(dir / "gt.hsif", *scene.gt);
    }
}

} // namespace hetss
