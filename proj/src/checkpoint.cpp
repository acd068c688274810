#include "hetss/checkpoint.hpp"

#include "hetss/error.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

namespace hetss {

namespace {

constexpr char kMagic[4] = {'H', 'S', 'S', 'N'};

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xffu));
    }
}

void put_f64(std::vector<unsigned char>& out, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) {
        out.push_back(static_cast<unsigned char>((bits >> (8 * i)) & 0xffu));
    }
}

void put_block(std::vector<unsigned char>& out, const std::string& name, const Eigen::MatrixXd& m) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put_u32(out, static_cast<std::uint32_t>(m.rows()));
    put_u32(out, static_cast<std::uint32_t>(m.cols()));
    put_u32(out, 1);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        put_f64(out, m.data()[i]);
    }
}

class Reader {
public:
    explicit Reader(std::span<const unsigned char> bytes) : bytes_(bytes) {}

    std::size_t pos() const noexcept { return pos_; }
    bool done() const noexcept { return pos_ == bytes_.size(); }

    void need(std::size_t n, const char* what) const {
        if (bytes_.size() - pos_ < n) {
            throw FormatError(std::string("truncated checkpoint ") + what, bytes_.size());
        }
    }

    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(bytes_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
        }
        pos_ += 4;
        return v;
    }

    double f64() {
        need(8, "payload");
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) {
            v |= static_cast<std::uint64_t>(bytes_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
        }
        pos_ += 8;
        return std::bit_cast<double>(v);
    }

    std::string str(std::size_t n) {
        need(n, "block name");
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }

private:
    std::span<const unsigned char> bytes_;
    std::size_t pos_ = 0;
};

} // namespace

std::vector<unsigned char> encode_checkpoint(const ModelParams& params) {
    std::vector<unsigned char> out(std::begin(kMagic), std::end(kMagic));
    put_u32(out, kCheckpointVersion);
    std::uint32_t blocks = 1;
    params.for_each([&](const std::string&, Eigen::Ref<const Eigen::MatrixXd>) { ++blocks; });
    put_u32(out, blocks);
    Eigen::MatrixXd hyper(1, 5);
    hyper << params.patch, params.stride, params.k, params.tau, params.gamma;
    put_block(out, "hyper", hyper);
    params.for_each([&](const std::string& name, Eigen::Ref<const Eigen::MatrixXd> m) { put_block(out, name, m); });
    return out;
}

ModelParams decode_checkpoint(std::span<const unsigned char> bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw FormatError("bad checkpoint magic", 0);
    }
    Reader in(bytes.subspan(0));
    in.str(4);
    const std::size_t version_at = in.pos();
    if (in.u32("version") != kCheckpointVersion) {
        throw FormatError("unsupported checkpoint version", version_at);
    }
    const std::uint32_t count = in.u32("block count");
    std::map<std::string, Eigen::MatrixXd> blocks;
    for (std::uint32_t b = 0; b < count; ++b) {
        const std::size_t at = in.pos();
        const std::uint32_t len = in.u32("name length");
        if (len == 0 || len > 256) {
            throw FormatError("bad block name length", at);
        }
        const std::string name = in.str(len);
        const std::size_t dims_at = in.pos();
        const std::uint32_t rows = in.u32("dims");
        const std::uint32_t cols = in.u32("dims");
        const std::uint32_t chans = in.u32("dims");
        if (chans != 1 || rows > (1u << 16) || cols > (1u << 16)) {
            throw FormatError("bad block dimensions for " + name, dims_at);
        }
        in.need(8ull * rows * cols, "payload");
        Eigen::MatrixXd m(rows, cols);
        for (Eigen::Index i = 0; i < m.size(); ++i) {
            const std::size_t off = in.pos();
            m.data()[i] = in.f64();
            if (!std::isfinite(m.data()[i])) {
                throw FormatError("non-finite checkpoint value in " + name, off);
            }
        }
        if (!blocks.emplace(name, std::move(m)).second) {
            throw FormatError("duplicate checkpoint block " + name, at);
        }
    }
    if (!in.done()) {
        throw FormatError("trailing bytes after checkpoint", in.pos());
    }

    auto take = [&](const std::string& name) {
        const auto it = blocks.find(name);
        if (it == blocks.end()) {
            throw FormatError("checkpoint is missing block " + name, bytes.size());
        }
        Eigen::MatrixXd m = std::move(it->second);
        blocks.erase(it);
        return m;
    };

    ModelParams p;
    const Eigen::MatrixXd hyper = take("hyper");
    if (hyper.size() != 5) {
        throw FormatError("bad hyper block", bytes.size());
    }
    p.patch = static_cast<int>(hyper(0));
    p.stride = static_cast<int>(hyper(1));
    p.k = static_cast<int>(hyper(2));
    p.tau = hyper(3);
    p.gamma = hyper(4);
    p.embed_pan = take("embed_pan");
    for (int b = 0; b < kBands; ++b) {
        p.embed_band[static_cast<std::size_t>(b)] = take("embed_band." + std::to_string(b));
    }
    p.alpha = take("alpha");
    p.beta = take("beta");
    for (int i = 0; blocks.count("w_local." + std::to_string(i)) != 0; ++i) {
        p.w_local.push_back(take("w_local." + std::to_string(i)));
    }
    for (int i = 0; blocks.count("w_global." + std::to_string(i)) != 0; ++i) {
        p.w_global.push_back(take("w_global." + std::to_string(i)));
    }
    for (int b = 0; b < kBands; ++b) {
        p.recon[static_cast<std::size_t>(b)] = take("recon." + std::to_string(b));
    }
    if (!blocks.empty()) {
        throw FormatError("unknown checkpoint block " + blocks.begin()->first, bytes.size());
    }

    const int d = p.dim();
    const int p2 = p.patch * p.patch;
    bool ok = p.patch >= 1 && p.stride >= 1 && p.k >= 1 && p.tau > 0.0 && p.gamma >= 0.0 && d >= 1 &&
              p.embed_pan.cols() == p2 && p.alpha.size() == kMaxPatterns && p.beta.size() == kMaxPatterns &&
              !p.w_local.empty() && p.w_local.size() == p.w_global.size();
    for (const auto& w : p.embed_band) {
        ok = ok && w.rows() == d && w.cols() == p2;
    }
    for (const auto& w : p.w_local) {
        ok = ok && w.rows() == d && w.cols() == d;
    }
    for (const auto& w : p.w_global) {
        ok = ok && w.rows() == d && w.cols() == d;
    }
    for (const auto& r : p.recon) {
        ok = ok && r.rows() == p2 && r.cols() == 2 * d;
    }
    if (!ok) {
        throw FormatError("inconsistent checkpoint tensor shapes", bytes.size());
    }
    return p;
}

void write_checkpoint(const std::filesystem::path& path, const ModelParams& params) {
    const auto bytes = encode_checkpoint(params);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw ValidationError("cannot write " + path.string());
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw ValidationError("write failed for " + path.string());
    }
}

ModelParams read_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ValidationError("cannot open " + path.string());
    }
    const std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    return decode_checkpoint(bytes);
}

} // namespace hetss
