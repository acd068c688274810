#pragma once

#include "hetss/model.hpp"

#include <filesystem>
#include <span>
#include <vector>

namespace hetss {

// Checkpoint layout: "HSSN", u32 version, u32 block count, then per block
// u32 name length, name bytes, u32 rows, u32 cols, u32 1, rows*cols f64 values (column-major).
// All integers and values little-endian. A "hyper" block (1 x 5) stores patch, stride, k, tau, gamma.
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<unsigned char> encode_checkpoint(const ModelParams& params);
ModelParams decode_checkpoint(std::span<const unsigned char> bytes);

void write_checkpoint(const std::filesystem::path& path, const ModelParams& params);
ModelParams read_checkpoint(const std::filesystem::path& path);

} // namespace hetss
