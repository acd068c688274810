#pragma once

#include "hetss/config.hpp"
#include "hetss/image.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace hetss::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitFailure = 2; // divergence or a failed check

/// Defaults, then the config file (if any), then explicit flags.
TrainConfig resolve_config(const std::optional<std::filesystem::path>& file,
                           const std::map<std::string, std::string>& flags);

struct NamedScene {
    std::string name;
    ScenePair scene;
};

/// A single scene directory (holding pan.hsif) or a directory of them, sorted by name.
std::vector<NamedScene> load_dataset(const std::filesystem::path& dir, int scale = 4);

/// Entry point for the `hetss` tool. Subcommands: synth, train, eval, infer, patterns-dump,
/// grad-check, analyze-priors, bench.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace hetss::cli
