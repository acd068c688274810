#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace hetss {

enum class Ablation { Full, LocalOnly, GlobalOnly };
enum class Precision { Standard, High };

std::string to_string(Ablation a);
Ablation parse_ablation(const std::string& s);

/// Every training hyperparameter. Defaults follow the reference recipe: Adam(0.9, 0.999),
/// lr 1e-4 decayed by 0.85 every 3000 iterations, batch 4, gamma 0.01.
struct TrainConfig {
    double lr0 = 1e-4;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double decay = 0.85;
    int decay_every = 3000;
    int iters = 30000;
    int batch = 4;
    double gamma = 0.01;
    double tau = 0.5;
    int k = 8;
    int dim = 64;
    int layers = 2;
    int patch = 8;
    int stride = 4;
    std::uint64_t seed = 0;
    Precision precision = Precision::Standard;
    Ablation ablate = Ablation::Full;
    int checkpoint_every = 1000;

    /// Throws ValidationError on out-of-range values.
    void validate() const;
};

/// Keys accepted by apply_setting / config files, in declaration order.
const std::vector<std::string>& config_keys();

/// Sets one field from its textual value. Throws ValidationError on unknown keys or bad values.
void apply_setting(TrainConfig& cfg, const std::string& key, const std::string& value);

/// Parses `key = value` lines; `#` starts a comment, blank lines are skipped.
std::map<std::string, std::string> parse_config_text(const std::string& text);
std::map<std::string, std::string> read_config_file(const std::filesystem::path& path);

/// `key = value` rendering of every field (round-trips through parse_config_text).
std::string format_config(const TrainConfig& cfg);

} // namespace hetss
