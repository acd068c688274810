#include "hetss/config.hpp"

#include "hetss/error.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace hetss {

std::string to_string(Ablation a) {
    switch (a) {
    case Ablation::LocalOnly:
        return "local-only";
    case Ablation::GlobalOnly:
        return "global-only";
    case Ablation::Full:
        break;
    }
    return "full";
}

Ablation parse_ablation(const std::string& s) {
    if (s == "full") {
        return Ablation::Full;
    }
    if (s == "local-only") {
        return Ablation::LocalOnly;
    }
    if (s == "global-only") {
        return Ablation::GlobalOnly;
    }
    throw ValidationError("unknown ablation '" + s + "' (expected full, local-only or global-only)");
}

void TrainConfig::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) {
            throw ValidationError(what);
        }
    };
    require(lr0 > 0.0, "lr0 must be positive");
    require(adam_beta1 >= 0.0 && adam_beta1 < 1.0, "adam_beta1 must be in [0,1)");
    require(adam_beta2 >= 0.0 && adam_beta2 < 1.0, "adam_beta2 must be in [0,1)");
    require(adam_eps > 0.0, "adam_eps must be positive");
    require(decay > 0.0 && decay <= 1.0, "decay must be in (0,1]");
    require(decay_every >= 1, "decay_every must be >= 1");
    require(iters >= 0, "iters must be >= 0");
    require(batch >= 1, "batch must be >= 1");
    require(gamma >= 0.0, "gamma must be >= 0");
    require(tau > 0.0, "tau must be positive");
    require(k >= 1, "k must be >= 1");
    require(dim >= 1, "dim must be >= 1");
    require(layers >= 1, "layers must be >= 1");
    require(patch >= 1, "patch must be >= 1");
    require(stride >= 1 && stride <= patch, "stride must be in [1, patch]");
    require(checkpoint_every >= 1, "checkpoint_every must be >= 1");
}

namespace {

template <class T>
T parse_number(const std::string& key, const std::string& value) {
    T out{};
    const char* first = value.data();
    const char* last = value.data() + value.size();
    const auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc{} || ptr != last) {
        throw ValidationError("bad value '" + value + "' for " + key);
    }
    return out;
}

using Setter = std::function<void(TrainConfig&, const std::string&, const std::string&)>;

template <class T>
Setter number(T TrainConfig::*field) {
    return [field](TrainConfig& c, const std::string& k, const std::string& v) { c.*field = parse_number<T>(k, v); };
}

const std::vector<std::pair<std::string, Setter>>& setters() {
    static const std::vector<std::pair<std::string, Setter>> table = {
        {"lr0", number(&TrainConfig::lr0)},
        {"adam_beta1", number(&TrainConfig::adam_beta1)},
        {"adam_beta2", number(&TrainConfig::adam_beta2)},
        {"adam_eps", number(&TrainConfig::adam_eps)},
        {"decay", number(&TrainConfig::decay)},
        {"decay_every", number(&TrainConfig::decay_every)},
        {"iters", number(&TrainConfig::iters)},
        {"batch", number(&TrainConfig::batch)},
        {"gamma", number(&TrainConfig::gamma)},
        {"tau", number(&TrainConfig::tau)},
        {"k", number(&TrainConfig::k)},
        {"dim", number(&TrainConfig::dim)},
        {"layers", number(&TrainConfig::layers)},
        {"patch", number(&TrainConfig::patch)},
        {"stride", number(&TrainConfig::stride)},
        {"seed", number(&TrainConfig::seed)},
        {"precision",
         [](TrainConfig& c, const std::string& k, const std::string& v) {
             if (v == "standard") {
                 c.precision = Precision::Standard;
             } else if (v == "high") {
                 c.precision = Precision::High;
             } else {
                 throw ValidationError("bad value '" + v + "' for " + k);
             }
         }},
        {"ablate", [](TrainConfig& c, const std::string&, const std::string& v) { c.ablate = parse_ablation(v); }},
        {"checkpoint_every", number(&TrainConfig::checkpoint_every)},
    };
    return table;
}

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

} // namespace

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> out;
        for (const auto& [k, _] : setters()) {
            out.push_back(k);
        }
        return out;
    }();
    return keys;
}

void apply_setting(TrainConfig& cfg, const std::string& key, const std::string& value) {
    for (const auto& [k, set] : setters()) {
        if (k == key) {
            set(cfg, key, value);
            return;
        }
    }
    throw ValidationError("unknown config key '" + key + "'");
}

std::map<std::string, std::string> parse_config_text(const std::string& text) {
    std::map<std::string, std::string> out;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line.resize(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ValidationError("config line " + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw ValidationError("config line " + std::to_string(lineno) + ": empty key");
        }
        out[key] = value;
    }
    return out;
}

std::map<std::string, std::string> read_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open config " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

std::string format_config(const TrainConfig& cfg) {
    std::ostringstream out;
    out.precision(17);
    out << "lr0 = " << cfg.lr0 << '\n'
        << "adam_beta1 = " << cfg.adam_beta1 << '\n'
        << "adam_beta2 = " << cfg.adam_beta2 << '\n'
        << "adam_eps = " << cfg.adam_eps << '\n'
        << "decay = " << cfg.decay << '\n'
        << "decay_every = " << cfg.decay_every << '\n'
        << "iters = " << cfg.iters << '\n'
        << "batch = " << cfg.batch << '\n'
        << "gamma = " << cfg.gamma << '\n'
        << "tau = " << cfg.tau << '\n'
        << "k = " << cfg.k << '\n'
        << "dim = " << cfg.dim << '\n'
        << "layers = " << cfg.layers << '\n'
        << "patch = " << cfg.patch << '\n'
        << "stride = " << cfg.stride << '\n'
        << "seed = " << cfg.seed << '\n'
        << "precision = " << (cfg.precision == Precision::High ? "high" : "standard") << '\n'
        << "ablate = " << to_string(cfg.ablate) << '\n'
        << "checkpoint_every = " << cfg.checkpoint_every << '\n';
    return out.str();
}

} // namespace hetss
