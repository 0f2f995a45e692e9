#pragma once
// Flat key = value spec files with [section] headers. Comments (#) are
// dropped on parse; everything else round-trips through serialize.

#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "actiongram/orchestrator.hpp"

namespace actiongram {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigLine {
    enum class Kind { section, pair, blank };
    Kind kind = Kind::blank;
    std::string key;
    std::string value;
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace detail

struct ConfigDoc {
    std::vector<ConfigLine> lines;

    static ConfigDoc parse(std::istream& in) {
        ConfigDoc doc;
        std::string raw;
        int lineno = 0;
        while (std::getline(in, raw)) {
            ++lineno;
            std::string line = detail::trim(raw);
            if (!line.empty() && line[0] == '#') continue;
            ConfigLine entry;
            if (line.empty()) {
                entry.kind = ConfigLine::Kind::blank;
            } else if (line.front() == '[') {
                if (line.back() != ']')
                    throw ConfigError("line " + std::to_string(lineno) + ": unterminated section");
                entry.kind = ConfigLine::Kind::section;
                entry.key = detail::trim(line.substr(1, line.size() - 2));
                if (entry.key.empty())
                    throw ConfigError("line " + std::to_string(lineno) + ": empty section name");
            } else {
                std::size_t eq = line.find('=');
                if (eq == std::string::npos)
                    throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
                entry.kind = ConfigLine::Kind::pair;
                entry.key = detail::trim(line.substr(0, eq));
                entry.value = detail::trim(line.substr(eq + 1));
                if (entry.key.empty())
                    throw ConfigError("line " + std::to_string(lineno) + ": empty key");
                if (entry.value.empty())
                    throw ConfigError("line " + std::to_string(lineno) + ": empty value for '" +
                                      entry.key + "'");
            }
            doc.lines.push_back(std::move(entry));
        }
        return doc;
    }

    static ConfigDoc parse_text(const std::string& text) {
        std::istringstream in(text);
        return parse(in);
    }

    void serialize(std::ostream& os) const {
        for (const ConfigLine& l : lines) {
            switch (l.kind) {
                case ConfigLine::Kind::section: os << '[' << l.key << "]\n"; break;
                case ConfigLine::Kind::pair: os << l.key << " = " << l.value << '\n'; break;
                case ConfigLine::Kind::blank: os << '\n'; break;
            }
        }
    }

    std::string serialize_text() const {
        std::ostringstream os;
        serialize(os);
        return os.str();
    }
};

namespace detail {

inline long long config_int(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    long long out = 0;
    try {
        out = std::stoll(v, &used);
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': expected integer, got '" + v + "'");
    }
    if (used != v.size())
        throw ConfigError("key '" + key + "': expected integer, got '" + v + "'");
    return out;
}

inline double config_double(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    double out = 0.0;
    try {
        out = std::stod(v, &used);
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': expected number, got '" + v + "'");
    }
    if (used != v.size())
        throw ConfigError("key '" + key + "': expected number, got '" + v + "'");
    return out;
}

inline bool config_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "on" || v == "1") return true;
    if (v == "false" || v == "off" || v == "0") return false;
    throw ConfigError("key '" + key + "': expected boolean, got '" + v + "'");
}

inline bool valid_label(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-') return false;
    return true;
}

}  // namespace detail

inline CalculatorKind parse_calculator(const std::string& v) {
    if (v == "sequitur") return CalculatorKind::sequitur;
    if (v == "k" || v == "k_sequitur") return CalculatorKind::k_sequitur;
    if (v == "mdl") return CalculatorKind::mdl;
    throw ConfigError("unknown calculator '" + v + "'");
}

// Applies one run-configuration key. `base_dir` anchors relative map paths.
inline void apply_run_key(RunConfig& cfg, const std::string& key, const std::string& value,
                          const std::filesystem::path& base_dir) {
    using detail::config_bool;
    using detail::config_double;
    using detail::config_int;
    if (key == "env") {
        if (value == "hanoi") cfg.env = EnvKind::hanoi;
        else if (value == "grid") cfg.env = EnvKind::grid;
        else throw ConfigError("unknown env '" + value + "'");
    } else if (key == "hanoi_disks") {
        cfg.hanoi_disks = static_cast<int>(config_int(key, value));
    } else if (key == "hanoi_max_steps") {
        cfg.hanoi_max_steps = static_cast<int>(config_int(key, value));
    } else if (key == "map_file") {
        std::filesystem::path p(value);
        if (p.is_relative()) p = base_dir / p;
        std::ifstream in(p);
        if (!in) throw ConfigError("map_file '" + p.string() + "' not readable");
        std::ostringstream buf;
        buf << in.rdbuf();
        cfg.grid_map = buf.str();
    } else if (key == "step_penalty") {
        cfg.step_penalty = config_double(key, value);
    } else if (key == "estimator") {
        if (value == "tabular") cfg.estimator = EstimatorKind::tabular;
        else if (value == "linear") cfg.estimator = EstimatorKind::linear;
        else throw ConfigError("unknown estimator '" + value + "'");
    } else if (key == "gamma") {
        cfg.gamma = config_double(key, value);
    } else if (key == "alpha") {
        cfg.alpha = config_double(key, value);
    } else if (key == "eps_start") {
        cfg.eps_start = config_double(key, value);
    } else if (key == "eps_min") {
        cfg.eps_min = config_double(key, value);
    } else if (key == "eps_decay_steps") {
        cfg.eps_decay_steps = config_int(key, value);
    } else if (key == "batch_size") {
        cfg.batch_size = static_cast<int>(config_int(key, value));
    } else if (key == "target_refresh") {
        cfg.target_refresh = static_cast<int>(config_int(key, value));
    } else if (key == "initial_random_steps") {
        cfg.initial_random_steps = config_int(key, value);
    } else if (key == "buffer_capacity") {
        long long v = config_int(key, value);
        if (v < 1) throw ConfigError("buffer_capacity must be positive");
        cfg.buffer_capacity = static_cast<std::size_t>(v);
    } else if (key == "replay") {
        if (value == "balanced") cfg.replay = ReplayKind::balanced;
        else if (value == "uniform") cfg.replay = ReplayKind::uniform;
        else throw ConfigError("unknown replay kind '" + value + "'");
    } else if (key == "grammar_iterations") {
        cfg.grammar_iterations = static_cast<int>(config_int(key, value));
    } else if (key == "steps_before_grammar") {
        cfg.steps_before_grammar = config_int(key, value);
    } else if (key == "eval_period") {
        cfg.eval_period = static_cast<int>(config_int(key, value));
    } else if (key == "evaluation_episodes") {
        cfg.evaluation_episodes = static_cast<int>(config_int(key, value));
    } else if (key == "calculator") {
        cfg.calculator = parse_calculator(value);
    } else if (key == "k") {
        cfg.k = static_cast<int>(config_int(key, value));
    } else if (key == "har") {
        cfg.har = config_bool(key, value);
    } else if (key == "abandon_z") {
        if (value == "off") {
            cfg.abandon_enabled = false;
        } else {
            cfg.abandon_enabled = true;
            cfg.abandon_z = config_double(key, value);
        }
    } else if (key == "exploration_bonus") {
        cfg.exploration_bonus = config_double(key, value);
    } else if (key == "post_inference_random_steps") {
        cfg.post_inference_random_steps = config_int(key, value);
    } else if (key == "transfer_init") {
        cfg.transfer_init = config_bool(key, value);
    } else if (key == "total_steps") {
        cfg.total_steps = config_int(key, value);
    } else if (key == "early_stop_on_optimal") {
        cfg.early_stop_on_optimal = config_bool(key, value);
    } else if (key == "optimal_episode_length") {
        if (value == "auto") cfg.optimal_episode_length.reset();
        else cfg.optimal_episode_length = static_cast<int>(config_int(key, value));
    } else {
        throw ConfigError("unknown run key '" + key + "'");
    }
}

struct VariantSpec {
    std::string label;
    RunConfig config;
};

struct ExperimentSpec {
    std::vector<VariantSpec> variants;
    std::vector<std::uint64_t> seeds;
    std::string out_dir = "results";
    int parallelism = 0;  // 0 means one worker per seed

    // Builds the spec from a parsed document. Sections: [experiment] for
    // seeds/out_dir/parallelism, [run] for the shared base configuration,
    // [variant LABEL] for per-variant overrides of the base.
    static ExperimentSpec from_config(const ConfigDoc& doc,
                                      const std::filesystem::path& base_dir = ".") {
        ExperimentSpec spec;
        RunConfig base;
        bool seen_seeds = false;

        enum class Where { none, experiment, run, variant };
        Where where = Where::none;

        struct PendingVariant {
            std::string label;
            std::vector<std::pair<std::string, std::string>> overrides;
        };
        std::vector<PendingVariant> pending;

        for (const ConfigLine& l : doc.lines) {
            if (l.kind == ConfigLine::Kind::blank) continue;
            if (l.kind == ConfigLine::Kind::section) {
                if (l.key == "experiment") {
                    where = Where::experiment;
                } else if (l.key == "run") {
                    where = Where::run;
                } else if (l.key.rfind("variant ", 0) == 0) {
                    std::string label = detail::trim(l.key.substr(8));
                    if (!detail::valid_label(label))
                        throw ConfigError("bad variant label '" + label + "'");
                    pending.push_back({label, {}});
                    where = Where::variant;
                } else {
                    throw ConfigError("unknown section '" + l.key + "'");
                }
                continue;
            }
            switch (where) {
                case Where::none:
                    throw ConfigError("key '" + l.key + "' outside any section");
                case Where::experiment:
                    if (l.key == "seeds") {
                        spec.seeds = parse_seed_list(l.value);
                        seen_seeds = true;
                    } else if (l.key == "out_dir") {
                        spec.out_dir = l.value;
                    } else if (l.key == "parallelism") {
                        long long v = detail::config_int(l.key, l.value);
                        if (v < 0) throw ConfigError("parallelism must be >= 0");
                        spec.parallelism = static_cast<int>(v);
                    } else {
                        throw ConfigError("unknown experiment key '" + l.key + "'");
                    }
                    break;
                case Where::run: apply_run_key(base, l.key, l.value, base_dir); break;
                case Where::variant: pending.back().overrides.push_back({l.key, l.value}); break;
            }
        }

        if (!seen_seeds) throw ConfigError("experiment.seeds is required");
        if (spec.seeds.empty()) throw ConfigError("need at least one seed");

        if (pending.empty()) pending.push_back({"default", {}});
        std::set<std::string> labels;
        for (const PendingVariant& p : pending) {
            if (!labels.insert(p.label).second)
                throw ConfigError("duplicate variant label '" + p.label + "'");
            RunConfig cfg = base;
            for (const auto& [k, v] : p.overrides) apply_run_key(cfg, k, v, base_dir);
            try {
                cfg.validate();
            } catch (const std::invalid_argument& e) {
                throw ConfigError("variant '" + p.label + "': " + e.what());
            }
            spec.variants.push_back({p.label, std::move(cfg)});
        }
        return spec;
    }

    static std::vector<std::uint64_t> parse_seed_list(const std::string& v) {
        std::vector<std::uint64_t> seeds;
        if (!v.empty() && v.back() == ',') throw ConfigError("trailing comma in seed list");
        std::string item;
        std::istringstream in(v);
        while (std::getline(in, item, ',')) {
            item = detail::trim(item);
            if (item.empty()) throw ConfigError("empty seed in list '" + v + "'");
            std::size_t used = 0;
            unsigned long long s = 0;
            try {
                s = std::stoull(item, &used);
            } catch (const std::exception&) {
                throw ConfigError("bad seed '" + item + "'");
            }
            if (used != item.size()) throw ConfigError("bad seed '" + item + "'");
            seeds.push_back(s);
        }
        if (seeds.empty()) throw ConfigError("empty seed list");
        return seeds;
    }
};

}  // namespace actiongram
