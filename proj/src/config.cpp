#include "splat/config.hpp"

#include "splat/errors.hpp"

#include <charconv>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <utility>

namespace splat {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ParseError("config: key '" + key + "': expected a number, got '" + value + "'");
    }
}

int64_t parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ParseError("config: key '" + key + "': expected an integer, got '" + value + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ParseError("config: key '" + key + "': expected true/false, got '" + value + "'");
}

Vec3 parse_vec3(const std::string& key, const std::string& value) {
    std::istringstream ss(value);
    std::string part;
    Vec3 v;
    int i = 0;
    while (std::getline(ss, part, ',')) {
        if (i >= 3) break;
        v[i++] = parse_double(key, trim(part));
    }
    if (i != 3) {
        throw ParseError("config: key '" + key + "': expected three comma-separated numbers");
    }
    return v;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}
std::string fmt(int64_t v) {
    return std::to_string(v);
}
std::string fmt(bool v) {
    return v ? "true" : "false";
}
std::string fmt(const Vec3& v) {
    return fmt(v.x()) + "," + fmt(v.y()) + "," + fmt(v.z());
}

struct KeyHandler {
    const char* key;
    std::function<void(TrainConfig&, const std::string&)> set;
    std::function<std::string(const TrainConfig&)> get;
};

const std::vector<KeyHandler>& handlers() {
    static const std::vector<KeyHandler> table = {
        {"max_iterations",
         [](TrainConfig& c, const std::string& v) {
             c.max_iterations = static_cast<int>(parse_int("max_iterations", v));
         },
         [](const TrainConfig& c) { return fmt(static_cast<int64_t>(c.max_iterations)); }},
        {"seed",
         [](TrainConfig& c, const std::string& v) {
             c.seed = static_cast<uint64_t>(parse_int("seed", v));
         },
         [](const TrainConfig& c) { return fmt(static_cast<int64_t>(c.seed)); }},
        {"eval_interval",
         [](TrainConfig& c, const std::string& v) {
             c.eval_interval = static_cast<int>(parse_int("eval_interval", v));
         },
         [](const TrainConfig& c) { return fmt(static_cast<int64_t>(c.eval_interval)); }},
        {"view_sampling",
         [](TrainConfig& c, const std::string& v) {
             if (v == "round_robin") {
                 c.view_sampling = ViewSampling::RoundRobin;
             } else if (v == "all") {
                 c.view_sampling = ViewSampling::All;
             } else {
                 throw ParseError("config: key 'view_sampling': expected round_robin or all");
             }
         },
         [](const TrainConfig& c) {
             return std::string(c.view_sampling == ViewSampling::RoundRobin ? "round_robin"
                                                                            : "all");
         }},
        {"background",
         [](TrainConfig& c, const std::string& v) { c.background = parse_vec3("background", v); },
         [](const TrainConfig& c) { return fmt(c.background); }},
        {"threads",
         [](TrainConfig& c, const std::string& v) {
             c.threads = static_cast<int>(parse_int("threads", v));
         },
         [](const TrainConfig& c) { return fmt(static_cast<int64_t>(c.threads)); }},

        {"loss.lambda",
         [](TrainConfig& c, const std::string& v) {
             c.weights.lambda = parse_double("loss.lambda", v);
         },
         [](const TrainConfig& c) { return fmt(c.weights.lambda); }},
        {"loss.w_depth",
         [](TrainConfig& c, const std::string& v) {
             c.weights.w_depth = parse_double("loss.w_depth", v);
         },
         [](const TrainConfig& c) { return fmt(c.weights.w_depth); }},

        {"adc.mode",
         [](TrainConfig& c, const std::string& v) {
             if (v == "proposed") {
                 c.adc.mode = DensifyMode::Proposed;
             } else if (v == "baseline") {
                 c.adc.mode = DensifyMode::Baseline;
             } else {
                 throw ParseError("config: key 'adc.mode': expected proposed or baseline");
             }
         },
         [](const TrainConfig& c) {
             return std::string(c.adc.mode == DensifyMode::Proposed ? "proposed" : "baseline");
         }},
        {"adc.tau_densify",
         [](TrainConfig& c, const std::string& v) {
             c.adc.tau_densify = parse_double("adc.tau_densify", v);
         },
         [](const TrainConfig& c) { return fmt(c.adc.tau_densify); }},
        {"adc.use_logit_gradient",
         [](TrainConfig& c, const std::string& v) {
             c.adc.use_logit_gradient = parse_bool("adc.use_logit_gradient", v);
         },
         [](const TrainConfig& c) { return fmt(c.adc.use_logit_gradient); }},
        {"adc.densify_interval",
         [](TrainConfig& c, const std::string& v) {
             c.adc.densify_interval = static_cast<int>(parse_int("adc.densify_interval", v));
         },
         [](const TrainConfig& c) { return fmt(static_cast<int64_t>(c.adc.densify_interval)); }},
        {"adc.densify_start",
         [](TrainConfig& c, const std::string& v) {
             c.adc.densify_start = static_cast<int>(parse_int("adc.densify_start", v));
         },
         [](const TrainConfig& c) { return fmt(static_cast<int64_t>(c.adc.densify_start)); }},
        {"adc.densify_end",
         [](TrainConfig& c, const std::string& v) {
             c.adc.densify_end = static_cast<int>(parse_int("adc.densify_end", v));
         },
         [](const TrainConfig& c) { return fmt(static_cast<int64_t>(c.adc.densify_end)); }},
        {"adc.prune_interval",
         [](TrainConfig& c, const std::string& v) {
             c.adc.prune_interval = static_cast<int>(parse_int("adc.prune_interval", v));
         },
         [](const TrainConfig& c) { return fmt(static_cast<int64_t>(c.adc.prune_interval)); }},
        {"adc.prune_start",
         [](TrainConfig& c, const std::string& v) {
             c.adc.prune_start = static_cast<int>(parse_int("adc.prune_start", v));
         },
         [](const TrainConfig& c) { return fmt(static_cast<int64_t>(c.adc.prune_start)); }},
        {"adc.tau_prune",
         [](TrainConfig& c, const std::string& v) {
             c.adc.tau_prune = parse_double("adc.tau_prune", v);
         },
         [](const TrainConfig& c) { return fmt(c.adc.tau_prune); }},
        {"adc.n_max",
         [](TrainConfig& c, const std::string& v) {
             c.adc.n_max = static_cast<std::size_t>(parse_int("adc.n_max", v));
         },
         [](const TrainConfig& c) { return fmt(static_cast<int64_t>(c.adc.n_max)); }},
        {"adc.size_threshold",
         [](TrainConfig& c, const std::string& v) {
             c.adc.size_threshold = parse_double("adc.size_threshold", v);
         },
         [](const TrainConfig& c) { return fmt(c.adc.size_threshold); }},
        {"adc.split_scale_divisor",
         [](TrainConfig& c, const std::string& v) {
             c.adc.split_scale_divisor = parse_double("adc.split_scale_divisor", v);
         },
         [](const TrainConfig& c) { return fmt(c.adc.split_scale_divisor); }},
        {"adc.clone_jitter",
         [](TrainConfig& c, const std::string& v) {
             c.adc.clone_jitter = parse_double("adc.clone_jitter", v);
         },
         [](const TrainConfig& c) { return fmt(c.adc.clone_jitter); }},
        {"adc.tau_pos",
         [](TrainConfig& c, const std::string& v) {
             c.adc.tau_pos = parse_double("adc.tau_pos", v);
         },
         [](const TrainConfig& c) { return fmt(c.adc.tau_pos); }},
        {"adc.opacity_reset",
         [](TrainConfig& c, const std::string& v) {
             c.adc.opacity_reset = parse_bool("adc.opacity_reset", v);
         },
         [](const TrainConfig& c) { return fmt(c.adc.opacity_reset); }},
        {"adc.opacity_reset_interval",
         [](TrainConfig& c, const std::string& v) {
             c.adc.opacity_reset_interval =
                 static_cast<int>(parse_int("adc.opacity_reset_interval", v));
         },
         [](const TrainConfig& c) {
             return fmt(static_cast<int64_t>(c.adc.opacity_reset_interval));
         }},
        {"adc.opacity_reset_value",
         [](TrainConfig& c, const std::string& v) {
             c.adc.opacity_reset_value = parse_double("adc.opacity_reset_value", v);
         },
         [](const TrainConfig& c) { return fmt(c.adc.opacity_reset_value); }},

        {"optim.lr_position",
         [](TrainConfig& c, const std::string& v) {
             c.lrs.position = parse_double("optim.lr_position", v);
         },
         [](const TrainConfig& c) { return fmt(c.lrs.position); }},
        {"optim.lr_position_final",
         [](TrainConfig& c, const std::string& v) {
             c.lrs.position_final = parse_double("optim.lr_position_final", v);
         },
         [](const TrainConfig& c) { return fmt(c.lrs.position_final); }},
        {"optim.position_decay_steps",
         [](TrainConfig& c, const std::string& v) {
             c.position_decay_steps = parse_int("optim.position_decay_steps", v);
         },
         [](const TrainConfig& c) { return fmt(c.position_decay_steps); }},
        {"optim.lr_opacity",
         [](TrainConfig& c, const std::string& v) {
             c.lrs.opacity = parse_double("optim.lr_opacity", v);
         },
         [](const TrainConfig& c) { return fmt(c.lrs.opacity); }},
        {"optim.lr_scale",
         [](TrainConfig& c, const std::string& v) {
             c.lrs.scale = parse_double("optim.lr_scale", v);
         },
         [](const TrainConfig& c) { return fmt(c.lrs.scale); }},
        {"optim.lr_rotation",
         [](TrainConfig& c, const std::string& v) {
             c.lrs.rotation = parse_double("optim.lr_rotation", v);
         },
         [](const TrainConfig& c) { return fmt(c.lrs.rotation); }},
        {"optim.lr_color",
         [](TrainConfig& c, const std::string& v) {
             c.lrs.color = parse_double("optim.lr_color", v);
         },
         [](const TrainConfig& c) { return fmt(c.lrs.color); }},

        {"render.alpha_clamp",
         [](TrainConfig& c, const std::string& v) {
             c.render_options.alpha_clamp = parse_double("render.alpha_clamp", v);
         },
         [](const TrainConfig& c) { return fmt(c.render_options.alpha_clamp); }},
        {"render.skip_threshold",
         [](TrainConfig& c, const std::string& v) {
             c.render_options.skip_threshold = parse_double("render.skip_threshold", v);
         },
         [](const TrainConfig& c) { return fmt(c.render_options.skip_threshold); }},
    };
    return table;
}

const KeyHandler* find_handler(const std::string& key) {
    for (const auto& h : handlers()) {
        if (key == h.key) return &h;
    }
    return nullptr;
}

void apply_pairs(TrainConfig& config,
                 const std::vector<std::pair<std::string, std::string>>& pairs) {
    // The mode preset applies first so explicit keys can override it.
    for (const auto& [key, value] : pairs) {
        if (key != "adc.mode") continue;
        const AdcConfig saved = config.adc;
        if (value == "baseline") {
            config.adc = AdcConfig::baseline_defaults();
        } else if (value == "proposed") {
            config.adc = AdcConfig::proposed_defaults();
        } else {
            throw ParseError("config: key 'adc.mode': expected proposed or baseline");
        }
        // Preserve non-preset fields already configured programmatically.
        config.adc.n_max = saved.n_max;
        config.adc.size_threshold = saved.size_threshold;
    }
    for (const auto& [key, value] : pairs) {
        if (key == "adc.mode") continue;
        const KeyHandler* h = find_handler(key);
        if (!h) throw ParseError("config: unknown key '" + key + "'");
        h->set(config, value);
    }
    config.validate();
}

std::vector<std::pair<std::string, std::string>> read_pairs(std::istream& in) {
    std::vector<std::pair<std::string, std::string>> pairs;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string stripped = trim(line);
        if (stripped.empty()) continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw ParseError("config: line " + std::to_string(line_no) +
                             ": expected 'key = value', got '" + stripped + "'");
        }
        pairs.emplace_back(trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
    }
    return pairs;
}

} // namespace

void TrainConfig::validate() const {
    if (max_iterations < 0) throw ValidationError("TrainConfig: max_iterations must be >= 0");
    if (eval_interval <= 0) throw ValidationError("TrainConfig: eval_interval must be > 0");
    weights.validate();
    adc.validate();
    if (!(render_options.alpha_clamp > 0.0 && render_options.alpha_clamp < 1.0)) {
        throw ValidationError("TrainConfig: render.alpha_clamp must be in (0, 1)");
    }
    if (!(render_options.skip_threshold >= 0.0 && render_options.skip_threshold < 1.0)) {
        throw ValidationError("TrainConfig: render.skip_threshold must be in [0, 1)");
    }
}

TrainConfig parse_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("parse_config: cannot open: " + path.string());
    TrainConfig config;
    apply_pairs(config, read_pairs(in));
    return config;
}

void apply_config_overrides(TrainConfig& config, const std::vector<std::string>& overrides) {
    std::vector<std::pair<std::string, std::string>> pairs;
    for (const std::string& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos) {
            throw ParseError("config override: expected key=value, got '" + o + "'");
        }
        pairs.emplace_back(trim(o.substr(0, eq)), trim(o.substr(eq + 1)));
    }
    apply_pairs(config, pairs);
}

std::string serialize_config(const TrainConfig& config) {
    std::ostringstream out;
    // adc.mode first: on re-parse the preset applies before explicit keys.
    const KeyHandler* mode = find_handler("adc.mode");
    out << "adc.mode = " << mode->get(config) << "\n";
    for (const auto& h : handlers()) {
        if (std::string(h.key) == "adc.mode") continue;
        out << h.key << " = " << h.get(config) << "\n";
    }
    return out.str();
}

void write_config(const TrainConfig& config, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw LoadError("write_config: cannot open for writing: " + path.string());
    out << serialize_config(config);
}

} // namespace splat
