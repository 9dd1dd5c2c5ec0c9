#pragma once

#include "splat/adc.hpp"
#include "splat/adam.hpp"
#include "splat/losses.hpp"
#include "splat/renderer.hpp"
#include "splat/types.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace splat {

enum class ViewSampling {
    RoundRobin, // one training view per iteration, cycled in order
    All,        // every training view per iteration, losses averaged
};

/// Everything a training run needs besides the scene itself.
struct TrainConfig {
    int max_iterations = 10000;
    uint64_t seed = 0;
    int eval_interval = 500;
    ViewSampling view_sampling = ViewSampling::RoundRobin;
    Vec3 background = Vec3::Zero();
    int threads = 0; // 0 = hardware concurrency

    LossWeights weights;
    AdcConfig adc;
    LearningRates lrs;
    int64_t position_decay_steps = 0; // 0 = decay over max_iterations
    RenderOptions render_options;

    void validate() const;
};

/// Parses a flat "key = value" config file (with '#' comments). Unspecified
/// keys keep their defaults; `adc.mode = baseline` swaps in the baseline
/// schedule defaults before explicit keys apply. Unknown keys and malformed
/// values raise ParseError naming the key.
TrainConfig parse_config(const std::filesystem::path& path);

/// Applies "key=value" override strings on top of an existing config.
void apply_config_overrides(TrainConfig& config, const std::vector<std::string>& overrides);

/// Serializes every key; parse(serialize(c)) == serialize-stable.
std::string serialize_config(const TrainConfig& config);
void write_config(const TrainConfig& config, const std::filesystem::path& path);

} // namespace splat
