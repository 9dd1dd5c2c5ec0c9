#pragma once

#include "splat/adam.hpp"
#include "splat/types.hpp"

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace splat {

/// Which signal triggers densification.
enum class DensifyMode {
    Proposed, // max |d loss / d activated opacity| tracked per primitive
    Baseline, // mean view-space positional gradient magnitude
};

/// Per-primitive accumulators driving density control.
struct AdcState {
    std::vector<double> max_alpha_grad; // running max |d loss / d alpha|
    std::vector<double> pos_grad_accum; // summed |d loss / d mean2d| (baseline)
    std::vector<int> pos_grad_count;    // observations behind pos_grad_accum

    static AdcState zeros(std::size_t n);

    std::size_t size() const { return max_alpha_grad.size(); }

    /// Clears every accumulator (performed after each densification pass).
    void reset();

    void append_rows(std::size_t count);
    void compact(const std::vector<uint8_t>& keep);
};

/// Schedule constants and thresholds of the density controller.
///
/// The proposed preset delays opacity pruning to iteration 2000 with
/// threshold 0.001; the baseline preset starts at 500 with threshold 0.005
/// and triggers on positional gradients instead of opacity gradients.
struct AdcConfig {
    DensifyMode mode = DensifyMode::Proposed;

    double tau_densify = 0.002;     // threshold on the tracked max opacity gradient
    bool use_logit_gradient = false; // experimental: threshold the raw-logit gradient
    int densify_interval = 100;
    int densify_start = 500;
    int densify_end = 8000;

    int prune_interval = 100;
    int prune_start = 2000;  // baseline preset: 500
    double tau_prune = 0.001; // baseline preset: 0.005

    std::size_t n_max = 32000; // hard primitive budget

    double size_threshold = 0.0; // max activated scale separating clone vs split;
                                 // <= 0 means auto (scene extent / 100)
    int split_count = 2;
    double split_scale_divisor = 1.6;
    double clone_jitter = 0.01; // scale of the sampled offset applied to clones

    double tau_pos = 0.0002; // baseline positional threshold (pixels)

    bool opacity_reset = false; // periodic opacity clamp-down of standard ADC
    int opacity_reset_interval = 3000;
    double opacity_reset_value = 0.01;

    static AdcConfig proposed_defaults();
    static AdcConfig baseline_defaults();

    void validate() const;

    bool is_densify_step(int iteration) const {
        return iteration >= densify_start && iteration <= densify_end &&
               densify_interval > 0 && iteration % densify_interval == 0;
    }
    bool is_prune_step(int iteration) const {
        return prune_interval > 0 && iteration % prune_interval == 0;
    }
};

/// Records one density-control event for the structured training log.
struct AdcEvent {
    std::string type;          // "densify", "prune_opacity", "prune_budget", "opacity_reset"
    std::vector<int> indices;  // affected rows (selection or removals)
    std::size_t n_before = 0;
    std::size_t n_after = 0;
    int clones = 0; // densify only
    int splits = 0; // densify only
};

/// Folds a backward pass's opacity gradients into the running maxima:
/// max_alpha_grad[i] = max(max_alpha_grad[i], |alpha_grads[i]|).
void track_max_alpha(AdcState& state, std::span<const double> alpha_grads);

/// Accumulates view-space positional gradient norms for visible primitives
/// (baseline trigger bookkeeping).
void track_positional(AdcState& state, std::span<const double> norms,
                      std::span<const uint8_t> visible);

/// Indices whose tracked max opacity gradient strictly exceeds tau_densify,
/// ascending.
std::vector<int> select_densify(const AdcState& state, const AdcConfig& config);

/// Indices whose mean positional gradient strictly exceeds tau_pos; rows with
/// no observations are never selected.
std::vector<int> baseline_select_densify(const AdcState& state, const AdcConfig& config);

/// Opacity assigned to both copies when cloning, chosen so the pair's
/// combined transparency matches the original: (1 - a) = (1 - result)^2.
double clone_opacity_correction(double alpha);

/// Outcome of one densification pass.
struct DensifyResult {
    int clones = 0;
    int splits = 0;
    std::size_t n_before = 0;
    std::size_t n_after = 0;
};

/// Clones small primitives (duplicating with corrected opacity and a small
/// sampled position offset) and splits large ones (two children sampled from
/// the parent, scales divided by split_scale_divisor). New optimizer rows are
/// zero-initialized and every accumulator is reset afterwards.
DensifyResult densify(GaussianCloud& cloud, OptimizerState& opt, AdcState& state,
                      const std::vector<int>& indices, const AdcConfig& config,
                      std::mt19937_64& rng);

/// Removes primitives with activated opacity below tau_prune, but only from
/// iteration prune_start onward. Returns removed row indices (pre-removal).
std::vector<int> prune_transparent(GaussianCloud& cloud, OptimizerState& opt, AdcState& state,
                                   int iteration, const AdcConfig& config);

/// Removes the lowest-opacity primitives until N <= n_max; ties remove the
/// higher index first. Returns removed row indices (pre-removal).
std::vector<int> enforce_budget(GaussianCloud& cloud, OptimizerState& opt, AdcState& state,
                                const AdcConfig& config);

/// Standard periodic opacity reset: alpha <- min(alpha, value), written back
/// through the logit. Returns the number of rows lowered.
int opacity_reset(GaussianCloud& cloud, const AdcConfig& config);

} // namespace splat
