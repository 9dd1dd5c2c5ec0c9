#include "splat/adc.hpp"

#include "splat/activations.hpp"
#include "splat/covariance.hpp"
#include "splat/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace splat {

AdcState AdcState::zeros(std::size_t n) {
    AdcState s;
    s.max_alpha_grad.assign(n, 0.0);
    s.pos_grad_accum.assign(n, 0.0);
    s.pos_grad_count.assign(n, 0);
    return s;
}

void AdcState::reset() {
    std::fill(max_alpha_grad.begin(), max_alpha_grad.end(), 0.0);
    std::fill(pos_grad_accum.begin(), pos_grad_accum.end(), 0.0);
    std::fill(pos_grad_count.begin(), pos_grad_count.end(), 0);
}

void AdcState::append_rows(std::size_t count) {
    max_alpha_grad.resize(max_alpha_grad.size() + count, 0.0);
    pos_grad_accum.resize(pos_grad_accum.size() + count, 0.0);
    pos_grad_count.resize(pos_grad_count.size() + count, 0);
}

void AdcState::compact(const std::vector<uint8_t>& keep) {
    if (keep.size() != size()) throw ValidationError("AdcState::compact: mask length mismatch");
    std::size_t out = 0;
    for (std::size_t i = 0; i < keep.size(); ++i) {
        if (!keep[i]) continue;
        max_alpha_grad[out] = max_alpha_grad[i];
        pos_grad_accum[out] = pos_grad_accum[i];
        pos_grad_count[out] = pos_grad_count[i];
        ++out;
    }
    max_alpha_grad.resize(out);
    pos_grad_accum.resize(out);
    pos_grad_count.resize(out);
}

AdcConfig AdcConfig::proposed_defaults() {
    return AdcConfig{};
}

AdcConfig AdcConfig::baseline_defaults() {
    AdcConfig c;
    c.mode = DensifyMode::Baseline;
    c.prune_start = 500;
    c.tau_prune = 0.005;
    return c;
}

void AdcConfig::validate() const {
    if (prune_start < 0) throw ValidationError("AdcConfig: prune_start must be >= 0");
    if (!(tau_prune > 0.0 && tau_prune < 1.0)) {
        throw ValidationError("AdcConfig: tau_prune must be in (0, 1)");
    }
    if (n_max < 1) throw ValidationError("AdcConfig: n_max must be >= 1");
    if (!(tau_densify > 0.0)) throw ValidationError("AdcConfig: tau_densify must be > 0");
    if (split_count != 2) throw ValidationError("AdcConfig: split_count must be 2");
    if (!(split_scale_divisor > 0.0)) {
        throw ValidationError("AdcConfig: split_scale_divisor must be > 0");
    }
}

void track_max_alpha(AdcState& state, std::span<const double> alpha_grads) {
    if (alpha_grads.size() != state.size()) {
        throw ValidationError("track_max_alpha: gradient length " +
                              std::to_string(alpha_grads.size()) + " != state length " +
                              std::to_string(state.size()));
    }
    for (std::size_t i = 0; i < alpha_grads.size(); ++i) {
        const double g = std::abs(alpha_grads[i]);
        if (g > state.max_alpha_grad[i]) state.max_alpha_grad[i] = g;
    }
}

void track_positional(AdcState& state, std::span<const double> norms,
                      std::span<const uint8_t> visible) {
    if (norms.size() != state.size() || visible.size() != state.size()) {
        throw ValidationError("track_positional: length mismatch");
    }
    for (std::size_t i = 0; i < norms.size(); ++i) {
        if (!visible[i]) continue;
        state.pos_grad_accum[i] += norms[i];
        state.pos_grad_count[i] += 1;
    }
}

std::vector<int> select_densify(const AdcState& state, const AdcConfig& config) {
    std::vector<int> out;
    for (std::size_t i = 0; i < state.size(); ++i) {
        if (state.max_alpha_grad[i] > config.tau_densify) out.push_back(static_cast<int>(i));
    }
    return out;
}

std::vector<int> baseline_select_densify(const AdcState& state, const AdcConfig& config) {
    std::vector<int> out;
    for (std::size_t i = 0; i < state.size(); ++i) {
        if (state.pos_grad_count[i] <= 0) continue;
        const double mean = state.pos_grad_accum[i] / state.pos_grad_count[i];
        if (mean > config.tau_pos) out.push_back(static_cast<int>(i));
    }
    return out;
}

double clone_opacity_correction(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw DomainError("clone_opacity_correction: alpha " + std::to_string(alpha) +
                          " outside (0, 1)");
    }
    return 1.0 - std::sqrt(1.0 - alpha);
}

DensifyResult densify(GaussianCloud& cloud, OptimizerState& opt, AdcState& state,
                      const std::vector<int>& indices, const AdcConfig& config,
                      std::mt19937_64& rng) {
    config.validate();
    const std::size_t n = cloud.size();
    if (opt.size() != n || state.size() != n) {
        throw ValidationError("densify: cloud, optimizer, and state sizes disagree");
    }
    for (int idx : indices) {
        if (idx < 0 || static_cast<std::size_t>(idx) >= n) {
            throw ValidationError("densify: index " + std::to_string(idx) + " out of range");
        }
    }

    DensifyResult result;
    result.n_before = n;

    const double size_threshold = config.size_threshold;
    std::normal_distribution<double> normal(0.0, 1.0);
    auto sample_offset = [&](std::size_t row) {
        // Draw from the primitive's own 3D Gaussian: R * diag(s) * xi.
        const Vec4 q = normalize_quaternion(cloud.rotations[row]);
        const Vec3 scale = cloud.log_scales[row].array().exp();
        const Vec3 xi(normal(rng), normal(rng), normal(rng));
        return quaternion_to_rotation(q) * scale.cwiseProduct(xi).eval();
    };

    std::vector<uint8_t> keep(n, 1);
    GaussianCloud additions;

    for (int idx : indices) {
        const std::size_t row = static_cast<std::size_t>(idx);
        const Vec3 scale = cloud.log_scales[row].array().exp();
        const double max_scale = scale.maxCoeff();

        if (max_scale < size_threshold) {
            // Clone: duplicate, correct both opacities, nudge the copy.
            const double alpha = sigmoid(cloud.opacity_logits[row]);
            const double corrected = clone_opacity_correction(alpha);
            const double logit = inverse_opacity_activation(corrected);
            cloud.opacity_logits[row] = logit;
            const Vec3 offset = config.clone_jitter * sample_offset(row);
            additions.push_back(cloud.positions[row] + offset, cloud.log_scales[row],
                                cloud.rotations[row], logit, cloud.colors_raw[row]);
            ++result.clones;
        } else {
            // Split: parent replaced by two children sampled from it.
            const double log_div = std::log(config.split_scale_divisor);
            const Vec3 child_log_scale = (cloud.log_scales[row].array() - log_div).matrix();
            for (int child = 0; child < config.split_count; ++child) {
                additions.push_back(cloud.positions[row] + sample_offset(row), child_log_scale,
                                    cloud.rotations[row], cloud.opacity_logits[row],
                                    cloud.colors_raw[row]);
            }
            keep[row] = 0;
            ++result.splits;
        }
    }

    if (result.splits > 0) {
        cloud.compact(keep);
        optimizer_compact(opt, keep);
        state.compact(keep);
    }
    for (std::size_t i = 0; i < additions.size(); ++i) {
        cloud.push_back(additions.positions[i], additions.log_scales[i], additions.rotations[i],
                        additions.opacity_logits[i], additions.colors_raw[i]);
    }
    optimizer_insert_rows(opt, additions.size());
    state.append_rows(additions.size());

    // Accumulators restart after every densification pass.
    state.reset();

    result.n_after = cloud.size();
    return result;
}

namespace {

std::vector<int> remove_rows(GaussianCloud& cloud, OptimizerState& opt, AdcState& state,
                             const std::vector<uint8_t>& keep) {
    std::vector<int> removed;
    for (std::size_t i = 0; i < keep.size(); ++i) {
        if (!keep[i]) removed.push_back(static_cast<int>(i));
    }
    if (!removed.empty()) {
        cloud.compact(keep);
        optimizer_compact(opt, keep);
        state.compact(keep);
    }
    return removed;
}

} // namespace

std::vector<int> prune_transparent(GaussianCloud& cloud, OptimizerState& opt, AdcState& state,
                                   int iteration, const AdcConfig& config) {
    if (iteration < config.prune_start) return {};
    const std::size_t n = cloud.size();
    std::vector<uint8_t> keep(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
        if (sigmoid(cloud.opacity_logits[i]) < config.tau_prune) keep[i] = 0;
    }
    return remove_rows(cloud, opt, state, keep);
}

std::vector<int> enforce_budget(GaussianCloud& cloud, OptimizerState& opt, AdcState& state,
                                const AdcConfig& config) {
    const std::size_t n = cloud.size();
    if (n <= config.n_max) return {};
    const std::size_t excess = n - config.n_max;

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> alpha(n);
    for (std::size_t i = 0; i < n; ++i) alpha[i] = sigmoid(cloud.opacity_logits[i]);
    // Lowest opacity first; equal opacities drop the higher index first.
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (alpha[a] != alpha[b]) return alpha[a] < alpha[b];
        return a > b;
    });

    std::vector<uint8_t> keep(n, 1);
    for (std::size_t k = 0; k < excess; ++k) keep[order[k]] = 0;
    return remove_rows(cloud, opt, state, keep);
}

int opacity_reset(GaussianCloud& cloud, const AdcConfig& config) {
    const double value = config.opacity_reset_value;
    const double logit = inverse_opacity_activation(value);
    int lowered = 0;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (sigmoid(cloud.opacity_logits[i]) > value) {
            cloud.opacity_logits[i] = logit;
            ++lowered;
        }
    }
    return lowered;
}

} // namespace splat
