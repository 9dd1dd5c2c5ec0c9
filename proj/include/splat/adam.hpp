#pragma once

#include "splat/types.hpp"

#include <cstdint>
#include <vector>

namespace splat {

/// Per-group learning rates. The position rate decays exponentially from
/// `position` to `position_final` over `position_decay_steps` iterations;
/// all other groups are constant.
struct LearningRates {
    double position = 1.6e-4;
    double position_final = 1.6e-6;
    int64_t position_decay_steps = 10000;
    double opacity = 0.05;
    double scale = 5e-3;
    double rotation = 1e-3;
    double color = 2.5e-3;
};

/// Adam moments for every parameter group, plus a per-row step counter so
/// primitives born mid-training get correct bias correction.
struct OptimizerState {
    GradientBuffer m; // first moments, cloud-shaped
    GradientBuffer v; // second moments, cloud-shaped, >= 0
    std::vector<int64_t> steps;

    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-15;
    LearningRates lrs;

    static OptimizerState init(const GaussianCloud& cloud, const LearningRates& lrs = {});

    std::size_t size() const { return steps.size(); }

    /// Position learning rate at a global iteration (1-based).
    double position_lr(int64_t iteration) const;
};

/// One Adam update of every parameter group.
///
/// Moments always decay; a row's parameters only move in groups where its
/// gradient is nonzero, so untouched primitives stay put. Quaternions are
/// renormalized afterwards. Throws TrainingError on a non-finite gradient,
/// naming the offending group and row.
void adam_step(GaussianCloud& cloud, OptimizerState& state, const GradientBuffer& grads,
               int64_t iteration);

/// Appends `count` rows with zero moments and step counter 0.
void optimizer_insert_rows(OptimizerState& state, std::size_t count);

/// Keeps rows where keep[i] is true; surviving rows are bit-identical.
void optimizer_compact(OptimizerState& state, const std::vector<uint8_t>& keep);

} // namespace splat
