#include "splat/adam.hpp"

#include "splat/covariance.hpp"
#include "splat/errors.hpp"

#include <cmath>
#include <string>

namespace splat {

OptimizerState OptimizerState::init(const GaussianCloud& cloud, const LearningRates& rates) {
    OptimizerState s;
    s.m = GradientBuffer::zeros(cloud.size());
    s.v = GradientBuffer::zeros(cloud.size());
    s.steps.assign(cloud.size(), 0);
    s.lrs = rates;
    return s;
}

double OptimizerState::position_lr(int64_t iteration) const {
    if (lrs.position_decay_steps <= 0 || lrs.position_final <= 0.0 || lrs.position <= 0.0) {
        return lrs.position;
    }
    double t = static_cast<double>(iteration) / static_cast<double>(lrs.position_decay_steps);
    t = std::clamp(t, 0.0, 1.0);
    return lrs.position * std::pow(lrs.position_final / lrs.position, t);
}

void adam_step(GaussianCloud& cloud, OptimizerState& state, const GradientBuffer& grads,
               int64_t iteration) {
    const std::size_t n = cloud.size();
    if (!grads.shapes_match(cloud) || state.steps.size() != n) {
        throw ValidationError("adam_step: shapes of cloud, state, and gradients disagree");
    }

    const double b1 = state.beta1;
    const double b2 = state.beta2;
    const double eps = state.epsilon;
    const double lr_pos = state.position_lr(iteration);

    auto check_finite = [](double g, const char* group, std::size_t row) {
        if (!std::isfinite(g)) {
            throw TrainingError(std::string("adam_step: non-finite gradient in group '") + group +
                                "' at row " + std::to_string(row));
        }
    };

    for (std::size_t i = 0; i < n; ++i) {
        const Vec3& gp = grads.positions[i];
        const Vec3& gs = grads.log_scales[i];
        const Vec4& gr = grads.rotations[i];
        const double go = grads.opacity_logits[i];
        const Vec3& gc = grads.colors_raw[i];
        for (int k = 0; k < 3; ++k) {
            check_finite(gp[k], "positions", i);
            check_finite(gs[k], "log_scales", i);
            check_finite(gc[k], "colors_raw", i);
        }
        for (int k = 0; k < 4; ++k) check_finite(gr[k], "rotations", i);
        check_finite(go, "opacity_logits", i);

        const int64_t t = ++state.steps[i];
        const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(b2, static_cast<double>(t));

        auto apply = [&](double& param, double g, double& m, double& v, double lr,
                         bool group_active) {
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            if (!group_active) return;
            const double m_hat = m / bc1;
            const double v_hat = v / bc2;
            param -= lr * m_hat / (std::sqrt(v_hat) + eps);
        };

        const bool pos_active = (gp.array() != 0.0).any();
        const bool scale_active = (gs.array() != 0.0).any();
        const bool rot_active = (gr.array() != 0.0).any();
        const bool op_active = go != 0.0;
        const bool col_active = (gc.array() != 0.0).any();

        for (int k = 0; k < 3; ++k) {
            apply(cloud.positions[i][k], gp[k], state.m.positions[i][k], state.v.positions[i][k],
                  lr_pos, pos_active);
            apply(cloud.log_scales[i][k], gs[k], state.m.log_scales[i][k],
                  state.v.log_scales[i][k], state.lrs.scale, scale_active);
            apply(cloud.colors_raw[i][k], gc[k], state.m.colors_raw[i][k],
                  state.v.colors_raw[i][k], state.lrs.color, col_active);
        }
        for (int k = 0; k < 4; ++k) {
            apply(cloud.rotations[i][k], gr[k], state.m.rotations[i][k], state.v.rotations[i][k],
                  state.lrs.rotation, rot_active);
        }
        apply(cloud.opacity_logits[i], go, state.m.opacity_logits[i], state.v.opacity_logits[i],
              state.lrs.opacity, op_active);

        if (rot_active) {
            cloud.rotations[i] = normalize_quaternion(cloud.rotations[i]);
        }
    }
}

void optimizer_insert_rows(OptimizerState& state, std::size_t count) {
    const std::size_t n = state.steps.size() + count;
    state.m.positions.resize(n, Vec3::Zero());
    state.m.log_scales.resize(n, Vec3::Zero());
    state.m.rotations.resize(n, Vec4::Zero());
    state.m.opacity_logits.resize(n, 0.0);
    state.m.colors_raw.resize(n, Vec3::Zero());
    state.v.positions.resize(n, Vec3::Zero());
    state.v.log_scales.resize(n, Vec3::Zero());
    state.v.rotations.resize(n, Vec4::Zero());
    state.v.opacity_logits.resize(n, 0.0);
    state.v.colors_raw.resize(n, Vec3::Zero());
    state.steps.resize(n, 0);
}

namespace {

template <typename T>
void compact_vector(std::vector<T>& vec, const std::vector<uint8_t>& keep) {
    std::size_t out = 0;
    for (std::size_t i = 0; i < keep.size(); ++i) {
        if (!keep[i]) continue;
        if (out != i) vec[out] = vec[i];
        ++out;
    }
    vec.resize(out);
}

} // namespace

void optimizer_compact(OptimizerState& state, const std::vector<uint8_t>& keep) {
    if (keep.size() != state.steps.size()) {
        throw ValidationError("optimizer_compact: mask length mismatch");
    }
    compact_vector(state.m.positions, keep);
    compact_vector(state.m.log_scales, keep);
    compact_vector(state.m.rotations, keep);
    compact_vector(state.m.opacity_logits, keep);
    compact_vector(state.m.colors_raw, keep);
    compact_vector(state.v.positions, keep);
    compact_vector(state.v.log_scales, keep);
    compact_vector(state.v.rotations, keep);
    compact_vector(state.v.opacity_logits, keep);
    compact_vector(state.v.colors_raw, keep);
    compact_vector(state.steps, keep);
}

} // namespace splat
