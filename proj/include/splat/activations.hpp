#pragma once

#include "splat/errors.hpp"
#include "splat/types.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace splat {

inline double sigmoid(double x) {
    // Split by sign to avoid overflow in exp for large |x|.
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

/// Inverse of sigmoid. Domain (0, 1); throws DomainError outside it.
inline double inverse_opacity_activation(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw DomainError("inverse_opacity_activation: alpha " + std::to_string(alpha) +
                          " outside (0, 1)");
    }
    return std::log(alpha / (1.0 - alpha));
}

/// Activated (optimization-space -> world-space) view of a cloud.
struct ActivatedCloud {
    std::vector<Vec3> scales;     // exp(log_scales)
    std::vector<double> opacities; // sigmoid(opacity_logits)
    std::vector<Vec3> colors;     // sigmoid(colors_raw)
};

/// Applies the elementwise activations to every primitive.
ActivatedCloud activate(const GaussianCloud& cloud);

} // namespace splat
