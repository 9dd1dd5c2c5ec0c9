#include "splat/activations.hpp"

namespace splat {

ActivatedCloud activate(const GaussianCloud& cloud) {
    const std::size_t n = cloud.size();
    ActivatedCloud out;
    out.scales.resize(n);
    out.opacities.resize(n);
    out.colors.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.scales[i] = cloud.log_scales[i].array().exp();
        out.opacities[i] = sigmoid(cloud.opacity_logits[i]);
        out.colors[i] = {sigmoid(cloud.colors_raw[i].x()), sigmoid(cloud.colors_raw[i].y()),
                         sigmoid(cloud.colors_raw[i].z())};
    }
    return out;
}

} // namespace splat
