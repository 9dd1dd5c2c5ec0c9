#pragma once

#include "splat/projection.hpp"
#include "splat/types.hpp"

#include <cstdint>
#include <vector>

namespace splat {

/// Numerical knobs of the rasterizer. Defaults follow common splatting
/// practice; both thresholds participate in the forward definition, so the
/// backward pass honors them exactly.
struct RenderOptions {
    double alpha_clamp = 0.99;          // per-sample alpha ceiling
    double skip_threshold = 1.0 / 255.0; // samples below this contribute nothing
    int threads = 0;                     // 0 = hardware concurrency
};

/// Forward render: depth-sorted alpha compositing of the projected cloud.
///
/// Per pixel p and primitive i (front to back):
///   a_i = min(alpha_clamp, opacity_i * exp(-0.5 d^T cov2d^-1 d)), d = p - mean2d,
/// contributions with a_i < skip_threshold are dropped. Color composites
/// against `background` through the residual transmittance, depth is the
/// alpha-weighted sum of camera-space z, and accum_alpha = 1 - final
/// transmittance. Deterministic for fixed inputs and any thread count.
RenderOutput render(const GaussianCloud& cloud, const Camera& camera, const Vec3& background,
                    const RenderOptions& options = {});

/// Everything the backward pass produces in one shot.
struct BackwardResult {
    GradientBuffer grads;                 // d loss / d raw parameters
    std::vector<double> alpha_grads;      // d loss / d activated opacity, per primitive
    std::vector<double> mean2d_grad_norms; // |d loss / d mean2d| per primitive (view total)
    std::vector<uint8_t> visible;         // 1 if the primitive survived projection
};

/// Exact adjoint of `render` under the same options.
///
/// `d_color` (H x W x 3) and `d_depth` (H x W) are the upstream gradients of
/// the loss with respect to the rendered color and depth images; shapes must
/// match the camera. The clamp contributes zero gradient where active, and
/// skipped samples contribute nothing, mirroring the forward definition.
BackwardResult render_backward(const GaussianCloud& cloud, const Camera& camera,
                               const Vec3& background, const Image& d_color,
                               const Image& d_depth, const RenderOptions& options = {});

} // namespace splat
