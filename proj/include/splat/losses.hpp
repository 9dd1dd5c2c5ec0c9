#pragma once

#include "splat/image.hpp"
#include "splat/types.hpp"

#include <vector>

namespace splat {

/// Mixing weights of the training objective
///   L = (1 - lambda) * L1 + lambda * L_DSSIM + w_depth * L_depth.
struct LossWeights {
    double lambda = 0.2;  // structural-dissimilarity share of the photometric term
    double w_depth = 0.05; // depth-correlation weight

    void validate() const;
};

/// Scalar loss plus its gradient w.r.t. the first image argument.
struct LossResult {
    double value = 0.0;
    Image grad;
};

/// Mean absolute difference over all pixels and channels.
/// Gradient is sign(rendered - target) / count.
LossResult l1_loss(const Image& rendered, const Image& target);

/// Mean SSIM between two images (values expected in [0, 1]).
///
/// 11x11 Gaussian window with sigma 1.5, C1 = 0.01^2, C2 = 0.03^2, evaluated
/// at every fully-interior window position ("valid" padding), averaged over
/// positions and channels. Images must be at least 11x11.
double ssim(const Image& a, const Image& b);

/// Structural dissimilarity (1 - ssim) / 2 with its analytic gradient.
LossResult d_ssim_loss(const Image& rendered, const Image& target);

struct PearsonResult {
    double value = 0.0;
    Image grad;                 // zero outside the mask
    bool variance_guard_active = false; // set when d_est is constant over the mask
};

/// Depth-correlation loss 1 - Cov(d_render, d_est) / sqrt(Var * Var + eps)
/// over masked pixels (mask nonzero = included, >= 2 required).
///
/// Invariant to positive affine rescaling of either map up to eps effects;
/// always in [0, 2]. A constant d_est triggers the eps guard and a warning.
PearsonResult pearson_depth_loss(const Image& d_render, const Image& d_est, const Image& mask);

/// Variance guard used inside pearson_depth_loss.
inline constexpr double kPearsonEpsilon = 1e-8;

/// Fully assembled training objective for one rendered view.
struct TotalLossResult {
    double total = 0.0;
    double l1 = 0.0;
    double d_ssim = 0.0;
    double depth = 0.0;  // raw depth term (before w_depth)
    Image d_color;       // upstream gradient for the rendered color
    Image d_depth;       // upstream gradient for the rendered depth
    Image mask;          // depth mask that was applied (accum_alpha >= 0.5)
    bool depth_term_used = false;
};

/// Combines L1, D-SSIM and the depth term; assembles upstream gradients for
/// the renderer's backward pass. The depth mask is accum_alpha >= 0.5 and is
/// treated as non-differentiable.
///
/// With w_depth = 0 the depth term is not evaluated. With w_depth > 0 a mask
/// of fewer than 2 pixels raises DegenerateInputError unless
/// `skip_degenerate_depth` is set, in which case the term contributes zero
/// for this view and `depth_term_used` stays false.
TotalLossResult total_loss(const RenderOutput& rendered, const Image& target, const Image& d_est,
                           const LossWeights& weights, bool skip_degenerate_depth = false);

/// Peak signal-to-noise ratio for images in [0, 1], capped at 100 dB
/// (the cap is reported for identical images).
double psnr(const Image& a, const Image& b);

} // namespace splat
