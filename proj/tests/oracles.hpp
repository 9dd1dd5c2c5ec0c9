#pragma once

// Test-only reference implementations. Everything here is written as a
// direct transcription of the defining formulas, independent of the library
// code paths it checks.

#include "splat/image.hpp"
#include "splat/projection.hpp"
#include "splat/renderer.hpp"
#include "splat/types.hpp"

#include <functional>
#include <random>
#include <vector>

namespace splat::oracle {

/// Naive compositing: per pixel, walk every projected primitive in depth
/// order (ties by source row) and evaluate the ordered blending sum directly.
/// No bounding boxes, no contributor lists, no early exit.
RenderOutput naive_render(const GaussianCloud& cloud, const Camera& camera,
                          const Vec3& background, const RenderOptions& options = {});

/// Direct per-window SSIM (11x11 Gaussian, sigma 1.5, valid positions),
/// written with explicit nested loops.
double reference_ssim(const Image& a, const Image& b);

/// Central finite difference of a scalar function of one coordinate.
double central_difference(const std::function<double(double)>& f, double x0, double h);

/// Relative-error check with an absolute floor: |a - b| <= floor + rel * max(|a|, |b|).
bool close_enough(double analytic, double numeric, double rel, double abs_floor);

/// Mean distance to the k nearest neighbors, brute force.
double knn_mean_distance(const std::vector<Vec3>& points, std::size_t query, int k);

/// Deterministic random test cloud placed in front of a +z-looking camera.
/// Opacity logits stay within [-1.5, 1.5] so samples stay far away from both
/// the clamp and the skip threshold.
GaussianCloud random_cloud(std::mt19937_64& rng, int n, double z_near = 2.5, double z_far = 4.0);

/// Simple test camera at the origin looking down +z.
Camera test_camera(int width, int height, double focal = 0.0);

} // namespace splat::oracle
