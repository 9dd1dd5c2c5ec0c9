#pragma once

#include "splat/types.hpp"

#include <vector>

namespace splat {

/// Camera-space z below which primitives are culled.
inline constexpr double kNearPlane = 0.01;

/// Isotropic dilation (pixels^2) added to every projected covariance so that
/// sub-pixel primitives keep a minimum footprint.
inline constexpr double kCov2dRegularization = 0.3;

/// A primitive after perspective projection.
struct ProjectedGaussian {
    Vec2 mean2d = Vec2::Zero(); // pixel coordinates
    Mat2 cov2d = Mat2::Zero();  // pixels^2, SPD after regularization
    double depth = 0.0;         // camera-space z, > kNearPlane
    int index = -1;             // row in the source cloud
};

/// Projects every primitive in front of the near plane.
///
/// The 3D covariance is pushed through the linearized pinhole map
/// (cov2d = J W Sigma W^T J^T + regularization), depth is carried for the
/// compositing sort. Output order follows cloud order; an empty result is
/// valid.
std::vector<ProjectedGaussian> project(const GaussianCloud& cloud, const Camera& camera);

} // namespace splat
