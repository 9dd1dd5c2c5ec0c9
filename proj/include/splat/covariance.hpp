#pragma once

#include "splat/types.hpp"

namespace splat {

/// Returns q / |q|. Quaternion layout is (w, x, y, z).
Vec4 normalize_quaternion(const Vec4& q);

/// Rotation matrix of a unit quaternion (w, x, y, z). No validation.
Mat3 quaternion_to_rotation(const Vec4& q_unit);

/// Builds the world-space covariance R * diag(scale)^2 * R^T.
///
/// `scale` must be componentwise positive and `rotation` a unit quaternion
/// within 1e-6 of norm 1; throws ValidationError otherwise. The result is
/// symmetric positive definite with eigenvalues equal to the squared scales.
Mat3 covariance_from(const Vec3& scale, const Vec4& rotation);

} // namespace splat
