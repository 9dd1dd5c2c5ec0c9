#pragma once

#include "splat/image.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <vector>

namespace splat {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

/// Structure-of-arrays parameter set of N Gaussian primitives.
///
/// All fields are stored raw (pre-activation) so the optimizer is
/// unconstrained:
///   - log_scales:     activated scale   = exp(log_scale), per axis
///   - rotations:      quaternion (w, x, y, z), normalized before use
///   - opacity_logits: activated opacity = sigmoid(logit), in (0, 1)
///   - colors_raw:     activated color   = sigmoid(raw), per channel
struct GaussianCloud {
    std::vector<Vec3> positions;
    std::vector<Vec3> log_scales;
    std::vector<Vec4> rotations;
    std::vector<double> opacity_logits;
    std::vector<Vec3> colors_raw;

    std::size_t size() const { return positions.size(); }
    bool empty() const { return positions.empty(); }

    /// Appends one primitive; used by densification and tests.
    void push_back(const Vec3& pos, const Vec3& log_scale, const Vec4& rot, double opacity_logit,
                   const Vec3& color_raw);

    /// Keeps rows where keep[i] is true; all arrays compacted consistently.
    void compact(const std::vector<uint8_t>& keep);

    /// Checks array lengths, finiteness, and quaternion normalizability.
    /// Throws ValidationError on the first violation.
    void validate() const;
};

/// A calibrated pinhole camera. `rotation` maps world to camera coordinates,
/// `translation` is the world origin expressed in camera coordinates, so
/// p_cam = rotation * p_world + translation. +z looks forward.
struct Camera {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();
    double fx = 0.0;
    double fy = 0.0;
    double cx = 0.0;
    double cy = 0.0;
    int width = 0;
    int height = 0;

    Vec3 to_camera(const Vec3& p_world) const { return rotation * p_world + translation; }

    /// Projects a camera-space point to pixel coordinates.
    Vec2 project_point(const Vec3& p_cam) const {
        return {fx * p_cam.x() / p_cam.z() + cx, fy * p_cam.y() / p_cam.z() + cy};
    }

    /// Orthonormality (1e-6), det = +1, positive focal lengths and size.
    void validate() const;
};

/// Product of a forward render: color, alpha-weighted expected depth, and
/// per-pixel accumulated alpha (1 - final transmittance).
struct RenderOutput {
    Image color;       // H x W x 3, in [0, 1] for backgrounds in [0, 1]
    Image depth;       // H x W, camera-space depth units
    Image accum_alpha; // H x W, in [0, 1]
};

/// Loss gradients with respect to every raw parameter; shapes mirror the
/// cloud they were computed for.
struct GradientBuffer {
    std::vector<Vec3> positions;
    std::vector<Vec3> log_scales;
    std::vector<Vec4> rotations;
    std::vector<double> opacity_logits;
    std::vector<Vec3> colors_raw;

    static GradientBuffer zeros(std::size_t n);

    std::size_t size() const { return positions.size(); }
    bool shapes_match(const GaussianCloud& cloud) const;

    /// True if every entry is finite.
    bool all_finite() const;
};

} // namespace splat
