#include "splat/types.hpp"

#include "splat/errors.hpp"

#include <cmath>
#include <string>

namespace splat {

namespace {

bool finite3(const Vec3& v) {
    return std::isfinite(v.x()) && std::isfinite(v.y()) && std::isfinite(v.z());
}

} // namespace

void GaussianCloud::push_back(const Vec3& pos, const Vec3& log_scale, const Vec4& rot,
                              double opacity_logit, const Vec3& color_raw) {
    positions.push_back(pos);
    log_scales.push_back(log_scale);
    rotations.push_back(rot);
    opacity_logits.push_back(opacity_logit);
    colors_raw.push_back(color_raw);
}

void GaussianCloud::compact(const std::vector<uint8_t>& keep) {
    if (keep.size() != size()) {
        throw ValidationError("GaussianCloud::compact: mask length " +
                              std::to_string(keep.size()) + " != N " + std::to_string(size()));
    }
    std::size_t out = 0;
    for (std::size_t i = 0; i < keep.size(); ++i) {
        if (!keep[i]) continue;
        if (out != i) {
            positions[out] = positions[i];
            log_scales[out] = log_scales[i];
            rotations[out] = rotations[i];
            opacity_logits[out] = opacity_logits[i];
            colors_raw[out] = colors_raw[i];
        }
        ++out;
    }
    positions.resize(out);
    log_scales.resize(out);
    rotations.resize(out);
    opacity_logits.resize(out);
    colors_raw.resize(out);
}

void GaussianCloud::validate() const {
    const std::size_t n = positions.size();
    if (log_scales.size() != n || rotations.size() != n || opacity_logits.size() != n ||
        colors_raw.size() != n) {
        throw ValidationError("GaussianCloud: field lengths differ (positions " +
                              std::to_string(n) + ", log_scales " +
                              std::to_string(log_scales.size()) + ", rotations " +
                              std::to_string(rotations.size()) + ", opacity_logits " +
                              std::to_string(opacity_logits.size()) + ", colors_raw " +
                              std::to_string(colors_raw.size()) + ")");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!finite3(positions[i]) || !finite3(log_scales[i]) || !finite3(colors_raw[i]) ||
            !std::isfinite(opacity_logits[i]) || !rotations[i].allFinite()) {
            throw ValidationError("GaussianCloud: non-finite parameter at row " +
                                  std::to_string(i));
        }
        if (rotations[i].norm() < 1e-12) {
            throw ValidationError("GaussianCloud: quaternion with ~zero norm at row " +
                                  std::to_string(i));
        }
    }
}

void Camera::validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) {
        throw ValidationError("Camera: focal lengths must be positive");
    }
    if (width <= 0 || height <= 0) {
        throw ValidationError("Camera: image size must be positive");
    }
    const Mat3 should_be_identity = rotation * rotation.transpose();
    const double dev = (should_be_identity - Mat3::Identity()).cwiseAbs().maxCoeff();
    if (!(dev <= 1e-6)) {
        throw ValidationError("Camera: rotation not orthonormal (max deviation " +
                              std::to_string(dev) + ")");
    }
    if (!(std::abs(rotation.determinant() - 1.0) <= 1e-6)) {
        throw ValidationError("Camera: rotation determinant is not +1");
    }
}

GradientBuffer GradientBuffer::zeros(std::size_t n) {
    GradientBuffer g;
    g.positions.assign(n, Vec3::Zero());
    g.log_scales.assign(n, Vec3::Zero());
    g.rotations.assign(n, Vec4::Zero());
    g.opacity_logits.assign(n, 0.0);
    g.colors_raw.assign(n, Vec3::Zero());
    return g;
}

bool GradientBuffer::shapes_match(const GaussianCloud& cloud) const {
    const std::size_t n = cloud.size();
    return positions.size() == n && log_scales.size() == n && rotations.size() == n &&
           opacity_logits.size() == n && colors_raw.size() == n;
}

bool GradientBuffer::all_finite() const {
    for (std::size_t i = 0; i < positions.size(); ++i) {
        if (!positions[i].allFinite() || !log_scales[i].allFinite() ||
            !rotations[i].allFinite() || !std::isfinite(opacity_logits[i]) ||
            !colors_raw[i].allFinite()) {
            return false;
        }
    }
    return true;
}

} // namespace splat
