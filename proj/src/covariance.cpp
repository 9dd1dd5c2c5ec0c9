#include "splat/covariance.hpp"

#include "splat/errors.hpp"

#include <cmath>
#include <string>

namespace splat {

Vec4 normalize_quaternion(const Vec4& q) {
    return q / q.norm();
}

Mat3 quaternion_to_rotation(const Vec4& q) {
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    Mat3 r;
    r << 1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y),
         2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x),
         2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y);
    return r;
}

Mat3 covariance_from(const Vec3& scale, const Vec4& rotation) {
    if (!(scale.x() > 0.0 && scale.y() > 0.0 && scale.z() > 0.0)) {
        throw ValidationError("covariance_from: scale must be componentwise positive");
    }
    const double norm = rotation.norm();
    if (!(std::abs(norm - 1.0) <= 1e-6)) {
        throw ValidationError("covariance_from: quaternion norm " + std::to_string(norm) +
                              " not unit within 1e-6");
    }
    const Mat3 r = quaternion_to_rotation(rotation);
    const Mat3 m = r * scale.asDiagonal();
    return m * m.transpose();
}

} // namespace splat
