#include "splat/projection.hpp"

#include "splat/activations.hpp"
#include "splat/covariance.hpp"

namespace splat {

std::vector<ProjectedGaussian> project(const GaussianCloud& cloud, const Camera& camera) {
    camera.validate();
    cloud.validate();

    std::vector<ProjectedGaussian> out;
    out.reserve(cloud.size());

    const Mat3& w = camera.rotation;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const Vec3 p_cam = camera.to_camera(cloud.positions[i]);
        const double z = p_cam.z();
        if (z <= kNearPlane) continue;

        const double x = p_cam.x();
        const double y = p_cam.y();

        // Linearized pinhole map at the primitive center.
        Eigen::Matrix<double, 2, 3> jac;
        jac << camera.fx / z, 0.0, -camera.fx * x / (z * z),
               0.0, camera.fy / z, -camera.fy * y / (z * z);

        const Vec4 q = normalize_quaternion(cloud.rotations[i]);
        const Vec3 scale = cloud.log_scales[i].array().exp();
        const Mat3 m = quaternion_to_rotation(q) * scale.asDiagonal();
        const Mat3 sigma = m * m.transpose();

        const Eigen::Matrix<double, 2, 3> p = jac * w;
        Mat2 cov2d = p * sigma * p.transpose();
        cov2d(0, 0) += kCov2dRegularization;
        cov2d(1, 1) += kCov2dRegularization;

        ProjectedGaussian g;
        g.mean2d = camera.project_point(p_cam);
        g.cov2d = cov2d;
        g.depth = z;
        g.index = static_cast<int>(i);
        out.push_back(g);
    }
    return out;
}

} // namespace splat
