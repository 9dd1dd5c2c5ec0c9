#pragma once

#include "splat/image.hpp"
#include "splat/ply_io.hpp"
#include "splat/types.hpp"

#include <string>
#include <vector>

namespace splat {

/// One posed view: image, camera, and (for training views) an estimated
/// depth map used by the depth-correlation term.
struct ViewData {
    std::string name;
    Image image;  // H x W x 3 in [0, 1]
    Camera camera;
    Image depth;  // H x W, empty when absent
    bool has_depth = false;
};

/// A few-shot reconstruction problem: posed training views with depth,
/// held-out views for evaluation, and an initial colored point set.
struct Scene {
    std::vector<ViewData> train_views;
    std::vector<ViewData> test_views;
    PointCloud initial_points;
};

/// Bounding-box diagonal of a point set; 0 for fewer than 2 points.
inline double scene_extent(const std::vector<Vec3>& points) {
    if (points.size() < 2) return 0.0;
    Vec3 lo = points.front();
    Vec3 hi = points.front();
    for (const Vec3& p : points) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    return (hi - lo).norm();
}

} // namespace splat
