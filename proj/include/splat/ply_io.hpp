#pragma once

#include "splat/types.hpp"

#include <filesystem>
#include <vector>

namespace splat {

/// Writes the cloud as binary little-endian PLY with per-vertex properties
/// x y z, scale_0..2 (raw log-scales), rot_0..3, opacity (raw logit), and
/// f_dc_0..2 (raw colors), stored as float64 so a round-trip is bit-exact.
void save_checkpoint(const GaussianCloud& cloud, const std::filesystem::path& path);

/// Reads a checkpoint written by save_checkpoint. Also accepts the same
/// property set stored as float32 (the common viewer convention); unknown
/// extra properties are skipped. Missing required properties raise LoadError
/// listing their names.
GaussianCloud load_checkpoint(const std::filesystem::path& path);

/// A colored point set used to seed training.
struct PointCloud {
    std::vector<Vec3> positions;
    std::vector<Vec3> colors; // in [0, 1]
};

/// Reads x y z plus colors from a binary little-endian PLY. Colors may be
/// uchar red/green/blue (mapped to v / 255) or float red/green/blue.
PointCloud load_point_cloud(const std::filesystem::path& path);

/// Writes positions as float64 and colors as uchar red/green/blue.
void save_point_cloud(const PointCloud& points, const std::filesystem::path& path);

} // namespace splat
