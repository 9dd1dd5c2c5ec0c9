#pragma once

#include "splat/scene.hpp"

#include <cstdint>
#include <filesystem>
#include <string>

namespace splat {

/// Loads a scene from a JSON manifest. Image/depth/point paths are resolved
/// relative to the manifest. Every referenced file must exist, cameras must
/// validate, image sizes must match their cameras, and the train/test index
/// sets must be disjoint and in range.
Scene load_scene(const std::filesystem::path& manifest_path);

/// Knobs of the built-in scene generators.
struct SyntheticOptions {
    int width = 64;
    int height = 64;
    int train_views = 3;
    int test_views = 2;
};

/// Generates a synthetic scene on disk: ground-truth primitives are rendered
/// to training/held-out images plus exact depth maps, a noisy 5% subset of
/// the ground-truth positions becomes the initial point cloud (noise sigma =
/// 1% of the scene extent), and a manifest ties it together.
///
/// Generators: "textured-plane" (400 primitives on a tilted checkered plane)
/// and "cluster" (200 primitives in 3 blobs). Byte-identical for a fixed
/// spec, seed, and options. Returns the manifest path.
std::filesystem::path make_synthetic(const std::string& spec_name,
                                     const std::filesystem::path& out_dir, uint64_t seed,
                                     const SyntheticOptions& options = {});

/// Parses a camera description from a JSON file (same schema as manifest
/// camera blocks).
Camera load_camera_json(const std::filesystem::path& path);

} // namespace splat
