#pragma once

#include "splat/image.hpp"

#include <filesystem>

namespace splat {

/// Decodes an 8-bit PNG into a 3-channel image with values in [0, 1]
/// (v / 255). Gray, palette, and alpha inputs are expanded/flattened to RGB.
Image read_png(const std::filesystem::path& path);

/// Writes a 3-channel image as 8-bit RGB PNG; values are clamped to [0, 1]
/// and quantized with round(v * 255).
void write_png(const Image& image, const std::filesystem::path& path);

/// Reads a single-channel 32-bit float PFM ("Pf") depth map.
Image read_pfm(const std::filesystem::path& path);

/// Writes a single-channel image as little-endian 32-bit float PFM.
void write_pfm(const Image& image, const std::filesystem::path& path);

} // namespace splat
