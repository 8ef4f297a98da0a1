#pragma once

#include <filesystem>

#include "matte/tensor.hpp"

namespace matte {

/// 8-bit grayscale PNG -> plane with values v/255. Gray+alpha drops alpha;
/// color files are rejected.
Plane read_png_gray(const std::filesystem::path& path);

/// Plane -> 8-bit grayscale PNG, round(v*255) clamped to [0,255].
void write_png_gray(const std::filesystem::path& path, const Plane& p);

/// 8-bit RGB(A) PNG -> three planes in [0,1]; grayscale is replicated,
/// palette expanded, alpha dropped.
Image read_png_rgb(const std::filesystem::path& path);

void write_png_rgb(const std::filesystem::path& path, const Image& img);

/// Strict {0, 128, 255} <-> {0, 0.5, 1} codec for trimap-valued maps; any
/// other sample value is a data error.
Plane read_png_rep(const std::filesystem::path& path);
void write_png_rep(const std::filesystem::path& path, const Plane& rep);

}  // namespace matte
