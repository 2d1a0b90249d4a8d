#pragma once

#include <filesystem>
#include <string>

#include "virtstain/image.hpp"

namespace virtstain {

// PNG rasters, 8- or 16-bit, grayscale or RGB. Values are stored as
// value * (2^depth - 1) rounded to nearest and read back as value / max,
// always in [0,1].
Image read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& img, int bit_depth = 8);

// Lossless container for stacks that do not fit PNG (K > 4 channels or
// float data): NumPy .npy v1.0, float64, C-order, shape (H, W, C).
// Reading accepts f8/f4 in either byte order produced by numpy defaults.
Image read_npy(const std::filesystem::path& path);
void write_npy(const std::filesystem::path& path, const Image& img);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace virtstain
