#pragma once

#include <filesystem>

#include "l2g/image.hpp"

namespace l2g {

// Binary PPM (P6, 3 channels) and PGM (P5, 1 channel), maxval 255.
void write_pnm(const std::filesystem::path& path, const Image& image);

// Reads P5 or P6 with maxval 255. Header comments are skipped.
// Errors (missing, malformed, truncated) are IoError naming the path.
Image read_pnm(const std::filesystem::path& path);

}  // namespace l2g
