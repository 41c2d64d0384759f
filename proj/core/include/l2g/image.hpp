#pragma once

#include <cstdint>
#include <vector>

#include "l2g/tensor.hpp"

namespace l2g {

// 8-bit raster, channels interleaved, rows top to bottom.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int w, int h, int c)
      : width(w), height(h), channels(c),
        pixels(static_cast<std::size_t>(w) * h * c, 0) {}

  std::uint8_t& at(int y, int x, int c = 0) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint8_t at(int y, int x, int c = 0) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  // Pixel value mapped to [0, 1].
  double value(int y, int x, int c = 0) const { return at(y, x, c) / 255.0; }

  bool operator==(const Image&) const = default;
};

enum class Provenance { kPseudo, kGroundTruth };

// Per-pixel class index; 0 is background, 1..C are object classes.
struct LabelMap {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> labels;
  Provenance provenance = Provenance::kGroundTruth;

  LabelMap() = default;
  LabelMap(int w, int h, Provenance p = Provenance::kGroundTruth)
      : width(w), height(h), labels(static_cast<std::size_t>(w) * h, 0),
        provenance(p) {}

  std::uint8_t& at(int y, int x) {
    return labels[static_cast<std::size_t>(y) * width + x];
  }
  std::uint8_t at(int y, int x) const {
    return labels[static_cast<std::size_t>(y) * width + x];
  }

  bool operator==(const LabelMap&) const = default;
};

// Image as a [1, channels, H, W] tensor with values in [0, 1].
Tensor image_to_tensor(const Image& image);

// Channel 0 of a single-channel image as a [H, W] tensor in [0, 1].
Tensor plane_to_tensor(const Image& image);

}  // namespace l2g
