#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "l2g/image.hpp"
#include "l2g/keyvalue.hpp"
#include "l2g/rng.hpp"

namespace l2g {

// Shape classes in label order (class index = position + 1 in masks).
inline constexpr const char* kShapeNames[] = {"disk", "square", "triangle",
                                              "cross", "ring"};
inline constexpr int kMaxClasses = 5;

struct GenConfig {
  int canvas = 96;
  int num_classes = 5;
  int min_shapes = 1;
  int max_shapes = 2;
  // Shape extent (bounding diameter) in pixels.
  int min_size = 32;
  int max_size = 56;
  bool allow_empty = false;
  // Shape centres are drawn in the central center_spread * canvas square
  // (and kept far enough from the border to fit the shape).
  double center_spread = 0.5;

  // Background: a luminance value-noise field on a (noise_cells+1)^2
  // lattice mapped to [bg_lo, bg_hi], plus per-channel value noise of
  // amplitude bg_chroma around it, plus per-pixel Gaussian noise.
  int noise_cells = 4;
  double bg_lo = 0.15;
  double bg_hi = 0.85;
  double bg_chroma = 0.3;
  double pixel_noise = 0.04;
  // Object colour: class base colour mixed with a uniformly random colour
  // by color_jitter (0 = exact class colour, 1 = unrelated to class).
  double color_jitter = 0.6;
  // Each object carries a disc-shaped core of radius core_fraction * R at
  // a random point inside it, coloured like the body but with core_jitter
  // instead of color_jitter. core_fraction = 0 disables the core.
  double core_fraction = 0.35;
  double core_jitter = 0.1;
  // Minimum distance of the core centre from the shape centre, as a
  // fraction of R. Falls back to the centre when no draw qualifies.
  double core_offset = 0.0;
  // Amplitude of the darker rim drawn along each shape boundary.
  double rim_contrast = 0.0;

  // Saliency degradation.
  int sal_morph_radius = 2;   // erosion/dilation radius drawn in [-r, r]
  double sal_flip_rate = 0.005;
  double sal_empty_prob = 0.05;
  int sal_blur_radius = 1;    // box blur radius softening the map

  std::uint64_t seed = 42;

  // Throws ConfigError listing every invalid field.
  void validate() const;
  KeyValues to_key_values() const;
  // Fields missing from `kv` keep their defaults; problems go to `reader`.
  static GenConfig from_fields(FieldReader& reader);
};

struct Sample {
  std::uint64_t id = 0;
  Image image;                        // 3 channels
  std::vector<std::uint8_t> labels;   // length C, binary
  LabelMap gt_mask;                   // 0 = background, 1..C
  Image saliency;                     // 1 channel

  bool operator==(const Sample&) const = default;
};

// Deterministic in (seed, cfg). Shapes are drawn in order; a later shape
// overwrites earlier ones where they overlap.
Sample gen_sample(std::uint64_t seed, const GenConfig& cfg);

// Sample `index` of the dataset with cfg.seed: gen_sample(derive_seed(...)).
Sample gen_indexed_sample(std::uint64_t index, const GenConfig& cfg,
                          std::uint64_t split_offset = 0);

std::vector<Sample> gen_dataset(const GenConfig& cfg, std::size_t count,
                                std::uint64_t first_index = 0);

// Synthetic saliency from the foreground union of `gt_mask`: with
// probability sal_empty_prob an all-zero map; otherwise erosion/dilation by a
// random radius, random pixel flips and a box blur.
Image degrade_saliency(const LabelMap& gt_mask, const GenConfig& cfg, Rng& rng);

// Label vector implied by a mask: y[c-1] = 1 iff class c has a pixel.
std::vector<std::uint8_t> labels_from_mask(const LabelMap& mask, int num_classes);

// Throws ValidationError when labels disagree with the mask or values are
// out of range.
void validate_sample(const Sample& s, int num_classes);

// Layout under `dir`:
//   manifest.txt         GenConfig + count as key=value lines
//   labels.csv           sample_id,c0,...,c{C-1}
//   images/<id>.ppm      P6
//   masks/<id>.pgm       P5, class indices
//   saliency/<id>.pgm    P5
void write_dataset(const std::vector<Sample>& samples, const GenConfig& cfg,
                   const std::filesystem::path& dir);

struct Dataset {
  GenConfig config;
  std::vector<Sample> samples;
};

Dataset read_dataset(const std::filesystem::path& dir);

}  // namespace l2g
