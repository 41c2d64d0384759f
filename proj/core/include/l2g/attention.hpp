#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "l2g/model.hpp"
#include "l2g/tensor.hpp"
#include "l2g/views.hpp"

namespace l2g {

// Per-class maps [C, H, W] in [0, 1] and the label vector that gated them.
struct AttentionMaps {
  Tensor maps;
  std::vector<std::uint8_t> labels;

  std::size_t classes() const { return maps.dim(0); }
  std::size_t height() const { return maps.dim(1); }
  std::size_t width() const { return maps.dim(2); }
};

// A^c = relu(F^c) / max(relu(F^c)), with A^c = 0 when the max is zero or
// when y^c = 0. `features` is [C, H, W] (or [1, C, H, W]); gradients are not
// tracked.
AttentionMaps cam(const Tensor& features, const std::vector<std::uint8_t>& labels);

// Which activations of a network feed the attention maps.
enum class AttentionSource {
  kLogits,   // raw last-layer channels (classifiers with C outputs)
  kSoftmax,  // channel softmax over C+1 outputs (global network)
};

struct MultiScaleOptions {
  std::vector<double> scales = {0.5, 1.0, 1.5};
  bool flip = true;
  AttentionSource source = AttentionSource::kLogits;
};

// Input size used for scale s: round(s * size / stride) * stride, at least
// one stride.
std::size_t scaled_size(std::size_t size, double scale, int stride);

// Foreground activation map [C, out_h, out_w] of one forward pass: relu'd
// foreground channels (or softmax probabilities), bilinearly upsampled from
// feature resolution.
Tensor activation_map(const Network& net, const Tensor& image, std::size_t classes,
                      AttentionSource source, std::size_t out_h, std::size_t out_w);

// For every scale (and its mirror when flip is set): resize the image,
// forward, take relu'd foreground activations upsampled to the image grid,
// un-mirror; average all terms, then normalize and gate once with cam().
// `image` is [1, 3, H, W]. Throws ArgumentError on an empty scale list.
AttentionMaps multi_scale_attention(const Network& net, const Tensor& image,
                                    const MultiScaleOptions& options,
                                    const std::vector<std::uint8_t>& labels);

enum class WindowFusion { kMax, kMean };

// Pastes per-window maps (each sized to its rect) onto a g x g grid, fusing
// overlaps per pixel and class by max (or mean over covering windows);
// uncovered pixels are 0. The result is renormalized with cam().
AttentionMaps aggregate_windows(const std::vector<AttentionMaps>& maps,
                                const std::vector<Rect>& rects, int g,
                                WindowFusion fusion = WindowFusion::kMax);

// Exports one P5 per class (<stem>_c<k>.pgm, values quantized to 0..255) and
// the raw maps as <stem>.l2gt; returns the written PGM file names.
std::vector<std::string> export_attention(const AttentionMaps& maps,
                                          const std::filesystem::path& dir,
                                          const std::string& stem);

}  // namespace l2g
