#pragma once

#include <string>
#include <vector>

#include "l2g/image.hpp"
#include "l2g/keyvalue.hpp"
#include "l2g/rng.hpp"
#include "l2g/tensor.hpp"

namespace l2g {

// Pixel rectangle: top-left (x0, y0) inclusive, extent w x h.
struct Rect {
  int x0 = 0;
  int y0 = 0;
  int w = 0;
  int h = 0;

  bool inside(int width, int height) const {
    return x0 >= 0 && y0 >= 0 && w >= 1 && h >= 1 && x0 + w <= width &&
           y0 + h <= height;
  }
  bool operator==(const Rect&) const = default;
};

std::string to_string(const Rect& r);

struct Geometry {
  int global_size = 64;
  int local_size = 48;
  int n_local = 4;
  int sw_window = 48;
  int sw_stride = 8;

  KeyValues to_key_values() const;
  static Geometry from_fields(FieldReader& reader);
};

struct ViewSet {
  Image global_view;
  Rect global_rect;  // on the source canvas
  std::vector<Image> local_views;
  std::vector<Rect> local_rects;  // on the global view
};

// Pixel copy of `r` from an image; throws GeometryError when out of bounds.
Image crop_image(const Image& image, const Rect& r);
LabelMap crop_labels(const LabelMap& map, const Rect& r);

// Writes `patch` back into `image` at `r`.
void paste_image(Image& image, const Image& patch, const Rect& r);

// Uniform placement of a g x g window on the image.
std::pair<Image, Rect> sample_global_view(const Image& image, int g, Rng& rng);

// n independent uniform placements of l x l windows inside the global view.
std::vector<std::pair<Image, Rect>> sample_local_views(const Image& global_view,
                                                       int n, int l, Rng& rng);

ViewSet make_view_set(const Image& image, const Geometry& geo, Rng& rng);

// Row-major grid of window x window rects on a g x g grid. Positions step by
// `stride`; when the last step does not reach the far edge an extra
// window is clamped to touch it, so the union covers every pixel.
std::vector<Rect> sliding_window_rects(int g, int window, int stride);

// Sub-grid of the last two axes of a rank-2..4 map at `r`; other axes are
// preserved. Throws GeometryError naming the rect and bounds.
Tensor crop_map(const Tensor& map, const Rect& r);

// Writes `patch` (same leading axes as `map`, spatial r.h x r.w) into `map`.
void paste_map(Tensor& map, const Tensor& patch, const Rect& r);

}  // namespace l2g
