#include "l2g/views.hpp"

#include <algorithm>

#include "l2g/error.hpp"
#include "l2g/ops.hpp"

namespace l2g {

std::string to_string(const Rect& r) {
  return "Rect(x0=" + std::to_string(r.x0) + ", y0=" + std::to_string(r.y0) +
         ", w=" + std::to_string(r.w) + ", h=" + std::to_string(r.h) + ")";
}

KeyValues Geometry::to_key_values() const {
  return {{"global_size", std::to_string(global_size)},
          {"local_size", std::to_string(local_size)},
          {"n_local", std::to_string(n_local)},
          {"sw_window", std::to_string(sw_window)},
          {"sw_stride", std::to_string(sw_stride)}};
}

Geometry Geometry::from_fields(FieldReader& r) {
  Geometry g;
  r.read("global_size", g.global_size);
  r.read("local_size", g.local_size);
  r.read("n_local", g.n_local);
  r.read("sw_window", g.sw_window);
  r.read("sw_stride", g.sw_stride);
  return g;
}

namespace {

void check_rect(const Rect& r, int width, int height) {
  if (!r.inside(width, height)) {
    throw GeometryError(to_string(r) + " outside bounds " + std::to_string(width) +
                        "x" + std::to_string(height));
  }
}

}  // namespace

Image crop_image(const Image& image, const Rect& r) {
  check_rect(r, image.width, image.height);
  Image out(r.w, r.h, image.channels);
  const auto row = static_cast<std::size_t>(r.w) * image.channels;
  for (int y = 0; y < r.h; ++y) {
    const auto* src = &image.pixels[(static_cast<std::size_t>(r.y0 + y) * image.width + r.x0) *
                                    image.channels];
    std::copy(src, src + row, &out.pixels[static_cast<std::size_t>(y) * row]);
  }
  return out;
}

LabelMap crop_labels(const LabelMap& map, const Rect& r) {
  check_rect(r, map.width, map.height);
  LabelMap out(r.w, r.h, map.provenance);
  for (int y = 0; y < r.h; ++y)
    for (int x = 0; x < r.w; ++x) out.at(y, x) = map.at(r.y0 + y, r.x0 + x);
  return out;
}

void paste_image(Image& image, const Image& patch, const Rect& r) {
  check_rect(r, image.width, image.height);
  if (patch.width != r.w || patch.height != r.h || patch.channels != image.channels)
    throw GeometryError("paste_image: patch does not match " + to_string(r));
  const auto row = static_cast<std::size_t>(r.w) * image.channels;
  for (int y = 0; y < r.h; ++y) {
    const auto* src = &patch.pixels[static_cast<std::size_t>(y) * row];
    std::copy(src, src + row,
              &image.pixels[(static_cast<std::size_t>(r.y0 + y) * image.width + r.x0) *
                            image.channels]);
  }
}

std::pair<Image, Rect> sample_global_view(const Image& image, int g, Rng& rng) {
  if (g < 1 || g > image.width || g > image.height) {
    throw ArgumentError("global view size " + std::to_string(g) + " exceeds canvas " +
                        std::to_string(image.width) + "x" + std::to_string(image.height));
  }
  Rect r{rng.range(0, image.width - g), rng.range(0, image.height - g), g, g};
  return {crop_image(image, r), r};
}

std::vector<std::pair<Image, Rect>> sample_local_views(const Image& global_view,
                                                       int n, int l, Rng& rng) {
  if (n < 1) throw ArgumentError("local view count must be >= 1");
  if (l < 1 || l > global_view.width || l > global_view.height) {
    throw ArgumentError("local view size " + std::to_string(l) +
                        " exceeds global view " + std::to_string(global_view.width));
  }
  std::vector<std::pair<Image, Rect>> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Rect r{rng.range(0, global_view.width - l), rng.range(0, global_view.height - l), l, l};
    out.emplace_back(crop_image(global_view, r), r);
  }
  return out;
}

ViewSet make_view_set(const Image& image, const Geometry& geo, Rng& rng) {
  ViewSet vs;
  std::tie(vs.global_view, vs.global_rect) = sample_global_view(image, geo.global_size, rng);
  for (auto& [view, rect] : sample_local_views(vs.global_view, geo.n_local, geo.local_size, rng)) {
    vs.local_views.push_back(std::move(view));
    vs.local_rects.push_back(rect);
  }
  return vs;
}

std::vector<Rect> sliding_window_rects(int g, int window, int stride) {
  if (window < 1 || window > g) {
    throw ArgumentError("sliding window " + std::to_string(window) +
                        " must be in [1, " + std::to_string(g) + "]");
  }
  if (stride < 1) throw ArgumentError("sliding window stride must be >= 1");
  std::vector<int> starts;
  for (int p = 0; p + window <= g; p += stride) starts.push_back(p);
  if (starts.back() + window < g) starts.push_back(g - window);
  std::vector<Rect> out;
  for (int y : starts)
    for (int x : starts) out.push_back({x, y, window, window});
  return out;
}

Tensor crop_map(const Tensor& map, const Rect& r) {
  if (map.rank() < 2 || map.rank() > 4)
    throw ShapeError("crop_map: rank must be 2..4, got " + shape_str(map.shape()));
  const auto H = map.dim(map.rank() - 2), W = map.dim(map.rank() - 1);
  check_rect(r, static_cast<int>(W), static_cast<int>(H));
  if (map.rank() == 4) {
    return ops::crop(map, 0, map.dim(1), static_cast<std::size_t>(r.y0),
                     static_cast<std::size_t>(r.x0), static_cast<std::size_t>(r.h),
                     static_cast<std::size_t>(r.w));
  }
  const auto planes = map.numel() / (H * W);
  Shape shape = map.shape();
  shape[shape.size() - 2] = static_cast<std::size_t>(r.h);
  shape[shape.size() - 1] = static_cast<std::size_t>(r.w);
  std::vector<double> out(planes * r.h * r.w);
  const auto src = map.data();
  for (std::size_t p = 0; p < planes; ++p)
    for (int y = 0; y < r.h; ++y) {
      const double* row = src.data() + (p * H + r.y0 + y) * W + r.x0;
      std::copy(row, row + r.w, out.data() + (p * r.h + y) * r.w);
    }
  return Tensor::from(std::move(shape), std::move(out));
}

void paste_map(Tensor& map, const Tensor& patch, const Rect& r) {
  if (map.rank() < 2) throw ShapeError("paste_map: rank must be >= 2");
  const auto H = map.dim(map.rank() - 2), W = map.dim(map.rank() - 1);
  check_rect(r, static_cast<int>(W), static_cast<int>(H));
  const auto planes = map.numel() / (H * W);
  if (patch.numel() != planes * r.h * r.w)
    throw ShapeError("paste_map: patch " + shape_str(patch.shape()) +
                     " does not fit " + to_string(r));
  auto dst = map.mutable_data();
  const auto src = patch.data();
  for (std::size_t p = 0; p < planes; ++p)
    for (int y = 0; y < r.h; ++y)
      std::copy(src.data() + (p * r.h + y) * r.w, src.data() + (p * r.h + y + 1) * r.w,
                dst.data() + (p * H + r.y0 + y) * W + r.x0);
}

}  // namespace l2g
