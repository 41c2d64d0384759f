#include "l2g/attention.hpp"

#include <algorithm>
#include <cmath>

#include "l2g/error.hpp"
#include "l2g/ops.hpp"
#include "l2g/pnm.hpp"
#include "l2g/tensor_io.hpp"

namespace l2g {

AttentionMaps cam(const Tensor& features, const std::vector<std::uint8_t>& labels) {
  Shape shape = features.shape();
  if (shape.size() == 4 && shape[0] == 1) shape.erase(shape.begin());
  if (shape.size() != 3)
    throw ShapeError("cam: expected [C,H,W], got " + shape_str(features.shape()));
  const auto C = shape[0], HW = shape[1] * shape[2];
  if (labels.size() != C)
    throw ShapeError("cam: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(C) + " channels");
  std::vector<double> out(C * HW, 0.0);
  const auto in = features.data();
  for (std::size_t c = 0; c < C; ++c) {
    if (!labels[c]) continue;
    const double* src = in.data() + c * HW;
    double m = 0.0;
    for (std::size_t i = 0; i < HW; ++i) m = std::max(m, src[i]);
    if (m <= 0.0) continue;
    double* dst = out.data() + c * HW;
    for (std::size_t i = 0; i < HW; ++i) dst[i] = src[i] > 0.0 ? src[i] / m : 0.0;
  }
  return {Tensor::from(std::move(shape), std::move(out)), labels};
}

std::size_t scaled_size(std::size_t size, double scale, int stride) {
  const double units = std::round(scale * static_cast<double>(size) / stride);
  return static_cast<std::size_t>(std::max(1.0, units)) * static_cast<std::size_t>(stride);
}

Tensor activation_map(const Network& net, const Tensor& image, std::size_t classes,
                      AttentionSource source, std::size_t out_h, std::size_t out_w) {
  Tensor f = forward_features(net, image.detach());
  if (source == AttentionSource::kSoftmax) f = ops::channel_softmax(f);
  f = ops::crop(f, 0, classes, 0, 0, f.dim(2), f.dim(3));
  f = ops::relu(f);
  f = ops::bilinear_resize(f, out_h, out_w);
  return Tensor::from({classes, out_h, out_w},
                      std::vector<double>(f.data().begin(), f.data().end()));
}

AttentionMaps multi_scale_attention(const Network& net, const Tensor& image,
                                    const MultiScaleOptions& options,
                                    const std::vector<std::uint8_t>& labels) {
  if (options.scales.empty()) throw ArgumentError("multi_scale_attention: empty scale list");
  if (image.rank() != 4 || image.dim(0) != 1)
    throw ShapeError("multi_scale_attention: expected [1,3,H,W], got " +
                     shape_str(image.shape()));
  const auto H = image.dim(2), W = image.dim(3);
  const auto C = labels.size();
  const int stride = net.config().feature_stride();
  std::vector<double> acc(C * H * W, 0.0);
  int terms = 0;
  auto accumulate = [&](const Tensor& m) {
    const auto d = m.data();
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += d[i];
    ++terms;
  };
  for (double s : options.scales) {
    if (!(s > 0.0)) throw ArgumentError("multi_scale_attention: scales must be positive");
    const auto sh = scaled_size(H, s, stride), sw = scaled_size(W, s, stride);
    Tensor scaled = (sh == H && sw == W) ? image : ops::bilinear_resize(image, sh, sw);
    // Each term is upsampled straight to the image grid.
    auto run = [&](const Tensor& input) {
      return activation_map(net, input, C, options.source, H, W);
    };
    accumulate(run(scaled));
    if (options.flip) accumulate(ops::flip_horizontal(run(ops::flip_horizontal(scaled))));
  }
  if (terms > 1)
    for (auto& v : acc) v /= terms;
  return cam(Tensor::from({C, H, W}, std::move(acc)), labels);
}

AttentionMaps aggregate_windows(const std::vector<AttentionMaps>& maps,
                                const std::vector<Rect>& rects, int g,
                                WindowFusion fusion) {
  if (maps.size() != rects.size())
    throw GeometryError("aggregate_windows: " + std::to_string(maps.size()) + " maps for " +
                        std::to_string(rects.size()) + " rects");
  if (maps.empty()) throw ArgumentError("aggregate_windows: no windows");
  const auto C = maps[0].classes();
  const auto G = static_cast<std::size_t>(g);
  std::vector<double> acc(C * G * G, 0.0);
  std::vector<int> cover(G * G, 0);
  for (std::size_t k = 0; k < maps.size(); ++k) {
    const auto& m = maps[k];
    const auto& r = rects[k];
    if (!r.inside(g, g))
      throw GeometryError("aggregate_windows: " + to_string(r) + " outside " +
                          std::to_string(g) + "x" + std::to_string(g));
    if (m.classes() != C || m.height() != static_cast<std::size_t>(r.h) ||
        m.width() != static_cast<std::size_t>(r.w))
      throw GeometryError("aggregate_windows: map " + shape_str(m.maps.shape()) +
                          " does not match " + to_string(r));
    const auto d = m.maps.data();
    for (int y = 0; y < r.h; ++y)
      for (int x = 0; x < r.w; ++x) {
        const auto p = static_cast<std::size_t>(r.y0 + y) * G + r.x0 + x;
        ++cover[p];
        for (std::size_t c = 0; c < C; ++c) {
          const double v = d[(c * r.h + y) * r.w + x];
          double& a = acc[c * G * G + p];
          a = fusion == WindowFusion::kMax ? std::max(a, v) : a + v;
        }
      }
  }
  if (fusion == WindowFusion::kMean)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t p = 0; p < G * G; ++p)
        if (cover[p]) acc[c * G * G + p] /= cover[p];
  return cam(Tensor::from({C, G, G}, std::move(acc)), maps[0].labels);
}

std::vector<std::string> export_attention(const AttentionMaps& maps,
                                          const std::filesystem::path& dir,
                                          const std::string& stem) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> files;
  const auto H = maps.height(), W = maps.width();
  const auto d = maps.maps.data();
  for (std::size_t c = 0; c < maps.classes(); ++c) {
    Image img(static_cast<int>(W), static_cast<int>(H), 1);
    for (std::size_t i = 0; i < H * W; ++i)
      img.pixels[i] = static_cast<std::uint8_t>(
          std::lround(std::clamp(d[c * H * W + i], 0.0, 1.0) * 255.0));
    const auto name = stem + "_c" + std::to_string(c) + ".pgm";
    write_pnm(dir / name, img);
    files.push_back(name);
  }
  save_tensor(dir / (stem + ".l2gt"), maps.maps);
  return files;
}

}  // namespace l2g
