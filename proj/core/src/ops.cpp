#include "l2g/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

#include "l2g/error.hpp"

namespace l2g::ops {

namespace {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using MatrixMap = Eigen::Map<RowMatrix>;

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " +
                     std::to_string(rank) + ", got " + shape_str(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

// Gradient buffer of an input, or nullptr when it does not track gradients.
double* grad_target(const std::shared_ptr<detail::TensorImpl>& t) {
  return t->requires_grad ? t->ensure_grad().data() : nullptr;
}

struct Geometry {
  std::size_t batch, in_ch, in_h, in_w;
  std::size_t out_ch, k_h, k_w, out_h, out_w;
  int stride, pad;
  std::size_t patch() const { return in_ch * k_h * k_w; }
  std::size_t pixels() const { return out_h * out_w; }
};

void im2col(const double* x, const Geometry& g, double* cols) {
  const auto pixels = g.pixels();
  for (std::size_t c = 0; c < g.in_ch; ++c) {
    for (std::size_t ky = 0; ky < g.k_h; ++ky) {
      for (std::size_t kx = 0; kx < g.k_w; ++kx) {
        double* row = cols + ((c * g.k_h + ky) * g.k_w + kx) * pixels;
        const double* plane = x + c * g.in_h * g.in_w;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const long iy = static_cast<long>(oy) * g.stride - g.pad +
                          static_cast<long>(ky);
          double* dst = row + oy * g.out_w;
          if (iy < 0 || iy >= static_cast<long>(g.in_h)) {
            std::fill(dst, dst + g.out_w, 0.0);
            continue;
          }
          const double* src = plane + iy * g.in_w;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const long ix = static_cast<long>(ox) * g.stride - g.pad +
                            static_cast<long>(kx);
            dst[ox] = (ix < 0 || ix >= static_cast<long>(g.in_w)) ? 0.0
                                                                  : src[ix];
          }
        }
      }
    }
  }
}

void col2im(const double* cols, const Geometry& g, double* dx) {
  const auto pixels = g.pixels();
  for (std::size_t c = 0; c < g.in_ch; ++c) {
    for (std::size_t ky = 0; ky < g.k_h; ++ky) {
      for (std::size_t kx = 0; kx < g.k_w; ++kx) {
        const double* row = cols + ((c * g.k_h + ky) * g.k_w + kx) * pixels;
        double* plane = dx + c * g.in_h * g.in_w;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const long iy = static_cast<long>(oy) * g.stride - g.pad +
                          static_cast<long>(ky);
          if (iy < 0 || iy >= static_cast<long>(g.in_h)) continue;
          double* dst = plane + iy * g.in_w;
          const double* src = row + oy * g.out_w;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const long ix = static_cast<long>(ox) * g.stride - g.pad +
                            static_cast<long>(kx);
            if (ix >= 0 && ix < static_cast<long>(g.in_w)) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

// Per-axis bilinear sampling table.
struct Taps {
  std::vector<std::size_t> lo, hi;
  std::vector<double> frac;
};

Taps make_taps(std::size_t in, std::size_t out) {
  Taps t;
  t.lo.resize(out);
  t.hi.resize(out);
  t.frac.resize(out);
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t d = 0; d < out; ++d) {
    double src = (static_cast<double>(d) + 0.5) * ratio - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const auto lo = static_cast<std::size_t>(std::floor(src));
    t.lo[d] = lo;
    t.hi[d] = std::min(lo + 1, in - 1);
    t.frac[d] = src - static_cast<double>(lo);
  }
  return t;
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& kernel, int stride, int pad) {
  require_rank(x, 4, "conv2d input");
  require_rank(kernel, 4, "conv2d kernel");
  if (stride < 1) throw ArgumentError("conv2d: stride must be >= 1");
  if (pad < 0) throw ArgumentError("conv2d: pad must be >= 0");
  if (kernel.dim(1) != x.dim(1)) {
    throw ShapeError("conv2d: input channels (axis 1) " +
                     std::to_string(x.dim(1)) + " != kernel channels (axis 1) " +
                     std::to_string(kernel.dim(1)));
  }
  Geometry g{};
  g.batch = x.dim(0);
  g.in_ch = x.dim(1);
  g.in_h = x.dim(2);
  g.in_w = x.dim(3);
  g.out_ch = kernel.dim(0);
  g.k_h = kernel.dim(2);
  g.k_w = kernel.dim(3);
  g.stride = stride;
  g.pad = pad;
  const auto padded_h = g.in_h + 2 * static_cast<std::size_t>(pad);
  const auto padded_w = g.in_w + 2 * static_cast<std::size_t>(pad);
  if (g.k_h > padded_h || g.k_w > padded_w) {
    throw ShapeError("conv2d: kernel (axes 2,3) " + std::to_string(g.k_h) +
                     "x" + std::to_string(g.k_w) +
                     " exceeds padded input (axes 2,3) " +
                     std::to_string(padded_h) + "x" + std::to_string(padded_w));
  }
  g.out_h = (padded_h - g.k_h) / stride + 1;
  g.out_w = (padded_w - g.k_w) / stride + 1;

  const auto K = g.patch();
  const auto P = g.pixels();
  std::vector<double> cols(g.batch * K * P);
  std::vector<double> out(g.batch * g.out_ch * P);
  ConstMatrixMap w(kernel.data().data(), g.out_ch, K);
  for (std::size_t b = 0; b < g.batch; ++b) {
    double* c = cols.data() + b * K * P;
    im2col(x.data().data() + b * g.in_ch * g.in_h * g.in_w, g, c);
    MatrixMap o(out.data() + b * g.out_ch * P, g.out_ch, P);
    o.noalias() = w * ConstMatrixMap(c, K, P);
  }

  auto xi = x.impl();
  auto ki = kernel.impl();
  return Tensor::make_result(
      {g.batch, g.out_ch, g.out_h, g.out_w}, std::move(out), "conv2d",
      {x, kernel},
      [xi, ki, g, cols = std::move(cols)](const detail::TensorImpl& o) {
        const auto K = g.patch();
        const auto P = g.pixels();
        double* dx = grad_target(xi);
        double* dk = grad_target(ki);
        ConstMatrixMap w(ki->data.data(), g.out_ch, K);
        RowMatrix dcols(K, P);
        for (std::size_t b = 0; b < g.batch; ++b) {
          ConstMatrixMap go(o.grad.data() + b * g.out_ch * P, g.out_ch, P);
          ConstMatrixMap c(cols.data() + b * K * P, K, P);
          if (dk) MatrixMap(dk, g.out_ch, K).noalias() += go * c.transpose();
          if (dx) {
            dcols.noalias() = w.transpose() * go;
            col2im(dcols.data(), g, dx + b * g.in_ch * g.in_h * g.in_w);
          }
        }
      });
}

Tensor add_channel_bias(const Tensor& x, const Tensor& bias) {
  require_rank(x, 4, "add_channel_bias");
  require_rank(bias, 1, "add_channel_bias bias");
  const auto B = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  if (bias.dim(0) != C) {
    throw ShapeError("add_channel_bias: bias length " +
                     std::to_string(bias.dim(0)) + " != channels (axis 1) " +
                     std::to_string(C));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c) {
      double* p = out.data() + (b * C + c) * HW;
      for (std::size_t i = 0; i < HW; ++i) p[i] += bias[c];
    }
  auto xi = x.impl();
  auto bi = bias.impl();
  return Tensor::make_result(
      x.shape(), std::move(out), "add_channel_bias", {x, bias},
      [xi, bi, B, C, HW](const detail::TensorImpl& o) {
        if (double* dx = grad_target(xi))
          for (std::size_t i = 0; i < o.grad.size(); ++i) dx[i] += o.grad[i];
        if (double* db = grad_target(bi))
          for (std::size_t b = 0; b < B; ++b)
            for (std::size_t c = 0; c < C; ++c) {
              const double* g = o.grad.data() + (b * C + c) * HW;
              double s = 0.0;
              for (std::size_t i = 0; i < HW; ++i) s += g[i];
              db[c] += s;
            }
      });
}

Tensor relu(const Tensor& x) {
  std::vector<double> out(x.numel());
  const auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
  auto xi = x.impl();
  return Tensor::make_result(x.shape(), std::move(out), "relu", {x},
                             [xi](const detail::TensorImpl& o) {
                               double* dx = grad_target(xi);
                               if (!dx) return;
                               for (std::size_t i = 0; i < o.grad.size(); ++i)
                                 if (xi->data[i] > 0.0) dx[i] += o.grad[i];
                             });
}

Tensor sigmoid(const Tensor& x) {
  std::vector<double> out(x.numel());
  const auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-in[i]));
  auto xi = x.impl();
  return Tensor::make_result(x.shape(), std::move(out), "sigmoid", {x},
                             [xi](const detail::TensorImpl& o) {
                               double* dx = grad_target(xi);
                               if (!dx) return;
                               for (std::size_t i = 0; i < o.grad.size(); ++i) {
                                 const double s = o.data[i];
                                 dx[i] += o.grad[i] * s * (1.0 - s);
                               }
                             });
}

Tensor channel_softmax(const Tensor& x) {
  require_rank(x, 4, "channel_softmax");
  const auto B = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  std::vector<double> out(x.numel());
  const auto in = x.data();
  for (std::size_t b = 0; b < B; ++b) {
    const double* src = in.data() + b * C * HW;
    double* dst = out.data() + b * C * HW;
    for (std::size_t p = 0; p < HW; ++p) {
      double m = src[p];
      for (std::size_t c = 1; c < C; ++c) m = std::max(m, src[c * HW + p]);
      double z = 0.0;
      for (std::size_t c = 0; c < C; ++c) {
        dst[c * HW + p] = std::exp(src[c * HW + p] - m);
        z += dst[c * HW + p];
      }
      for (std::size_t c = 0; c < C; ++c) dst[c * HW + p] /= z;
    }
  }
  auto xi = x.impl();
  return Tensor::make_result(
      x.shape(), std::move(out), "channel_softmax", {x},
      [xi, B, C, HW](const detail::TensorImpl& o) {
        double* dx = grad_target(xi);
        if (!dx) return;
        for (std::size_t b = 0; b < B; ++b) {
          const double* s = o.data.data() + b * C * HW;
          const double* g = o.grad.data() + b * C * HW;
          double* d = dx + b * C * HW;
          for (std::size_t p = 0; p < HW; ++p) {
            double dot = 0.0;
            for (std::size_t c = 0; c < C; ++c) dot += s[c * HW + p] * g[c * HW + p];
            for (std::size_t c = 0; c < C; ++c)
              d[c * HW + p] += s[c * HW + p] * (g[c * HW + p] - dot);
          }
        }
      });
}

Tensor global_avg_pool(const Tensor& x) {
  require_rank(x, 4, "global_avg_pool");
  const auto B = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  std::vector<double> out(B * C);
  for (std::size_t i = 0; i < B * C; ++i) {
    const double* p = x.data().data() + i * HW;
    double s = 0.0;
    for (std::size_t j = 0; j < HW; ++j) s += p[j];
    out[i] = s / static_cast<double>(HW);
  }
  auto xi = x.impl();
  return Tensor::make_result({B, C}, std::move(out), "global_avg_pool", {x},
                             [xi, HW](const detail::TensorImpl& o) {
                               double* dx = grad_target(xi);
                               if (!dx) return;
                               const double inv = 1.0 / static_cast<double>(HW);
                               for (std::size_t i = 0; i < o.grad.size(); ++i) {
                                 const double g = o.grad[i] * inv;
                                 for (std::size_t j = 0; j < HW; ++j) dx[i * HW + j] += g;
                               }
                             });
}

Tensor bilinear_resize(const Tensor& x, std::size_t out_h, std::size_t out_w) {
  if (x.rank() < 2) throw ShapeError("bilinear_resize: rank must be >= 2");
  if (out_h == 0 || out_w == 0) {
    throw ArgumentError("bilinear_resize: output size must be >= 1, got " +
                        std::to_string(out_h) + "x" + std::to_string(out_w));
  }
  const auto in_h = x.dim(x.rank() - 2), in_w = x.dim(x.rank() - 1);
  const auto planes = x.numel() / (in_h * in_w);
  Shape shape = x.shape();
  shape[shape.size() - 2] = out_h;
  shape[shape.size() - 1] = out_w;

  auto ty = make_taps(in_h, out_h);
  auto tx = make_taps(in_w, out_w);
  std::vector<double> out(planes * out_h * out_w);
  for (std::size_t p = 0; p < planes; ++p) {
    const double* src = x.data().data() + p * in_h * in_w;
    double* dst = out.data() + p * out_h * out_w;
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      const double* r0 = src + ty.lo[oy] * in_w;
      const double* r1 = src + ty.hi[oy] * in_w;
      const double fy = ty.frac[oy];
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        const double fx = tx.frac[ox];
        const double top = r0[tx.lo[ox]] + fx * (r0[tx.hi[ox]] - r0[tx.lo[ox]]);
        const double bot = r1[tx.lo[ox]] + fx * (r1[tx.hi[ox]] - r1[tx.lo[ox]]);
        dst[oy * out_w + ox] = fy == 0.0 ? top : top + fy * (bot - top);
      }
    }
  }
  auto xi = x.impl();
  return Tensor::make_result(
      std::move(shape), std::move(out), "bilinear_resize", {x},
      [xi, planes, in_h, in_w, out_h, out_w, ty = std::move(ty),
       tx = std::move(tx)](const detail::TensorImpl& o) {
        double* dx = grad_target(xi);
        if (!dx) return;
        for (std::size_t p = 0; p < planes; ++p) {
          const double* g = o.grad.data() + p * out_h * out_w;
          double* d = dx + p * in_h * in_w;
          for (std::size_t oy = 0; oy < out_h; ++oy) {
            const double fy = ty.frac[oy];
            double* r0 = d + ty.lo[oy] * in_w;
            double* r1 = d + ty.hi[oy] * in_w;
            for (std::size_t ox = 0; ox < out_w; ++ox) {
              const double fx = tx.frac[ox];
              const double v = g[oy * out_w + ox];
              r0[tx.lo[ox]] += v * (1.0 - fy) * (1.0 - fx);
              r0[tx.hi[ox]] += v * (1.0 - fy) * fx;
              r1[tx.lo[ox]] += v * fy * (1.0 - fx);
              r1[tx.hi[ox]] += v * fy * fx;
            }
          }
        }
      });
}

Tensor crop(const Tensor& x, std::size_t c0, std::size_t c1, std::size_t y0,
            std::size_t x0, std::size_t h, std::size_t w) {
  require_rank(x, 4, "crop");
  const auto B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (c0 >= c1 || c1 > C || y0 + h > H || x0 + w > W || h == 0 || w == 0) {
    throw ShapeError("crop: window channels [" + std::to_string(c0) + "," +
                     std::to_string(c1) + ") rows [" + std::to_string(y0) +
                     "," + std::to_string(y0 + h) + ") cols [" +
                     std::to_string(x0) + "," + std::to_string(x0 + w) +
                     ") outside " + shape_str(x.shape()));
  }
  const auto nc = c1 - c0;
  std::vector<double> out(B * nc * h * w);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < nc; ++c)
      for (std::size_t y = 0; y < h; ++y) {
        const double* src =
            x.data().data() + ((b * C + c0 + c) * H + y0 + y) * W + x0;
        std::copy(src, src + w, out.data() + ((b * nc + c) * h + y) * w);
      }
  auto xi = x.impl();
  return Tensor::make_result(
      {B, nc, h, w}, std::move(out), "crop", {x},
      [xi, B, C, H, W, c0, nc, y0, x0, h, w](const detail::TensorImpl& o) {
        double* dx = grad_target(xi);
        if (!dx) return;
        for (std::size_t b = 0; b < B; ++b)
          for (std::size_t c = 0; c < nc; ++c)
            for (std::size_t y = 0; y < h; ++y) {
              const double* g = o.grad.data() + ((b * nc + c) * h + y) * w;
              double* d = dx + ((b * C + c0 + c) * H + y0 + y) * W + x0;
              for (std::size_t i = 0; i < w; ++i) d[i] += g[i];
            }
      });
}

Tensor flip_horizontal(const Tensor& x) {
  if (x.rank() < 1) throw ShapeError("flip_horizontal: rank must be >= 1");
  const auto W = x.dim(x.rank() - 1);
  const auto rows = x.numel() / W;
  std::vector<double> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t i = 0; i < W; ++i) out[r * W + i] = x[r * W + W - 1 - i];
  auto xi = x.impl();
  return Tensor::make_result(x.shape(), std::move(out), "flip_horizontal", {x},
                             [xi, rows, W](const detail::TensorImpl& o) {
                               double* dx = grad_target(xi);
                               if (!dx) return;
                               for (std::size_t r = 0; r < rows; ++r)
                                 for (std::size_t i = 0; i < W; ++i)
                                   dx[r * W + W - 1 - i] += o.grad[r * W + i];
                             });
}

Tensor normalize_by_max(const Tensor& x) {
  require_rank(x, 4, "normalize_by_max");
  const auto planes = x.dim(0) * x.dim(1), HW = x.dim(2) * x.dim(3);
  std::vector<double> out(x.numel(), 0.0);
  std::vector<std::size_t> arg(planes, 0);
  std::vector<double> peak(planes, 0.0);
  for (std::size_t p = 0; p < planes; ++p) {
    const double* src = x.data().data() + p * HW;
    for (std::size_t i = 0; i < HW; ++i)
      if (src[i] > peak[p]) {
        peak[p] = src[i];
        arg[p] = i;
      }
    if (peak[p] <= 0.0) continue;
    for (std::size_t i = 0; i < HW; ++i) out[p * HW + i] = src[i] / peak[p];
  }
  auto xi = x.impl();
  return Tensor::make_result(
      x.shape(), std::move(out), "normalize_by_max", {x},
      [xi, planes, HW, arg = std::move(arg), peak = std::move(peak)](
          const detail::TensorImpl& o) {
        double* dx = grad_target(xi);
        if (!dx) return;
        for (std::size_t p = 0; p < planes; ++p) {
          if (peak[p] <= 0.0) continue;
          const double* g = o.grad.data() + p * HW;
          const double* y = o.data.data() + p * HW;
          double dot = 0.0;
          for (std::size_t i = 0; i < HW; ++i) {
            dx[p * HW + i] += g[i] / peak[p];
            dot += g[i] * y[i];
          }
          dx[p * HW + arg[p]] -= dot / peak[p];
        }
      });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel())
    throw ShapeError("reshape: " + shape_str(x.shape()) + " to " + shape_str(shape));
  auto xi = x.impl();
  return Tensor::make_result(std::move(shape),
                             std::vector<double>(x.data().begin(), x.data().end()), "reshape",
                             {x}, [xi](const detail::TensorImpl& o) {
                               double* dx = grad_target(xi);
                               if (!dx) return;
                               for (std::size_t i = 0; i < o.grad.size(); ++i)
                                 dx[i] += o.grad[i];
                             });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  auto ai = a.impl();
  auto bi = b.impl();
  return Tensor::make_result(a.shape(), std::move(out), "add", {a, b},
                             [ai, bi](const detail::TensorImpl& o) {
                               for (auto* d : {grad_target(ai), grad_target(bi)})
                                 if (d)
                                   for (std::size_t i = 0; i < o.grad.size(); ++i)
                                     d[i] += o.grad[i];
                             });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  auto ai = a.impl();
  auto bi = b.impl();
  return Tensor::make_result(a.shape(), std::move(out), "sub", {a, b},
                             [ai, bi](const detail::TensorImpl& o) {
                               if (double* da = grad_target(ai))
                                 for (std::size_t i = 0; i < o.grad.size(); ++i)
                                   da[i] += o.grad[i];
                               if (double* db = grad_target(bi))
                                 for (std::size_t i = 0; i < o.grad.size(); ++i)
                                   db[i] -= o.grad[i];
                             });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  auto ai = a.impl();
  auto bi = b.impl();
  return Tensor::make_result(a.shape(), std::move(out), "mul", {a, b},
                             [ai, bi](const detail::TensorImpl& o) {
                               if (double* da = grad_target(ai))
                                 for (std::size_t i = 0; i < o.grad.size(); ++i)
                                   da[i] += o.grad[i] * bi->data[i];
                               if (double* db = grad_target(bi))
                                 for (std::size_t i = 0; i < o.grad.size(); ++i)
                                   db[i] += o.grad[i] * ai->data[i];
                             });
}

Tensor scale(const Tensor& x, double factor) {
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * factor;
  auto xi = x.impl();
  return Tensor::make_result(x.shape(), std::move(out), "scale", {x},
                             [xi, factor](const detail::TensorImpl& o) {
                               double* dx = grad_target(xi);
                               if (!dx) return;
                               for (std::size_t i = 0; i < o.grad.size(); ++i)
                                 dx[i] += o.grad[i] * factor;
                             });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  auto xi = x.impl();
  return Tensor::make_result({}, {s}, "sum", {x},
                             [xi](const detail::TensorImpl& o) {
                               double* dx = grad_target(xi);
                               if (!dx) return;
                               for (std::size_t i = 0; i < xi->data.size(); ++i)
                                 dx[i] += o.grad[0];
                             });
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw ShapeError("mean of empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor mse(const Tensor& x, const Tensor& target) {
  require_same_shape(x, target, "mse");
  const auto n = static_cast<double>(x.numel());
  double s = 0.0;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const double d = x[i] - target[i];
    s += d * d;
  }
  auto xi = x.impl();
  std::vector<double> t(target.data().begin(), target.data().end());
  return Tensor::make_result({}, {s / n}, "mse", {x},
                             [xi, t = std::move(t), n](const detail::TensorImpl& o) {
                               double* dx = grad_target(xi);
                               if (!dx) return;
                               const double k = 2.0 * o.grad[0] / n;
                               for (std::size_t i = 0; i < t.size(); ++i)
                                 dx[i] += k * (xi->data[i] - t[i]);
                             });
}

Tensor sigmoid_bce(const Tensor& logits, const Tensor& targets) {
  require_same_shape(logits, targets, "sigmoid_bce");
  const auto n = static_cast<double>(logits.numel());
  double s = 0.0;
  for (std::size_t i = 0; i < logits.numel(); ++i) {
    const double z = logits[i];
    // -[t log sigmoid(z) + (1-t) log(1-sigmoid(z))] = softplus(z) - t z
    s += std::max(z, 0.0) - targets[i] * z + std::log1p(std::exp(-std::abs(z)));
  }
  auto li = logits.impl();
  std::vector<double> t(targets.data().begin(), targets.data().end());
  return Tensor::make_result(
      {}, {s / n}, "sigmoid_bce", {logits},
      [li, t = std::move(t), n](const detail::TensorImpl& o) {
        double* dl = grad_target(li);
        if (!dl) return;
        const double k = o.grad[0] / n;
        for (std::size_t i = 0; i < t.size(); ++i) {
          const double sig = 1.0 / (1.0 + std::exp(-li->data[i]));
          dl[i] += k * (sig - t[i]);
        }
      });
}

}  // namespace l2g::ops
