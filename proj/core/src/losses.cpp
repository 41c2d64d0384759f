#include "l2g/losses.hpp"

#include <cmath>
#include <sstream>

#include "l2g/error.hpp"
#include "l2g/keyvalue.hpp"
#include "l2g/ops.hpp"

namespace l2g {

Tensor classification_loss(const Tensor& logits, const std::vector<std::uint8_t>& labels) {
  if (logits.rank() != 2 || logits.dim(1) != labels.size())
    throw ShapeError("classification_loss: logits " + shape_str(logits.shape()) +
                     " do not match " + std::to_string(labels.size()) + " labels");
  const auto N = logits.dim(0), C = logits.dim(1);
  std::vector<double> t(N * C);
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t c = 0; c < C; ++c) t[i * C + c] = labels[c] ? 1.0 : 0.0;
  return ops::sigmoid_bce(logits, Tensor::from({N, C}, std::move(t)));
}

Tensor global_softmax(const Tensor& features, std::size_t classes, int g) {
  if (features.rank() != 4 || features.dim(1) != classes + 1)
    throw ShapeError("global_softmax: expected " + std::to_string(classes + 1) +
                     " channels, got " + shape_str(features.shape()));
  const auto size = static_cast<std::size_t>(g);
  return ops::bilinear_resize(ops::channel_softmax(features), size, size);
}

namespace {

void check_transfer_inputs(const std::vector<Tensor>& targets, const Tensor& G,
                           const std::vector<Rect>& rects, const char* who) {
  if (targets.size() != rects.size() || targets.empty())
    throw ShapeError(std::string(who) + ": " + std::to_string(targets.size()) +
                     " targets for " + std::to_string(rects.size()) + " rects");
  if (G.rank() != 4 || G.dim(0) != 1)
    throw ShapeError(std::string(who) + ": G must be [1,C+1,g,g], got " + shape_str(G.shape()));
  const auto C = G.dim(1) - 1;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const auto& t = targets[i];
    const auto& r = rects[i];
    if (t.rank() != 3 || t.dim(0) != C || t.dim(1) != static_cast<std::size_t>(r.h) ||
        t.dim(2) != static_cast<std::size_t>(r.w))
      throw ShapeError(std::string(who) + ": target " + std::to_string(i) + " " +
                       shape_str(t.shape()) + " does not match " + to_string(r) + " with " +
                       std::to_string(C) + " classes");
  }
}

// Differentiable foreground crop of G at r.
Tensor foreground_crop(const Tensor& G, const Rect& r) {
  const auto H = static_cast<int>(G.dim(2)), W = static_cast<int>(G.dim(3));
  if (!r.inside(W, H))
    throw GeometryError(to_string(r) + " outside bounds " + std::to_string(W) + "x" +
                        std::to_string(H));
  return ops::crop(G, 0, G.dim(1) - 1, static_cast<std::size_t>(r.y0),
                   static_cast<std::size_t>(r.x0), static_cast<std::size_t>(r.h),
                   static_cast<std::size_t>(r.w));
}

// MSE between a G crop [1,C,l,l] and a target [C,l,l]. A target that
// tracks gradients (transfer into the local network enabled) is kept in
// the graph.
Tensor view_mse(const Tensor& crop, const Tensor& target) {
  Shape s = target.shape();
  s.insert(s.begin(), 1);
  if (!target.requires_grad()) {
    return ops::mse(crop, Tensor::from(std::move(s), std::vector<double>(target.data().begin(),
                                                                         target.data().end())));
  }
  const Tensor d = ops::sub(crop, ops::reshape(target, std::move(s)));
  return ops::mean(ops::mul(d, d));
}

TransferLoss reduce_views(std::vector<Tensor> terms, int fallback) {
  TransferLoss out;
  out.fallback_count = fallback;
  Tensor acc = terms[0];
  out.per_view.push_back(terms[0].item());
  for (std::size_t i = 1; i < terms.size(); ++i) {
    acc = ops::add(acc, terms[i]);
    out.per_view.push_back(terms[i].item());
  }
  out.loss = ops::scale(acc, 1.0 / static_cast<double>(terms.size()));
  return out;
}

}  // namespace

TransferLoss attention_transfer_loss(const std::vector<Tensor>& targets, const Tensor& G,
                                     const std::vector<Rect>& rects) {
  check_transfer_inputs(targets, G, rects, "attention_transfer_loss");
  std::vector<Tensor> terms;
  for (std::size_t i = 0; i < targets.size(); ++i)
    terms.push_back(view_mse(foreground_crop(G, rects[i]), targets[i]));
  return reduce_views(std::move(terms), 0);
}

Tensor binarize(const Tensor& attention, double tau) {
  std::vector<double> b(attention.numel());
  const auto a = attention.data();
  for (std::size_t i = 0; i < b.size(); ++i) b[i] = a[i] >= tau ? 1.0 : 0.0;
  return Tensor::from(attention.shape(), std::move(b));
}

std::size_t saliency_cardinality(const Tensor& saliency) {
  std::size_t n = 0;
  for (double v : saliency.data()) n += v > 0.5;
  return n;
}

TransferLoss shape_transfer_loss(const std::vector<Tensor>& targets, const Tensor& saliency,
                                 const Tensor& G, const std::vector<Rect>& rects, double tau) {
  check_transfer_inputs(targets, G, rects, "shape_transfer_loss");
  if (!(tau > 0.0 && tau < 1.0)) throw ArgumentError("shape_transfer_loss: tau must be in (0,1)");
  if (saliency.rank() != 2 || saliency.dim(0) != G.dim(2) || saliency.dim(1) != G.dim(3))
    throw ShapeError("shape_transfer_loss: saliency " + shape_str(saliency.shape()) +
                     " does not match G grid " + shape_str(G.shape()));
  std::vector<Tensor> terms;
  int fallback = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const Tensor s = crop_map(saliency, rects[i]);
    Tensor target = targets[i];
    if (saliency_cardinality(s) != 0) {
      const auto C = target.dim(0), P = s.numel();
      std::vector<double> t(C * P);
      const auto a = target.data();
      const auto sv = s.data();
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t p = 0; p < P; ++p)
          t[c * P + p] = (a[c * P + p] >= tau ? 1.0 : 0.0) * sv[p];
      target = Tensor::from(target.shape(), std::move(t));
    } else {
      ++fallback;
    }
    terms.push_back(view_mse(foreground_crop(G, rects[i]), target));
  }
  return reduce_views(std::move(terms), fallback);
}

TotalLoss total_loss(const Tensor& l_cls, const Tensor& l_kt, double lambda) {
  if (!std::isfinite(l_cls.item())) throw NumericError("L_cls is not finite");
  if (!std::isfinite(l_kt.item())) throw NumericError("L_kt is not finite");
  if (!std::isfinite(lambda)) throw NumericError("lambda is not finite");
  TotalLoss out;
  out.loss = lambda == 0.0 ? l_cls : ops::add(l_cls, ops::scale(l_kt, lambda));
  out.report.l_cls = l_cls.item();
  out.report.l_kt = l_kt.item();
  out.report.lambda = lambda;
  out.report.total = out.loss.item();
  return out;
}

std::string loss_csv_header() { return "step,l_cls,l_kt,lambda,total,fallback_count"; }

std::string loss_csv_row(long step, const LossReport& r) {
  std::ostringstream os;
  os << step << ',' << format_double(r.l_cls) << ',' << format_double(r.l_kt) << ','
     << format_double(r.lambda) << ',' << format_double(r.total) << ',' << r.fallback_count;
  return os.str();
}

}  // namespace l2g
