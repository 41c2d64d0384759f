#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "l2g/tensor.hpp"
#include "l2g/views.hpp"

namespace l2g {

// Mean over views and classes of the sigmoid cross-entropy between each
// view's pooled logits (`logits` is [N, C]) and the image label y. N = 1 is
// the single-image form.
Tensor classification_loss(const Tensor& logits, const std::vector<std::uint8_t>& labels);

// Channel softmax of the global network's last layer [1, C+1, h, w],
// upsampled bilinearly to g x g. Throws ShapeError when the channel count is
// not `classes + 1`.
Tensor global_softmax(const Tensor& features, std::size_t classes, int g);

struct TransferLoss {
  Tensor loss;                     // scalar, differentiable w.r.t. G only
  std::vector<double> per_view;    // term of each view
  int fallback_count = 0;          // views whose saliency crop was empty
};

// (1/N) sum_i MSE(A_i, foreground channels of G cropped at rect_i).
// `targets[i]` is [C, l, l] at rect_i's pixel size; targets carry no
// gradient. The background channel (index C) never enters the MSE.
TransferLoss attention_transfer_loss(const std::vector<Tensor>& targets, const Tensor& G,
                                     const std::vector<Rect>& rects);

// Saliency-gated transfer. Per view, S_i = saliency cropped at rect_i. If
// any pixel of S_i exceeds 0.5 the target is B_i * S_i, where
// B_i = [A_i >= tau] per class and S_i multiplies every class; otherwise the
// target is A_i, as in attention_transfer_loss.
TransferLoss shape_transfer_loss(const std::vector<Tensor>& targets, const Tensor& saliency,
                                 const Tensor& G, const std::vector<Rect>& rects, double tau);

// Binary map B = [A >= tau].
Tensor binarize(const Tensor& attention, double tau);

// Pixels with saliency > 0.5.
std::size_t saliency_cardinality(const Tensor& saliency);

struct LossReport {
  double l_cls = 0.0;
  double l_kt = 0.0;
  double lambda = 0.0;
  double total = 0.0;  // l_cls + lambda * l_kt (+ l_cls_global when enabled)
  double l_cls_global = 0.0;
  std::vector<double> per_view;
  int fallback_count = 0;
};

struct TotalLoss {
  Tensor loss;
  LossReport report;
};

// L = L_cls + lambda * L_kt. With lambda == 0 the result is L_cls itself and
// carries no graph edge into L_kt. Throws NumericError naming a non-finite
// term.
TotalLoss total_loss(const Tensor& l_cls, const Tensor& l_kt, double lambda);

// CSV row matching losses.csv: step,l_cls,l_kt,lambda,total,fallback_count.
std::string loss_csv_header();
std::string loss_csv_row(long step, const LossReport& r);

}  // namespace l2g
