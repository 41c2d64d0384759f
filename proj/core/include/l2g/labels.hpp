#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "l2g/attention.hpp"
#include "l2g/image.hpp"

namespace l2g {

// Per pixel, the argmax over [theta_bg, A^1, ..., A^C] with the constant in
// the background slot. A class wins only if it strictly exceeds every
// earlier candidate, so ties go to background first, then the lowest class.
LabelMap pseudo_labels(const AttentionMaps& attention, double bg_threshold);

// (C+1) x (C+1) pixel counts, row = ground truth, column = prediction.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes);

  std::size_t classes() const { return classes_; }
  std::uint64_t at(std::size_t gt, std::size_t pred) const {
    return counts_[gt * classes_ + pred];
  }
  std::uint64_t total() const;

  // Throws ShapeError naming `sample` when sizes differ, ValidationError for
  // a label value outside [0, classes).
  void add(const LabelMap& pred, const LabelMap& gt, const std::string& sample = "");
  void merge(const ConfusionMatrix& other);

  static ConfusionMatrix from_counts(std::size_t classes, std::vector<std::uint64_t> counts);
  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::size_t classes_;
  std::vector<std::uint64_t> counts_;
};

ConfusionMatrix confusion_matrix(const std::vector<LabelMap>& preds,
                                 const std::vector<LabelMap>& gts, std::size_t classes);

struct ClassIoU {
  std::uint64_t intersection = 0;
  std::uint64_t union_ = 0;
  std::uint64_t gt_pixels = 0;
  std::uint64_t pred_pixels = 0;
  double iou = 0.0;  // 0 when union is 0
  bool counted = false;
};

struct IoUReport {
  std::vector<ClassIoU> per_class;
  // Mean IoU over classes with a nonzero union; classes absent from both
  // prediction and ground truth are excluded.
  double mean_iou = 0.0;
  std::uint64_t total_pixels = 0;
};

IoUReport miou(const ConfusionMatrix& cm);

// CSV: header "class,intersection,union,iou", one row per class then
// "mean,,,<mIoU>".
std::string iou_report_csv(const IoUReport& report, const std::vector<std::string>& names);

// Label map as P5 with class indices as pixel values.
void write_label_map(const std::filesystem::path& path, const LabelMap& map);
LabelMap read_label_map(const std::filesystem::path& path, Provenance provenance);

}  // namespace l2g
