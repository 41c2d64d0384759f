#include "l2g/labels.hpp"

#include <sstream>

#include "l2g/error.hpp"
#include "l2g/keyvalue.hpp"
#include "l2g/pnm.hpp"

namespace l2g {

LabelMap pseudo_labels(const AttentionMaps& attention, double bg_threshold) {
  const auto C = attention.classes(), H = attention.height(), W = attention.width();
  LabelMap out(static_cast<int>(W), static_cast<int>(H), Provenance::kPseudo);
  const auto a = attention.maps.data();
  for (std::size_t p = 0; p < H * W; ++p) {
    double best = bg_threshold;
    std::uint8_t label = 0;
    for (std::size_t c = 0; c < C; ++c) {
      if (a[c * H * W + p] > best) {
        best = a[c * H * W + p];
        label = static_cast<std::uint8_t>(c + 1);
      }
    }
    out.labels[p] = label;
  }
  return out;
}

ConfusionMatrix::ConfusionMatrix(std::size_t classes)
    : classes_(classes), counts_(classes * classes, 0) {}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (auto v : counts_) t += v;
  return t;
}

void ConfusionMatrix::add(const LabelMap& pred, const LabelMap& gt, const std::string& sample) {
  if (pred.width != gt.width || pred.height != gt.height)
    throw ShapeError("confusion_matrix: sample " + sample + " prediction " +
                     std::to_string(pred.width) + "x" + std::to_string(pred.height) +
                     " vs ground truth " + std::to_string(gt.width) + "x" +
                     std::to_string(gt.height));
  for (std::size_t i = 0; i < gt.labels.size(); ++i) {
    const auto g = gt.labels[i], p = pred.labels[i];
    if (g >= classes_ || p >= classes_)
      throw ValidationError("confusion_matrix: sample " + sample + " has label " +
                            std::to_string(std::max(g, p)) + " >= " + std::to_string(classes_));
    ++counts_[g * classes_ + p];
  }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.classes_ != classes_) throw ShapeError("confusion_matrix: class count mismatch");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

ConfusionMatrix ConfusionMatrix::from_counts(std::size_t classes,
                                             std::vector<std::uint64_t> counts) {
  if (counts.size() != classes * classes)
    throw ShapeError("confusion_matrix: expected " + std::to_string(classes * classes) +
                     " counts, got " + std::to_string(counts.size()));
  ConfusionMatrix cm(classes);
  cm.counts_ = std::move(counts);
  return cm;
}

ConfusionMatrix confusion_matrix(const std::vector<LabelMap>& preds,
                                 const std::vector<LabelMap>& gts, std::size_t classes) {
  if (preds.size() != gts.size())
    throw ShapeError("confusion_matrix: " + std::to_string(preds.size()) + " predictions for " +
                     std::to_string(gts.size()) + " ground-truth maps");
  ConfusionMatrix cm(classes);
  for (std::size_t i = 0; i < preds.size(); ++i) cm.add(preds[i], gts[i], std::to_string(i));
  return cm;
}

IoUReport miou(const ConfusionMatrix& cm) {
  IoUReport r;
  const auto K = cm.classes();
  r.per_class.resize(K);
  r.total_pixels = cm.total();
  double sum = 0.0;
  int counted = 0;
  for (std::size_t c = 0; c < K; ++c) {
    auto& e = r.per_class[c];
    for (std::size_t j = 0; j < K; ++j) {
      e.gt_pixels += cm.at(c, j);
      e.pred_pixels += cm.at(j, c);
    }
    e.intersection = cm.at(c, c);
    e.union_ = e.gt_pixels + e.pred_pixels - e.intersection;
    if (e.union_ > 0) {
      e.iou = static_cast<double>(e.intersection) / static_cast<double>(e.union_);
      e.counted = true;
      sum += e.iou;
      ++counted;
    }
  }
  r.mean_iou = counted ? sum / counted : 0.0;
  return r;
}

std::string iou_report_csv(const IoUReport& report, const std::vector<std::string>& names) {
  std::ostringstream os;
  os << "class,intersection,union,iou\n";
  for (std::size_t c = 0; c < report.per_class.size(); ++c) {
    const auto& e = report.per_class[c];
    os << (c < names.size() ? names[c] : "class" + std::to_string(c)) << ',' << e.intersection
       << ',' << e.union_ << ',' << format_double(e.iou) << '\n';
  }
  os << "mean,,," << format_double(report.mean_iou) << '\n';
  return os.str();
}

void write_label_map(const std::filesystem::path& path, const LabelMap& map) {
  Image img(map.width, map.height, 1);
  img.pixels = map.labels;
  write_pnm(path, img);
}

LabelMap read_label_map(const std::filesystem::path& path, Provenance provenance) {
  const auto img = read_pnm(path);
  if (img.channels != 1) throw IoError(path.string() + ": label map must be P5");
  LabelMap m(img.width, img.height, provenance);
  m.labels = img.pixels;
  return m;
}

}  // namespace l2g
