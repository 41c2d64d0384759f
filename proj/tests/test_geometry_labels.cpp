#include <gtest/gtest.h>

#include "l2g/error.hpp"
#include "l2g/labels.hpp"
#include "l2g/optim.hpp"
#include "l2g/rng.hpp"
#include "l2g/views.hpp"

using namespace l2g;

TEST(SlidingWindow, DefaultGridHasNine) {
  const auto rects = sliding_window_rects(64, 48, 8);
  ASSERT_EQ(rects.size(), 9u);
  EXPECT_EQ(rects.front(), (Rect{0, 0, 48, 48}));
  EXPECT_EQ(rects.back(), (Rect{16, 16, 48, 48}));
}

TEST(SlidingWindow, LargeGridHasNine) {
  EXPECT_EQ(sliding_window_rects(448, 320, 64).size(), 9u);
}

TEST(SlidingWindow, FullWindowIsSingleRect) {
  const auto rects = sliding_window_rects(64, 64, 8);
  ASSERT_EQ(rects.size(), 1u);
  EXPECT_EQ(rects[0], (Rect{0, 0, 64, 64}));
}

TEST(SlidingWindow, ClampedLastWindowCovers) {
  // 50 - 20 = 30 is not a multiple of 7: an extra clamped window is needed.
  const auto rects = sliding_window_rects(50, 20, 7);
  std::vector<int> hit(50 * 50, 0);
  for (const auto& r : rects) {
    ASSERT_TRUE(r.inside(50, 50)) << to_string(r);
    for (int y = r.y0; y < r.y0 + r.h; ++y)
      for (int x = r.x0; x < r.x0 + r.w; ++x) hit[y * 50 + x] = 1;
  }
  for (int v : hit) EXPECT_EQ(v, 1);
}

TEST(SlidingWindow, BadArguments) {
  EXPECT_THROW(sliding_window_rects(64, 65, 8), Error);
  EXPECT_THROW(sliding_window_rects(64, 48, 0), Error);
}

TEST(CropMap, DeltaTranslates) {
  std::vector<double> v(8 * 8, 0.0);
  v[3 * 8 + 5] = 1.0;
  const auto c = crop_map(Tensor::from({8, 8}, v), Rect{2, 1, 4, 4});
  EXPECT_EQ(c.shape(), (Shape{4, 4}));
  EXPECT_EQ(c[2 * 4 + 3], 1.0);
  double s = 0;
  for (double x : c.data()) s += x;
  EXPECT_EQ(s, 1.0);
}

TEST(CropMap, FullRectIsIdentity) {
  Rng rng(1);
  std::vector<double> v(2 * 5 * 6);
  for (auto& x : v) x = rng.uniform();
  const auto t = Tensor::from({2, 5, 6}, v);
  const auto c = crop_map(t, Rect{0, 0, 6, 5});
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(c[i], v[i]);
}

TEST(CropMap, OutOfBoundsNamesRect) {
  try {
    crop_map(Tensor::zeros({8, 8}), Rect{6, 0, 4, 4});
    FAIL();
  } catch (const GeometryError& e) {
    EXPECT_NE(std::string(e.what()).find("6"), std::string::npos) << e.what();
  }
}

TEST(CropPaste, ImageRoundTrip) {
  Rng rng(3);
  Image img(20, 16, 3);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.below(256));
  const Rect r{4, 3, 10, 7};
  const auto patch = crop_image(img, r);
  Image blank(20, 16, 3);
  paste_image(blank, patch, r);
  EXPECT_EQ(crop_image(blank, r), patch);
}

TEST(Views, LocalViewsInsideGlobal) {
  Rng rng(5);
  Image img(96, 96, 3);
  const Geometry geo;
  for (int i = 0; i < 50; ++i) {
    const auto vs = make_view_set(img, geo, rng);
    EXPECT_TRUE(vs.global_rect.inside(96, 96));
    ASSERT_EQ(vs.local_rects.size(), 4u);
    for (const auto& r : vs.local_rects) {
      EXPECT_TRUE(r.inside(geo.global_size, geo.global_size));
      EXPECT_EQ(r.w, geo.local_size);
    }
  }
}

TEST(PseudoLabels, TieGoesToLowestClass) {
  AttentionMaps a{Tensor::from({2, 1, 1}, {0.9, 0.9}), {1, 1}};
  EXPECT_EQ(pseudo_labels(a, 0.3).labels[0], 1);
}

TEST(PseudoLabels, TieWithThresholdIsBackground) {
  AttentionMaps a{Tensor::from({1, 1, 1}, {0.3}), {1}};
  EXPECT_EQ(pseudo_labels(a, 0.3).labels[0], 0);
}

TEST(PseudoLabels, BelowThresholdEverywhere) {
  AttentionMaps a{Tensor::full({3, 4, 4}, 0.1), {1, 1, 1}};
  const auto m = pseudo_labels(a, 0.3);
  EXPECT_EQ(m.provenance, Provenance::kPseudo);
  for (auto v : m.labels) EXPECT_EQ(v, 0);
}

TEST(Confusion, HandExample) {
  LabelMap gt(3, 3), pred(3, 3, Provenance::kPseudo);
  gt.labels = {0, 0, 1, 0, 1, 1, 1, 1, 1};
  pred.labels = {0, 1, 1, 0, 0, 1, 1, 1, 0};
  ConfusionMatrix cm(2);
  cm.add(pred, gt);
  EXPECT_EQ(cm.at(0, 0), 2u);
  EXPECT_EQ(cm.at(0, 1), 1u);
  EXPECT_EQ(cm.at(1, 0), 2u);
  EXPECT_EQ(cm.at(1, 1), 4u);
  const auto r = miou(cm);
  EXPECT_NEAR(r.per_class[0].iou, 0.4, 1e-15);
  EXPECT_NEAR(r.per_class[1].iou, 4.0 / 7.0, 1e-15);
}

TEST(Confusion, FromCountsMiou) {
  const auto r = miou(ConfusionMatrix::from_counts(2, {2, 1, 1, 2}));
  EXPECT_DOUBLE_EQ(r.mean_iou, 0.5);
}

TEST(Confusion, AbsentClassExcluded) {
  const auto r = miou(ConfusionMatrix::from_counts(3, {4, 0, 0, 0, 4, 0, 0, 0, 0}));
  EXPECT_DOUBLE_EQ(r.mean_iou, 1.0);
  EXPECT_FALSE(r.per_class[2].counted);
}

TEST(Confusion, SizeMismatchNamesSample) {
  ConfusionMatrix cm(2);
  try {
    cm.add(LabelMap(3, 3), LabelMap(3, 4), "000017");
    FAIL();
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("000017"), std::string::npos);
  }
}

TEST(Confusion, LabelOutOfRange) {
  ConfusionMatrix cm(2);
  LabelMap bad(1, 1);
  bad.labels[0] = 2;
  EXPECT_THROW(cm.add(bad, LabelMap(1, 1)), ValidationError);
}

TEST(Sgd, PlainStep) {
  std::vector<double> p{3.0}, g{1.0}, v{0.0};
  sgd_update(p, g, v, {1.0, 0.0, 0.0});
  EXPECT_DOUBLE_EQ(p[0], 2.0);
}

TEST(Sgd, MomentumTwoSteps) {
  std::vector<double> p{1.0}, g{1.0}, v{0.0};
  const SgdOptions o{0.1, 0.9, 0.0};
  sgd_update(p, g, v, o);
  EXPECT_NEAR(p[0], 0.9, 1e-15);
  sgd_update(p, g, v, o);
  EXPECT_NEAR(p[0], 0.71, 1e-15);
}

TEST(Sgd, ZeroLrLeavesParams) {
  std::vector<double> p{1.5, -2.0}, g{3.0, 4.0}, v{0.0, 0.0};
  sgd_update(p, g, v, {0.0, 0.9, 5e-4});
  EXPECT_EQ(p[0], 1.5);
  EXPECT_EQ(p[1], -2.0);
}

TEST(Sgd, SkipsParamsWithoutGrad) {
  auto a = Tensor::from({1}, {1.0}, true);
  auto b = Tensor::from({1}, {1.0}, true);
  Sgd opt({a, b}, {0.1, 0.9, 5e-4});
  a.mutable_grad()[0] = 1.0;
  opt.step();
  EXPECT_NE(a[0], 1.0);
  EXPECT_EQ(b[0], 1.0);
}
