#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "l2g/data.hpp"
#include "l2g/error.hpp"
#include "l2g/keyvalue.hpp"
#include "l2g/model.hpp"
#include "l2g/pnm.hpp"
#include "l2g/rng.hpp"
#include "l2g/tensor_io.hpp"

using namespace l2g;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("l2g_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

double saliency_iou(const Sample& s) {
  std::size_t inter = 0, uni = 0;
  for (int y = 0; y < s.image.height; ++y)
    for (int x = 0; x < s.image.width; ++x) {
      const bool a = s.gt_mask.at(y, x) != 0;
      const bool b = s.saliency.at(y, x) > 127;
      inter += a && b;
      uni += a || b;
    }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / uni;
}

}  // namespace

TEST(Data, Deterministic) {
  GenConfig cfg;
  EXPECT_EQ(gen_sample(123, cfg), gen_sample(123, cfg));
  EXPECT_NE(gen_sample(123, cfg).image, gen_sample(124, cfg).image);
}

TEST(Data, SingleShapeSingleLabel) {
  GenConfig cfg;
  cfg.min_shapes = cfg.max_shapes = 1;
  for (std::uint64_t i = 0; i < 30; ++i) {
    const auto s = gen_indexed_sample(i, cfg);
    int n = 0;
    for (auto y : s.labels) n += y;
    EXPECT_EQ(n, 1);
    validate_sample(s, cfg.num_classes);
  }
}

TEST(Data, EveryClassFrequent) {
  GenConfig cfg;
  const auto set = gen_dataset(cfg, 400);
  std::vector<int> count(cfg.num_classes, 0);
  for (const auto& s : set)
    for (int c = 0; c < cfg.num_classes; ++c) count[c] += s.labels[c];
  for (int c = 0; c < cfg.num_classes; ++c) EXPECT_GE(count[c], 20) << kShapeNames[c];
}

TEST(Data, LabelsAgreeWithMask) {
  GenConfig cfg;
  for (const auto& s : gen_dataset(cfg, 50))
    EXPECT_EQ(s.labels, labels_from_mask(s.gt_mask, cfg.num_classes));
}

TEST(Saliency, NoDegradationIsForeground) {
  GenConfig cfg;
  cfg.sal_morph_radius = 0;
  cfg.sal_flip_rate = 0;
  cfg.sal_empty_prob = 0;
  cfg.sal_blur_radius = 0;
  for (const auto& s : gen_dataset(cfg, 20)) {
    for (std::size_t i = 0; i < s.gt_mask.labels.size(); ++i)
      EXPECT_EQ(s.saliency.pixels[i], s.gt_mask.labels[i] ? 255 : 0);
  }
}

TEST(Saliency, AlwaysEmpty) {
  GenConfig cfg;
  cfg.sal_empty_prob = 1.0;
  for (const auto& s : gen_dataset(cfg, 10))
    for (auto v : s.saliency.pixels) EXPECT_EQ(v, 0);
}

TEST(Saliency, DefaultTracksForeground) {
  GenConfig cfg;
  cfg.sal_empty_prob = 0;
  double total = 0;
  const auto set = gen_dataset(cfg, 100);
  for (const auto& s : set) total += saliency_iou(s);
  EXPECT_GE(total / set.size(), 0.8);
}

TEST(GenConfig, InvalidFieldsAllReported) {
  GenConfig cfg;
  cfg.num_classes = 9;
  cfg.min_size = 0;
  try {
    cfg.validate();
    FAIL();
  } catch (const ConfigError& e) {
    const std::string m = e.what();
    EXPECT_NE(m.find("num_classes"), std::string::npos) << m;
    EXPECT_NE(m.find("min_size"), std::string::npos) << m;
  }
}

TEST(Dataset, RoundTrip) {
  GenConfig cfg;
  const auto set = gen_dataset(cfg, 6);
  const auto dir = scratch("dataset");
  write_dataset(set, cfg, dir);
  const auto back = read_dataset(dir);
  ASSERT_EQ(back.samples.size(), set.size());
  for (std::size_t i = 0; i < set.size(); ++i) EXPECT_EQ(back.samples[i], set[i]);
  std::ifstream csv(dir / "labels.csv");
  std::string line;
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, 7);
}

TEST(Pnm, RoundTrip) {
  Rng rng(9);
  Image img(7, 5, 3);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.below(256));
  const auto dir = scratch("pnm");
  write_pnm(dir / "a.ppm", img);
  EXPECT_EQ(read_pnm(dir / "a.ppm"), img);
}

TEST(Pnm, TruncatedNamesFile) {
  Image img(8, 8, 3);
  const auto dir = scratch("pnm_trunc");
  write_pnm(dir / "t.ppm", img);
  fs::resize_file(dir / "t.ppm", fs::file_size(dir / "t.ppm") - 10);
  try {
    read_pnm(dir / "t.ppm");
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("t.ppm"), std::string::npos) << e.what();
  }
}

TEST(TensorIo, RoundTripToFloat) {
  const auto t = Tensor::from({2, 3}, {0.1, -2.5, 3.0, 1e-3, 7.25, 0.0});
  std::stringstream ss;
  write_tensor(ss, t);
  const auto back = read_tensor(ss);
  EXPECT_EQ(back.shape(), t.shape());
  for (std::size_t i = 0; i < t.numel(); ++i)
    EXPECT_EQ(back[i], static_cast<double>(static_cast<float>(t[i])));
}

TEST(TensorIo, BadMagic) {
  std::stringstream ss("XXXX");
  EXPECT_THROW(read_tensor(ss), IoError);
}

TEST(KeyValue, RoundTripAndComments) {
  const auto kv = parse_key_values("# c\na=1\n\nb = x y\n", "test");
  EXPECT_EQ(kv.at("a"), "1");
  EXPECT_EQ(kv.at("b"), "x y");
  EXPECT_EQ(parse_key_values(format_key_values(kv), "again"), kv);
}

TEST(KeyValue, MalformedLine) { EXPECT_THROW(parse_key_values("novalue\n", "t"), ConfigError); }

TEST(KeyValue, DoubleFormatExact) {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e7})
    EXPECT_EQ(std::stod(format_double(v)), v);
}

TEST(Model, FeatureShapes) {
  Rng rng(1);
  const NetworkConfig cfg;
  const Network local(cfg, 5, rng), global(cfg, 6, rng);
  EXPECT_EQ(forward_features(local, Tensor::zeros({2, 3, 48, 48})).shape(), (Shape{2, 5, 12, 12}));
  EXPECT_EQ(forward_features(global, Tensor::zeros({1, 3, 64, 64})).shape(),
            (Shape{1, 6, 16, 16}));
}

TEST(Model, SharingAliasesBackbone) {
  Rng rng(2);
  const NetworkConfig cfg;
  Network local(cfg, 5, rng), global(cfg, 6, rng);
  shared_or_separate(local, global, true);
  for (std::size_t i = 0; i < local.backbone().size(); ++i)
    EXPECT_TRUE(local.backbone()[i].value.same_storage(global.backbone()[i].value));
  EXPECT_FALSE(local.head()[0].value.same_storage(global.head()[0].value));
}

TEST(Model, SeparateSharesNothing) {
  Rng rng(3);
  const NetworkConfig cfg;
  Network local(cfg, 5, rng), global(cfg, 6, rng);
  shared_or_separate(local, global, false);
  for (const auto& a : local.parameters())
    for (const auto& b : global.parameters()) EXPECT_FALSE(a.value.same_storage(b.value));
}

TEST(Model, SharingNeedsSameBackbone) {
  Rng rng(4);
  NetworkConfig other;
  other.widths = {8, 8, 8};
  Network local(NetworkConfig{}, 5, rng), global(other, 6, rng);
  EXPECT_THROW(shared_or_separate(local, global, true), ConfigError);
}

TEST(Model, SaveLoad) {
  Rng rng(5);
  const Network net(NetworkConfig{}, 6, rng);
  const auto dir = scratch("model");
  net.save(dir);
  const auto back = Network::load(dir);
  EXPECT_EQ(back.head_channels(), 6);
  const auto a = net.parameters(), b = back.parameters();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].name, b[i].name);
    for (std::size_t k = 0; k < a[i].value.numel(); ++k)
      EXPECT_EQ(b[i].value[k], static_cast<double>(static_cast<float>(a[i].value[k])));
  }
}
