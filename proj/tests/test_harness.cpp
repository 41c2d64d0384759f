#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "l2g/error.hpp"
#include "l2g/harness.hpp"

using namespace l2g;
namespace fs = std::filesystem;

namespace {

RunConfig small_config(Mode mode, int n_train = 40, int epochs = 1) {
  RunConfig cfg;
  cfg.mode = mode;
  cfg.n_train = n_train;
  cfg.n_val = 10;
  cfg.epochs = epochs;
  return cfg;
}

void expect_same_params(const Network& a, const Network& b) {
  const auto pa = a.parameters(), pb = b.parameters();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    ASSERT_EQ(pa[i].value.numel(), pb[i].value.numel());
    for (std::size_t k = 0; k < pa[i].value.numel(); ++k)
      ASSERT_EQ(pa[i].value[k], pb[i].value[k]) << pa[i].name << "[" << k << "]";
  }
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(RunConfig, KeyValueRoundTrip) {
  RunConfig cfg;
  cfg.mode = Mode::kL2GShape;
  cfg.lambda = 2.5;
  cfg.tau = 0.15;
  cfg.geometry.n_local = 6;
  cfg.ms_scales = {1.0, 2.0};
  cfg.gen.color_jitter = 0.33;
  const auto back = RunConfig::from_key_values(cfg.to_key_values());
  EXPECT_EQ(back.to_key_values(), cfg.to_key_values());
}

TEST(RunConfig, UnknownKeyRejected) {
  EXPECT_THROW(RunConfig::from_key_values({{"lamda", "1"}}), ConfigError);
}

TEST(RunConfig, ValidateListsEveryProblem) {
  RunConfig cfg;
  cfg.lambda = -1;
  cfg.geometry.local_size = 100;
  try {
    cfg.validate();
    FAIL();
  } catch (const ConfigError& e) {
    const std::string m = e.what();
    EXPECT_NE(m.find("lambda"), std::string::npos) << m;
    EXPECT_NE(m.find("local_size"), std::string::npos) << m;
  }
}

TEST(Train, SmokeLossesDecrease) {
  const auto cfg = small_config(Mode::kL2G, 200, 2);
  const auto data = load_or_generate(cfg);
  std::vector<double> cls, kt;
  train(cfg, data.train, [&](int, double c, double k) {
    cls.push_back(c);
    kt.push_back(k);
  });
  ASSERT_EQ(cls.size(), 2u);
  EXPECT_LT(cls[1], cls[0]);
  EXPECT_LT(kt[1], kt[0]);
}

TEST(Train, Deterministic) {
  const auto cfg = small_config(Mode::kL2G);
  const auto data = load_or_generate(cfg);
  const auto a = train(cfg, data.train), b = train(cfg, data.train);
  ASSERT_EQ(a.log.size(), b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    EXPECT_EQ(loss_csv_row(static_cast<long>(i), a.log[i]),
              loss_csv_row(static_cast<long>(i), b.log[i]));
  }
  expect_same_params(a.attention_net, b.attention_net);
}

TEST(Train, ZeroLambdaFreezesGlobal) {
  auto cfg = small_config(Mode::kL2G);
  const auto data = load_or_generate(cfg);
  cfg.lambda = 0.0;
  const auto trained = train(cfg, data.train);
  // Global initialisation stream.
  Rng rng(derive_seed(cfg.seed, 2));
  const Network init(cfg.global_net, cfg.gen.num_classes + 1, rng);
  expect_same_params(init, trained.attention_net);
}

TEST(Train, LocalUpdateIgnoresTransfer) {
  // Without the gradient path from transfer to local, the local network
  // follows L_cls alone whatever lambda is.
  auto cfg = small_config(Mode::kL2G);
  const auto data = load_or_generate(cfg);
  const auto with = train(cfg, data.train);
  cfg.lambda = 0.0;
  const auto without = train(cfg, data.train);
  ASSERT_TRUE(with.local_net && without.local_net);
  expect_same_params(*with.local_net, *without.local_net);
}

TEST(Predict, PureAndRepeatable) {
  const auto cfg = small_config(Mode::kL2G);
  const auto data = load_or_generate(cfg);
  const auto res = train(cfg, data.train);
  const auto before = res.attention_net.clone();
  const auto a = predict(cfg, cfg.mode, res.attention_net, data.val[0]);
  const auto b = predict(cfg, cfg.mode, res.attention_net, data.val[0]);
  EXPECT_EQ(a.labels, b.labels);
  for (std::size_t i = 0; i < a.attention.maps.numel(); ++i)
    EXPECT_EQ(a.attention.maps[i], b.attention.maps[i]);
  expect_same_params(before, res.attention_net);
  for (const auto& p : res.attention_net.parameters()) EXPECT_FALSE(p.value.has_grad());
}

TEST(Predict, SingleScaleMatchesUnitScaleList) {
  auto cfg = small_config(Mode::kBaselineCam);
  const auto data = load_or_generate(cfg);
  const auto res = train(cfg, data.train);
  cfg.multi_scale = false;
  const auto a = predict(cfg, cfg.mode, res.attention_net, data.val[1]);
  cfg.multi_scale = true;
  cfg.ms_scales = {1.0};
  cfg.ms_flip = false;
  const auto b = predict(cfg, cfg.mode, res.attention_net, data.val[1]);
  for (std::size_t i = 0; i < a.attention.maps.numel(); ++i)
    EXPECT_EQ(a.attention.maps[i], b.attention.maps[i]);
}

TEST(Predict, EvalRectCentred) {
  Sample s;
  s.image = Image(96, 96, 3);
  EXPECT_EQ(eval_rect(s, 64), (Rect{16, 16, 64, 64}));
}

TEST(Run, WritesOutputsByteIdentical) {
  auto cfg = small_config(Mode::kL2G, 20);
  const auto data = load_or_generate(cfg);
  const auto root = fs::temp_directory_path() / "l2g_test_run";
  fs::remove_all(root);
  cfg.out_dir = (root / "a").string();
  run(cfg, data);
  cfg.out_dir = (root / "b").string();
  run(cfg, data);
  for (const char* f : {"losses.csv", "eval.csv", "manifest.txt"})
    EXPECT_TRUE(fs::exists(root / "a" / f)) << f;
  EXPECT_FALSE(fs::is_empty(root / "a" / "labels"));
  EXPECT_FALSE(fs::is_empty(root / "a" / "attention"));
  EXPECT_EQ(slurp(root / "a" / "losses.csv"), slurp(root / "b" / "losses.csv"));
  EXPECT_EQ(slurp(root / "a" / "eval.csv"), slurp(root / "b" / "eval.csv"));
}

TEST(Checkpoint, RoundTripPredictsSame) {
  const auto cfg = small_config(Mode::kL2G, 20);
  const auto data = load_or_generate(cfg);
  const auto res = train(cfg, data.train);
  const auto dir = fs::temp_directory_path() / "l2g_test_ckpt";
  fs::remove_all(dir);
  save_checkpoint(dir, cfg, res);
  const auto ck = load_checkpoint(dir);
  EXPECT_EQ(ck.config.to_key_values(), cfg.to_key_values());
  EXPECT_EQ(ck.attention_net.head_channels(), cfg.gen.num_classes + 1);
}

TEST(Ablation, OrderingChecksUsePoints) {
  std::vector<ArmResult> arms = {{"baseline_cam", 0.40}, {"sliding_window", 0.40},
                                 {"local_only", 0.41},   {"l2g", 0.45},
                                 {"l2g_shape", 0.48}};
  const auto checks = ordering_checks(arms);
  ASSERT_EQ(checks.size(), 4u);
  int passed = 0;
  for (const auto& c : checks) passed += c.passed;
  EXPECT_EQ(passed, 4);
}
