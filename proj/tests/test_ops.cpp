#include <gtest/gtest.h>

#include <cmath>

#include "l2g/error.hpp"
#include "l2g/gradcheck.hpp"
#include "l2g/ops.hpp"
#include "l2g/rng.hpp"

using namespace l2g;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed, bool grad = false) {
  Rng rng(seed);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return Tensor::from(std::move(shape), std::move(v), grad);
}

void expect_values(const Tensor& t, const std::vector<double>& want, double tol = 1e-12) {
  ASSERT_EQ(t.numel(), want.size());
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(t[i], want[i], tol) << "at " << i;
}

}  // namespace

TEST(Conv2d, IdentityKernelCopiesInput) {
  const auto x = random_tensor({1, 1, 4, 5}, 1);
  const auto k = Tensor::full({1, 1, 1, 1}, 1.0);
  const auto y = ops::conv2d(x, k, 1, 0);
  EXPECT_EQ(y.shape(), x.shape());
  expect_values(y, {x.data().begin(), x.data().end()}, 0.0);
}

TEST(Conv2d, OnesKernelSumsChannels) {
  const auto x = Tensor::full({1, 3, 2, 2}, 0.7);
  const auto y = ops::conv2d(x, Tensor::full({1, 3, 1, 1}, 1.0), 1, 0);
  for (double v : y.data()) EXPECT_NEAR(v, 2.1, 1e-12);
}

TEST(Conv2d, StridedOutputShape) {
  const auto y = ops::conv2d(Tensor::zeros({1, 3, 8, 8}), Tensor::zeros({4, 3, 3, 3}), 2, 1);
  EXPECT_EQ(y.shape(), (Shape{1, 4, 4, 4}));
}

TEST(Conv2d, ChannelMismatchNamesAxes) {
  try {
    ops::conv2d(Tensor::zeros({1, 3, 8, 8}), Tensor::zeros({4, 2, 3, 3}), 1, 1);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("channel"), std::string::npos) << e.what();
  }
}

TEST(Pooling, ConstantMapPoolsToValue) {
  const auto y = ops::global_avg_pool(Tensor::full({2, 3, 4, 4}, 0.25));
  EXPECT_EQ(y.shape(), (Shape{2, 3}));
  for (double v : y.data()) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(Softmax, EqualLogitsGiveUniform) {
  const auto y = ops::channel_softmax(Tensor::full({1, 3, 2, 2}, 4.0));
  for (double v : y.data()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
}

TEST(Softmax, HandComputedTwoChannels) {
  const auto y = ops::channel_softmax(Tensor::from({1, 2, 1, 1}, {0.0, std::log(3.0)}));
  expect_values(y, {0.25, 0.75}, 1e-15);
}

TEST(Softmax, LargeLogitsStayFinite) {
  const auto y = ops::channel_softmax(Tensor::from({1, 2, 1, 1}, {1000.0, 0.0}));
  expect_values(y, {1.0, 0.0});
}

TEST(Sigmoid, ZeroIsHalf) { EXPECT_DOUBLE_EQ(ops::sigmoid(Tensor::scalar(0.0)).item(), 0.5); }

TEST(Bilinear, SameSizeIsIdentity) {
  const auto x = random_tensor({2, 3, 5, 4}, 2);
  const auto y = ops::bilinear_resize(x, 5, 4);
  expect_values(y, {x.data().begin(), x.data().end()}, 0.0);
}

TEST(Bilinear, ConstantPreserved) {
  const auto y = ops::bilinear_resize(Tensor::full({1, 1, 3, 3}, 0.4), 7, 11);
  for (double v : y.data()) EXPECT_NEAR(v, 0.4, 1e-15);
}

TEST(Bilinear, HandCentreValue) {
  const auto y = ops::bilinear_resize(Tensor::from({2, 2}, {0, 1, 2, 3}), 3, 3);
  EXPECT_NEAR(y[4], 1.5, 1e-15);
  // Corners clamp to the source corners.
  EXPECT_NEAR(y[0], 0.0, 1e-15);
  EXPECT_NEAR(y[8], 3.0, 1e-15);
}

TEST(Bilinear, ZeroSizeRejected) {
  EXPECT_THROW(ops::bilinear_resize(Tensor::zeros({2, 2}), 0, 3), ArgumentError);
}

TEST(Crop, SelectsWindowAndChannels) {
  std::vector<double> v(2 * 3 * 3);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i);
  const auto y = ops::crop(Tensor::from({1, 2, 3, 3}, v), 1, 2, 1, 1, 2, 2);
  expect_values(y, {13, 14, 16, 17}, 0.0);
}

TEST(Flip, MirrorsLastAxis) {
  const auto y = ops::flip_horizontal(Tensor::from({1, 1, 1, 3}, {1, 2, 3}));
  expect_values(y, {3, 2, 1}, 0.0);
}

TEST(NormalizeByMax, DividesByPlaneMax) {
  const auto y = ops::normalize_by_max(Tensor::from({1, 2, 1, 2}, {1, 4, 0, 0}));
  expect_values(y, {0.25, 1.0, 0.0, 0.0}, 0.0);
}

TEST(Autograd, SquareSumGradient) {
  const auto x = random_tensor({3, 2}, 3, true);
  ops::sum(ops::mul(x, x)).backward();
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_DOUBLE_EQ(x.grad()[i], 2.0 * x[i]);
}

TEST(Autograd, ConstantLossGivesZeroGradient) {
  const auto x = random_tensor({3}, 4, true);
  const auto loss = ops::add(ops::scale(ops::sum(x), 0.0), Tensor::scalar(1.0));
  loss.backward();
  for (double g : x.grad()) EXPECT_EQ(g, 0.0);
}

TEST(Autograd, SharedSubgraphVisitedOnce) {
  // y = x*x used twice: d/dx (y + y) = 4x.
  const auto x = Tensor::from({1}, {3.0}, true);
  const auto y = ops::mul(x, x);
  ops::sum(ops::add(y, y)).backward();
  EXPECT_DOUBLE_EQ(x.grad()[0], 12.0);
}

TEST(Autograd, BackwardNeedsScalar) {
  const auto x = random_tensor({2}, 5, true);
  EXPECT_THROW(ops::mul(x, x).backward(), ArgumentError);
}

TEST(Autograd, NoGradGuardSkipsGraph) {
  const auto x = random_tensor({2}, 6, true);
  NoGradGuard guard;
  EXPECT_FALSE(ops::mul(x, x).requires_grad());
}

TEST(Numeric, NonFiniteNamesOp) {
  try {
    ops::scale(Tensor::from({1}, {1e308}), 1e10);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("scale"), std::string::npos) << e.what();
  }
}

TEST(Losses, BceStableForLargeLogits) {
  const auto l = ops::sigmoid_bce(Tensor::from({1, 2}, {800.0, -800.0}),
                                  Tensor::from({1, 2}, {1.0, 0.0}));
  EXPECT_LT(l.item(), 1e-12);
}

TEST(Losses, MseDoesNotTouchTarget) {
  const auto x = Tensor::from({2}, {1.0, 2.0}, true);
  const auto t = Tensor::from({2}, {0.0, 0.0}, true);
  ops::mse(x, t).backward();
  EXPECT_TRUE(x.has_grad());
  EXPECT_FALSE(t.has_grad());
}

TEST(GradCheck, EveryCasePasses) {
  const auto report = run_grad_check();
  for (const auto& e : report.entries)
    EXPECT_TRUE(e.passed) << e.name << " rel " << e.max_rel_error << " " << e.note;
}

TEST(GradCheck, NamesAreUnique) {
  const auto report = run_grad_check();
  std::set<std::string> seen;
  for (const auto& e : report.entries) EXPECT_TRUE(seen.insert(e.name).second) << e.name;
  // Every op and loss of the library is registered.
  for (const char* name : {"conv2d", "add_channel_bias", "relu", "sigmoid", "channel_softmax",
                           "global_avg_pool", "bilinear_resize_up", "crop", "flip_horizontal",
                           "normalize_by_max", "mse", "sigmoid_bce", "classification_loss",
                           "global_softmax", "attention_transfer_loss", "shape_transfer_loss",
                           "total_loss", "transfer_grad_isolation"})
    EXPECT_TRUE(seen.count(name)) << name;
}

TEST(GradCheck, CorruptedGradientIsReported) {
  const auto cases = grad_cases();
  for (const auto& c : cases) {
    const auto e = check_case(c, 1e-5, 1e-4, /*corrupt=*/true);
    EXPECT_FALSE(e.passed) << c.name;
  }
}
