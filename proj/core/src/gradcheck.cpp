#include "l2g/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "l2g/harness.hpp"
#include "l2g/losses.hpp"
#include "l2g/model.hpp"
#include "l2g/ops.hpp"
#include "l2g/rng.hpp"
#include "l2g/views.hpp"

namespace l2g {

bool GradCheckReport::passed() const {
  return !entries.empty() &&
         std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.passed; });
}

namespace {

// Values in [lo, hi] with random sign, so relu-like kinks stay far from
// the finite-difference stencil.
Tensor away_from_zero(Shape shape, Rng& rng, double lo = 0.1, double hi = 1.0) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = (rng.bernoulli(0.5) ? 1.0 : -1.0) * rng.uniform(lo, hi);
  return Tensor::from(std::move(shape), std::move(v), true);
}

Tensor uniform(Shape shape, Rng& rng, double lo, double hi, bool grad = true) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor::from(std::move(shape), std::move(v), grad);
}

double projected(const Tensor& out, const std::vector<double>& weights) {
  const auto d = out.data();
  double s = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) s += d[i] * weights[i];
  return s;
}

}  // namespace

std::vector<GradCase> grad_cases(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<GradCase> cases;
  auto add = [&](std::string name, std::vector<Tensor> inputs,
                 std::function<Tensor(const std::vector<Tensor>&)> fn) {
    cases.push_back({std::move(name), std::move(inputs), std::move(fn)});
  };

  add("conv2d", {away_from_zero({2, 2, 5, 5}, rng), away_from_zero({3, 2, 3, 3}, rng)},
      [](const auto& in) { return ops::conv2d(in[0], in[1], 1, 1); });
  add("conv2d_strided", {away_from_zero({1, 2, 6, 6}, rng), away_from_zero({2, 2, 3, 3}, rng)},
      [](const auto& in) { return ops::conv2d(in[0], in[1], 2, 1); });
  add("add_channel_bias", {away_from_zero({2, 3, 2, 2}, rng), away_from_zero({3}, rng)},
      [](const auto& in) { return ops::add_channel_bias(in[0], in[1]); });
  add("relu", {away_from_zero({2, 3, 3}, rng)}, [](const auto& in) { return ops::relu(in[0]); });
  add("sigmoid", {away_from_zero({2, 3, 3}, rng, 0.0, 3.0)},
      [](const auto& in) { return ops::sigmoid(in[0]); });
  add("channel_softmax", {away_from_zero({1, 4, 3, 3}, rng, 0.0, 2.0)},
      [](const auto& in) { return ops::channel_softmax(in[0]); });
  add("global_avg_pool", {away_from_zero({2, 3, 3, 4}, rng)},
      [](const auto& in) { return ops::global_avg_pool(in[0]); });
  add("bilinear_resize_up", {away_from_zero({1, 2, 3, 4}, rng)},
      [](const auto& in) { return ops::bilinear_resize(in[0], 7, 5); });
  add("bilinear_resize_down", {away_from_zero({2, 6, 6}, rng)},
      [](const auto& in) { return ops::bilinear_resize(in[0], 4, 3); });
  add("crop", {away_from_zero({1, 4, 5, 5}, rng)},
      [](const auto& in) { return ops::crop(in[0], 1, 3, 1, 2, 3, 2); });
  add("flip_horizontal", {away_from_zero({1, 2, 3, 4}, rng)},
      [](const auto& in) { return ops::flip_horizontal(in[0]); });
  add("normalize_by_max", {uniform({1, 2, 3, 3}, rng, 0.05, 1.0)},
      [](const auto& in) { return ops::normalize_by_max(in[0]); });
  add("reshape", {away_from_zero({2, 3, 2}, rng)},
      [](const auto& in) { return ops::reshape(in[0], {3, 4}); });
  add("add", {away_from_zero({2, 3}, rng), away_from_zero({2, 3}, rng)},
      [](const auto& in) { return ops::add(in[0], in[1]); });
  add("sub", {away_from_zero({2, 3}, rng), away_from_zero({2, 3}, rng)},
      [](const auto& in) { return ops::sub(in[0], in[1]); });
  add("mul", {away_from_zero({2, 3}, rng), away_from_zero({2, 3}, rng)},
      [](const auto& in) { return ops::mul(in[0], in[1]); });
  add("scale", {away_from_zero({2, 3}, rng)},
      [](const auto& in) { return ops::scale(in[0], -2.5); });
  add("sum", {away_from_zero({2, 3}, rng)}, [](const auto& in) { return ops::sum(in[0]); });
  add("mean", {away_from_zero({2, 3}, rng)}, [](const auto& in) { return ops::mean(in[0]); });
  {
    const Tensor target = uniform({2, 3}, rng, 0.0, 1.0, false);
    add("mse", {away_from_zero({2, 3}, rng)},
        [target](const auto& in) { return ops::mse(in[0], target); });
  }
  {
    std::vector<double> t(6);
    for (auto& x : t) x = rng.bernoulli(0.5) ? 1.0 : 0.0;
    const Tensor targets = Tensor::from({2, 3}, std::move(t));
    add("sigmoid_bce", {away_from_zero({2, 3}, rng, 0.0, 3.0)},
        [targets](const auto& in) { return ops::sigmoid_bce(in[0], targets); });
  }

  // Losses.
  {
    const std::vector<std::uint8_t> y = {1, 0, 1};
    add("classification_loss", {away_from_zero({4, 3}, rng, 0.0, 2.0)},
        [y](const auto& in) { return classification_loss(in[0], y); });
  }
  add("global_softmax", {away_from_zero({1, 3, 4, 4}, rng, 0.0, 2.0)},
      [](const auto& in) { return global_softmax(in[0], 2, 8); });
  {
    const std::vector<Rect> rects = {{0, 0, 4, 4}, {3, 2, 4, 4}};
    std::vector<Tensor> targets;
    for (std::size_t i = 0; i < rects.size(); ++i)
      targets.push_back(uniform({2, 4, 4}, rng, 0.0, 1.0, false));
    add("attention_transfer_loss", {away_from_zero({1, 3, 4, 4}, rng, 0.0, 2.0)},
        [targets, rects](const auto& in) {
          return attention_transfer_loss(targets, global_softmax(in[0], 2, 8), rects).loss;
        });
    // One view with a salient crop, one whose crop is empty (fallback).
    std::vector<double> sal(64, 0.0);
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 4; ++x) sal[y * 8 + x] = x < 2 ? 0.9 : 0.3;
    const Tensor saliency = Tensor::from({8, 8}, std::move(sal));
    const std::vector<Rect> shape_rects = {{0, 0, 4, 4}, {4, 4, 4, 4}};
    add("shape_transfer_loss", {away_from_zero({1, 3, 4, 4}, rng, 0.0, 2.0)},
        [targets, saliency, shape_rects](const auto& in) {
          return shape_transfer_loss(targets, saliency, global_softmax(in[0], 2, 8),
                                     shape_rects, 0.4)
              .loss;
        });
  }
  add("total_loss", {away_from_zero({}, rng), away_from_zero({}, rng)},
      [](const auto& in) { return total_loss(in[0], in[1], 10.0).loss; });
  {
    NetworkConfig cfg;
    cfg.widths = {3, 4};
    cfg.strides = {1, 2};
    Rng init(seed + 1);
    const Network net(cfg, 3, init);
    const Tensor x = uniform({1, 3, 6, 6}, rng, 0.0, 1.0, false);
    add("network_forward", net.parameter_tensors(),
        [net, x](const auto&) { return forward_features(net, x); });
  }
  return cases;
}

GradCheckEntry check_case(const GradCase& c, double h, double tolerance, bool corrupt) {
  GradCheckEntry e;
  e.name = c.name;
  Tensor out = c.fn(c.inputs);
  Rng rng(0x5eed);
  std::vector<double> weights(out.numel());
  for (auto& w : weights) w = rng.uniform(-1.0, 1.0);
  if (out.numel() == 1) weights[0] = 1.0;

  for (auto t : c.inputs) t.zero_grad();
  const Tensor loss = ops::sum(ops::mul(out, Tensor::from(out.shape(), weights)));
  loss.backward();

  double max_diff = 0.0, max_mag = 0.0;
  for (auto t : c.inputs) {
    std::vector<double> analytic(t.numel(), 0.0);
    if (t.has_grad()) std::copy(t.grad().begin(), t.grad().end(), analytic.begin());
    auto values = t.mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      double plus, minus;
      {
        NoGradGuard no_grad;
        values[i] = saved + h;
        plus = projected(c.fn(c.inputs), weights);
        values[i] = saved - h;
        minus = projected(c.fn(c.inputs), weights);
      }
      values[i] = saved;
      const double numeric = (plus - minus) / (2.0 * h);
      const double a = corrupt ? analytic[i] * 1.01 : analytic[i];
      max_diff = std::max(max_diff, std::abs(a - numeric));
      max_mag = std::max({max_mag, std::abs(a), std::abs(numeric)});
      ++e.checked;
    }
    t.zero_grad();
  }
  e.max_rel_error = max_mag > 0.0 ? max_diff / max_mag : max_diff;
  e.passed = e.checked > 0 && max_mag > 0.0 && e.max_rel_error <= tolerance;
  if (max_mag == 0.0) e.note = "all gradients zero";
  return e;
}

GradCheckEntry check_transfer_isolation(std::uint64_t seed) {
  GradCheckEntry e;
  e.name = "transfer_grad_isolation";
  NetworkConfig cfg;
  cfg.widths = {4, 4};
  cfg.strides = {1, 2};
  Rng rng(seed);
  Network local(cfg, 2, rng);
  Network global(cfg, 3, rng);
  const Tensor local_in = uniform({2, 3, 4, 4}, rng, 0.0, 1.0, false);
  const Tensor global_in = uniform({1, 3, 8, 8}, rng, 0.0, 1.0, false);
  const std::vector<Rect> rects = {{0, 0, 4, 4}, {4, 2, 4, 4}};

  // Targets come from the local network's live features; the loss must
  // still not reach its parameters.
  const Tensor f_local = forward_features(local, local_in);
  const auto targets = local_targets(f_local, {1, 1}, 4, false);
  const Tensor G = global_softmax(forward_features(global, global_in), 2, 8);
  std::vector<double> sal(64, 0.8);
  const Tensor saliency = Tensor::from({8, 8}, std::move(sal));
  const Tensor l_kt = ops::add(attention_transfer_loss(targets, G, rects).loss,
                               shape_transfer_loss(targets, saliency, G, rects, 0.1).loss);
  ops::scale(l_kt, 10.0).backward();

  double max_local = 0.0;
  for (const auto& p : local.parameter_tensors()) {
    for (double g : p.grad()) max_local = std::max(max_local, std::abs(g));
    ++e.checked;
  }
  bool global_reached = false;
  for (const auto& p : global.parameter_tensors())
    for (double g : p.grad()) global_reached = global_reached || g != 0.0;
  e.max_rel_error = max_local;
  e.passed = max_local == 0.0 && global_reached;
  if (!global_reached) e.note = "no gradient reached the global network";
  return e;
}

GradCheckReport run_grad_check(double h, double tolerance) {
  GradCheckReport report;
  report.step = h;
  report.tolerance = tolerance;
  for (const auto& c : grad_cases()) report.entries.push_back(check_case(c, h, tolerance));
  report.entries.push_back(check_transfer_isolation());
  return report;
}

std::string format_report(const GradCheckReport& report) {
  std::ostringstream os;
  os << "grad-check h=" << report.step << " tolerance=" << report.tolerance << "\n";
  for (const auto& e : report.entries) {
    os << (e.passed ? "PASS " : "FAIL ") << e.name << " max_rel_error=" << e.max_rel_error
       << " checked=" << e.checked;
    if (!e.note.empty()) os << " (" << e.note << ")";
    os << "\n";
  }
  os << (report.passed() ? "grad-check passed" : "grad-check FAILED") << "\n";
  return os.str();
}

}  // namespace l2g
