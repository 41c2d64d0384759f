#include "l2g/model.hpp"

#include <cmath>

#include "l2g/error.hpp"
#include "l2g/ops.hpp"
#include "l2g/tensor_io.hpp"

namespace l2g {

int NetworkConfig::feature_stride() const {
  int s = 1;
  for (int v : strides) s *= v;
  return s;
}

void NetworkConfig::validate() const {
  std::vector<std::string> errs;
  if (widths.empty()) errs.push_back("widths must not be empty");
  if (widths.size() != strides.size())
    errs.push_back("widths and strides must have the same length");
  for (int w : widths)
    if (w < 1) errs.push_back("block width " + std::to_string(w) + " must be >= 1");
  for (int s : strides)
    if (s < 1) errs.push_back("block stride " + std::to_string(s) + " must be >= 1");
  if (kernel < 1 || kernel % 2 == 0) errs.push_back("kernel must be odd and >= 1");
  if (head_kernel < 1 || head_kernel % 2 == 0)
    errs.push_back("head_kernel must be odd and >= 1");
  if (!errs.empty()) {
    std::string msg = "invalid NetworkConfig:";
    for (const auto& e : errs) msg += "\n  " + e;
    throw ConfigError(msg);
  }
}

KeyValues NetworkConfig::to_key_values(const std::string& prefix) const {
  return {{prefix + "widths", join_ints(widths)},
          {prefix + "strides", join_ints(strides)},
          {prefix + "kernel", std::to_string(kernel)},
          {prefix + "head_kernel", std::to_string(head_kernel)}};
}

NetworkConfig NetworkConfig::from_fields(FieldReader& r, const std::string& prefix) {
  NetworkConfig c;
  r.read(prefix + "widths", c.widths);
  r.read(prefix + "strides", c.strides);
  r.read(prefix + "kernel", c.kernel);
  r.read(prefix + "head_kernel", c.head_kernel);
  return c;
}

namespace {

Tensor uniform_tensor(Shape shape, double bound, Rng& rng) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(-bound, bound);
  return Tensor::from(std::move(shape), std::move(v), true);
}

}  // namespace

Network::Network(const NetworkConfig& cfg, int head_channels, Rng& rng)
    : cfg_(cfg), head_channels_(head_channels) {
  cfg.validate();
  if (head_channels < 1) throw ConfigError("head_channels must be >= 1");
  std::size_t in = 3;
  const auto k = static_cast<std::size_t>(cfg.kernel);
  for (std::size_t i = 0; i < cfg.widths.size(); ++i) {
    const auto out = static_cast<std::size_t>(cfg.widths[i]);
    const double bound = std::sqrt(6.0 / static_cast<double>(in * k * k));
    const auto name = "block" + std::to_string(i);
    backbone_.push_back({name + ".weight", uniform_tensor({out, in, k, k}, bound, rng)});
    backbone_.push_back({name + ".bias", Tensor::zeros({out}, true)});
    in = out;
  }
  const auto hk = static_cast<std::size_t>(cfg.head_kernel);
  const auto hc = static_cast<std::size_t>(head_channels);
  const double bound = std::sqrt(1.0 / static_cast<double>(in * hk * hk));
  head_.push_back({"head.weight", uniform_tensor({hc, in, hk, hk}, bound, rng)});
  head_.push_back({"head.bias", Tensor::zeros({hc}, true)});
}

std::vector<Parameter> Network::parameters() const {
  auto out = backbone_;
  out.insert(out.end(), head_.begin(), head_.end());
  return out;
}

std::vector<Tensor> Network::parameter_tensors() const {
  std::vector<Tensor> out;
  for (const auto& p : parameters()) out.push_back(p.value);
  return out;
}

void Network::alias_backbone(const Network& other) { backbone_ = other.backbone_; }

Network Network::clone() const {
  Network n;
  n.cfg_ = cfg_;
  n.head_channels_ = head_channels_;
  for (const auto& p : backbone_) n.backbone_.push_back({p.name, p.value.clone()});
  for (const auto& p : head_) n.head_.push_back({p.name, p.value.clone()});
  return n;
}

void Network::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  auto kv = cfg_.to_key_values("");
  kv["head_channels"] = std::to_string(head_channels_);
  write_key_values(dir / "network.txt", kv);
  for (const auto& p : parameters()) save_tensor(dir / (p.name + ".l2gt"), p.value);
}

Network Network::load(const std::filesystem::path& dir) {
  const auto kv = read_key_values(dir / "network.txt");
  FieldReader reader(kv);
  Network n;
  n.cfg_ = NetworkConfig::from_fields(reader, "");
  reader.read("head_channels", n.head_channels_);
  if (!reader.errors().empty())
    throw ConfigError("bad network manifest in " + dir.string() + ": " + reader.errors()[0]);
  n.cfg_.validate();
  Rng unused(0);
  Network shape_ref(n.cfg_, n.head_channels_, unused);
  auto read_into = [&](std::vector<Parameter>& dst, const std::vector<Parameter>& ref) {
    for (const auto& p : ref) {
      auto t = load_tensor(dir / (p.name + ".l2gt"));
      if (t.shape() != p.value.shape())
        throw ShapeError(dir.string() + ": parameter " + p.name + " has shape " +
                         shape_str(t.shape()) + ", expected " + shape_str(p.value.shape()));
      std::vector<double> v(t.data().begin(), t.data().end());
      dst.push_back({p.name, Tensor::from(t.shape(), std::move(v), true)});
    }
  };
  read_into(n.backbone_, shape_ref.backbone_);
  read_into(n.head_, shape_ref.head_);
  return n;
}

Tensor forward_features(const Network& net, const Tensor& batch) {
  if (batch.rank() != 4 || batch.dim(1) != 3)
    throw ShapeError("forward_features: expected [B,3,H,W], got " + shape_str(batch.shape()));
  const auto s = static_cast<std::size_t>(net.config().feature_stride());
  if (batch.dim(2) % s != 0 || batch.dim(3) % s != 0)
    throw ShapeError("forward_features: spatial size " + std::to_string(batch.dim(2)) + "x" +
                     std::to_string(batch.dim(3)) + " not divisible by feature stride " +
                     std::to_string(s));
  const auto& cfg = net.config();
  Tensor x = batch;
  const auto& bb = net.backbone();
  for (std::size_t i = 0; i < cfg.widths.size(); ++i) {
    x = ops::conv2d(x, bb[2 * i].value, cfg.strides[i], cfg.kernel / 2);
    x = ops::add_channel_bias(x, bb[2 * i + 1].value);
    x = ops::relu(x);
  }
  const auto& head = net.head();
  x = ops::conv2d(x, head[0].value, 1, cfg.head_kernel / 2);
  return ops::add_channel_bias(x, head[1].value);
}

Tensor pooled_logits(const Tensor& features, std::size_t channels) {
  if (channels == features.dim(1)) return ops::global_avg_pool(features);
  return ops::global_avg_pool(
      ops::crop(features, 0, channels, 0, 0, features.dim(2), features.dim(3)));
}

void shared_or_separate(Network& local, Network& global, bool share) {
  if (share) {
    if (local.config().widths != global.config().widths ||
        local.config().strides != global.config().strides ||
        local.config().kernel != global.config().kernel)
      throw ConfigError("backbone sharing requires identical backbone configs");
    global.alias_backbone(local);
    return;
  }
  for (const auto& a : local.parameters())
    for (const auto& b : global.parameters())
      if (a.value.same_storage(b.value))
        throw ConfigError("separate backbones requested but parameter " + a.name +
                          " is shared");
}

}  // namespace l2g
