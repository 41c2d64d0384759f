#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "l2g/keyvalue.hpp"
#include "l2g/rng.hpp"
#include "l2g/tensor.hpp"

namespace l2g {

// Plain CNN: one 3x3 conv + bias + ReLU per backbone block, then a head
// conv with `head_channels` outputs and no activation.
struct NetworkConfig {
  std::vector<int> widths = {16, 32, 32};
  std::vector<int> strides = {1, 2, 2};
  int kernel = 3;
  int head_kernel = 3;

  int feature_stride() const;
  // Throws ConfigError listing every problem.
  void validate() const;
  bool operator==(const NetworkConfig&) const = default;

  KeyValues to_key_values(const std::string& prefix) const;
  static NetworkConfig from_fields(FieldReader& reader, const std::string& prefix);
};

struct Parameter {
  std::string name;
  Tensor value;
};

class Network {
 public:
  // Parameters are drawn uniformly in [-b, b]: b = sqrt(6 / fan_in) for
  // backbone kernels (ReLU follows), b = sqrt(1 / fan_in) for the head;
  // biases start at zero.
  Network(const NetworkConfig& cfg, int head_channels, Rng& rng);

  const NetworkConfig& config() const { return cfg_; }
  int head_channels() const { return head_channels_; }

  // Backbone then head, each in layer order: "block<i>.weight", "block<i>.bias",
  // "head.weight", "head.bias".
  std::vector<Parameter> parameters() const;
  std::vector<Tensor> parameter_tensors() const;
  std::vector<Parameter>& backbone() { return backbone_; }
  const std::vector<Parameter>& backbone() const { return backbone_; }
  const std::vector<Parameter>& head() const { return head_; }

  // Replace the backbone with another network's tensors (aliasing).
  void alias_backbone(const Network& other);

  // Deep copy with independent storage.
  Network clone() const;

  void save(const std::filesystem::path& dir) const;
  static Network load(const std::filesystem::path& dir);

 private:
  Network() = default;

  NetworkConfig cfg_;
  int head_channels_ = 0;
  std::vector<Parameter> backbone_;
  std::vector<Parameter> head_;
};

// Last-layer map [B, head_channels, H/s, W/s] of batch[B,3,H,W].
Tensor forward_features(const Network& net, const Tensor& batch);

// Classification logits: global average pool of the first `channels`
// feature channels.
Tensor pooled_logits(const Tensor& features, std::size_t channels);

// share=true: global's backbone aliases local's (heads stay separate).
// share=false: no tensor is shared. Throws ConfigError when sharing is
// requested for different backbone configs.
void shared_or_separate(Network& local, Network& global, bool share);

}  // namespace l2g
