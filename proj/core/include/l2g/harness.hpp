#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "l2g/attention.hpp"
#include "l2g/data.hpp"
#include "l2g/keyvalue.hpp"
#include "l2g/labels.hpp"
#include "l2g/losses.hpp"
#include "l2g/model.hpp"
#include "l2g/optim.hpp"
#include "l2g/views.hpp"

namespace l2g {

// Code version recorded in run manifests.
std::string version_string();

enum class Mode { kBaselineCam, kSlidingWindow, kLocalOnly, kL2G, kL2GShape };

std::string to_string(Mode mode);
std::optional<Mode> parse_mode(const std::string& s);

struct RunConfig {
  GenConfig gen;
  int n_train = 1000;
  int n_val = 200;
  std::string data_dir;  // empty: generate in memory from gen

  Geometry geometry;
  NetworkConfig local_net;
  NetworkConfig global_net;
  bool share_backbone = false;

  double lr = 3e-3;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  int lr_decay_epoch = 0;  // 0 disables the step decay
  double lr_decay_factor = 0.1;
  int epochs = 30;
  int batch_size = 1;

  double lambda = 10.0;
  double tau = 0.1;
  double bg_threshold = 0.3;
  Mode mode = Mode::kL2G;
  std::uint64_t seed = 42;

  // Also train the global network with the classification loss on its
  // pooled foreground channels.
  bool global_cls = false;
  // Let the transfer loss reach the local network through its attention.
  bool transfer_grad_to_local = false;

  std::vector<double> ms_scales = {0.5, 1.0, 1.5};
  bool ms_flip = true;
  bool multi_scale = true;
  WindowFusion sw_fusion = WindowFusion::kMax;
  AttentionSource global_source = AttentionSource::kSoftmax;

  std::string out_dir = "out";

  // Every problem in one ConfigError.
  void validate() const;
  KeyValues to_key_values() const;
  // Applies `kv` on top of `base`; unknown keys and bad values are errors.
  static RunConfig from_key_values(const KeyValues& kv, RunConfig base);
  static RunConfig from_key_values(const KeyValues& kv);
};

struct TrainResult {
  // Network that produces attention at inference: the global network for
  // l2g modes, the single classifier otherwise.
  Network attention_net;
  std::optional<Network> local_net;
  std::vector<LossReport> log;
  long steps = 0;
};

// Number of training steps between progress callbacks is one epoch.
using ProgressFn = std::function<void(int epoch, double mean_l_cls, double mean_l_kt)>;

TrainResult train(const RunConfig& cfg, const std::vector<Sample>& train_set,
                  const ProgressFn& progress = {});

// One optimisation step on a single view set; exposed for tests. `nets`
// holds the networks mode `cfg.mode` trains (local first for l2g modes).
struct StepInputs {
  const Sample* sample = nullptr;
  ViewSet views;
  std::vector<std::uint8_t> labels;
  Tensor saliency;  // saliency over the global view, [g, g]
};

StepInputs make_step_inputs(const Sample& sample, const Geometry& geo, Rng& rng);

// Forward the losses of one view set for `mode`.
// For baseline/local modes `global` is unused.
TotalLoss step_loss(const RunConfig& cfg, const StepInputs& in, const Network& primary,
                    const Network* global);

// Local attention targets A_i [C, l, l] of the local views: relu'd local
// features upsampled to l x l, then normalized and gated per class.
// Detached unless `keep_graph`.
std::vector<Tensor> local_targets(const Tensor& local_features,
                                  const std::vector<std::uint8_t>& labels, int local_size,
                                  bool keep_graph);

// The deterministic evaluation view of a sample: its centred g x g window.
Rect eval_rect(const Sample& sample, int g);

struct Prediction {
  AttentionMaps attention;
  LabelMap labels;
  LabelMap ground_truth;
};

// Attention and pseudo labels for one sample under `mode`.
Prediction predict(const RunConfig& cfg, Mode mode, const Network& net, const Sample& sample);

struct EvalResult {
  ConfusionMatrix confusion{1};
  IoUReport report;
};

// Pseudo-label evaluation over a split; optional per-sample export into
// `export_dir` (labels/ and attention/ subdirectories).
EvalResult evaluate(const RunConfig& cfg, Mode mode, const Network& net,
                    const std::vector<Sample>& samples,
                    const std::filesystem::path* export_dir = nullptr);

std::vector<std::string> class_names(int num_classes);

struct Splits {
  std::vector<Sample> train;
  std::vector<Sample> val;
};

// Loads cfg.data_dir (train/ and val/ subdirectories) or generates both
// splits from cfg.gen: train indices [0, n_train), val indices
// [n_train, n_train + n_val).
Splits load_or_generate(const RunConfig& cfg);

// Full run for one mode: train (or reuse a baseline for sliding_window),
// write checkpoints, losses.csv, eval.csv, eval_val.csv and manifest.txt under
// cfg.out_dir.
struct RunSummary {
  double miou_train = 0.0;
  double miou_val = 0.0;
  long steps = 0;
};

RunSummary run(const RunConfig& cfg, const Splits& data, const ProgressFn& progress = {});

// Checkpoint directory layout: manifest.txt (resolved RunConfig) plus
// attention_net/ and, for l2g modes, local_net/.
void save_checkpoint(const std::filesystem::path& dir, const RunConfig& cfg,
                     const TrainResult& result);
struct Checkpoint {
  RunConfig config;
  Network attention_net;
};
Checkpoint load_checkpoint(const std::filesystem::path& dir);

struct ArmResult {
  std::string arm;
  double miou_train = 0.0;
  double miou_val = 0.0;
  bool ok = true;
  std::string error;
};

struct OrderingCheck {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = 0.0;  // points of mIoU (x100)
  bool passed = false;
};

struct AblationResult {
  std::vector<ArmResult> arms;
  std::vector<OrderingCheck> checks;
};

// Trains baseline_cam, local_only, l2g and l2g_shape on shared data and seed,
// evaluates the sliding-window arm from the baseline checkpoint, and writes
// ablation.csv under cfg.out_dir.
AblationResult run_ablation(const RunConfig& base, const Splits& data,
                            const std::function<void(const std::string&)>& log = {});

std::string ablation_csv(const AblationResult& result);

// Desk-scale ordering targets, in mIoU points.
std::vector<OrderingCheck> ordering_checks(const std::vector<ArmResult>& arms);

}  // namespace l2g
