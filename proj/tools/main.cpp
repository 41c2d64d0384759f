// l2g command-line driver.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "l2g/error.hpp"
#include "l2g/gradcheck.hpp"
#include "l2g/harness.hpp"

namespace fs = std::filesystem;

namespace {

// Flags shared by every subcommand; a flag given on the command line wins
// over the config file.
struct CommonFlags {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::string> mode, out_dir, data_dir;
  std::optional<double> lambda, tau, bg_threshold, lr;
  std::optional<int> n_local, local_size, global_size, epochs, n_train, n_val;
  std::optional<std::uint64_t> seed, data_seed;

  void attach(CLI::App* app) {
    app->add_option("-c,--config", config, "key=value config file");
    app->add_option("--set", sets, "extra key=value override (repeatable)");
    app->add_option("--mode", mode, "baseline_cam|sliding_window|local_only|l2g|l2g_shape");
    app->add_option("--lambda", lambda, "transfer loss weight");
    app->add_option("--n-local", n_local, "local views per image");
    app->add_option("--local-size", local_size, "local view size");
    app->add_option("--global-size", global_size, "global view size");
    app->add_option("--tau", tau, "shape transfer binarization threshold");
    app->add_option("--bg-threshold", bg_threshold, "background score for pseudo labels");
    app->add_option("--seed", seed, "run seed");
    app->add_option("--data-seed", data_seed, "dataset seed");
    app->add_option("--epochs", epochs, "training epochs");
    app->add_option("--lr", lr, "learning rate");
    app->add_option("--n-train", n_train, "training samples");
    app->add_option("--n-val", n_val, "validation samples");
    app->add_option("--out-dir", out_dir, "output directory");
    app->add_option("--data-dir", data_dir, "dataset directory (train/ and val/)");
  }

  l2g::RunConfig resolve(l2g::RunConfig base = {}) const {
    l2g::KeyValues kv;
    if (!config.empty()) kv = l2g::read_key_values(config);
    auto put = [&](const char* key, const auto& v) {
      if (!v) return;
      if constexpr (std::is_same_v<std::decay_t<decltype(*v)>, double>) {
        kv[key] = l2g::format_double(*v);
      } else if constexpr (std::is_same_v<std::decay_t<decltype(*v)>, std::string>) {
        kv[key] = *v;
      } else {
        kv[key] = std::to_string(*v);
      }
    };
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos || eq == 0)
        throw l2g::ConfigError("--set expects key=value, got '" + s + "'");
      kv[s.substr(0, eq)] = s.substr(eq + 1);
    }
    put("mode", mode);
    put("lambda", lambda);
    put("n_local", n_local);
    put("local_size", local_size);
    put("global_size", global_size);
    put("tau", tau);
    put("bg_threshold", bg_threshold);
    put("seed", seed);
    put("data_seed", data_seed);
    put("epochs", epochs);
    put("lr", lr);
    put("n_train", n_train);
    put("n_val", n_val);
    put("out_dir", out_dir);
    put("data_dir", data_dir);
    auto cfg = l2g::RunConfig::from_key_values(kv, std::move(base));
    cfg.validate();
    return cfg;
  }
};

void print_progress(int epoch, double l_cls, double l_kt) {
  std::fprintf(stderr, "epoch %d  mean L_cls %.6f  mean L_kt %.6f\n", epoch, l_cls, l_kt);
}

int cmd_gen_data(const CommonFlags& flags) {
  const auto cfg = flags.resolve();
  const fs::path dir = cfg.data_dir.empty() ? fs::path(cfg.out_dir) : fs::path(cfg.data_dir);
  auto gen_only = cfg;
  gen_only.data_dir.clear();
  const auto splits = l2g::load_or_generate(gen_only);
  l2g::write_dataset(splits.train, cfg.gen, dir / "train");
  l2g::write_dataset(splits.val, cfg.gen, dir / "val");
  std::cout << "wrote " << splits.train.size() << " train and " << splits.val.size()
            << " val samples to " << dir << "\n";
  return 0;
}

int cmd_train(const CommonFlags& flags) {
  const auto cfg = flags.resolve();
  const auto data = l2g::load_or_generate(cfg);
  const auto summary = l2g::run(cfg, data, print_progress);
  std::cout << "mode " << l2g::to_string(cfg.mode) << "  steps " << summary.steps
            << "  miou_train " << summary.miou_train << "  miou_val " << summary.miou_val << "\n";
  return 0;
}

int cmd_infer(const CommonFlags& flags, const std::string& checkpoint, const std::string& split,
              bool single_scale) {
  auto ck = l2g::load_checkpoint(checkpoint);
  const auto stored_mode = ck.config.mode;
  auto cfg = flags.resolve(ck.config);
  if (single_scale) cfg.multi_scale = false;
  // A baseline classifier also serves the sliding-window path; any other
  // mode change would run the wrong network.
  const bool sw_on_baseline =
      cfg.mode == l2g::Mode::kSlidingWindow &&
      (stored_mode == l2g::Mode::kBaselineCam || stored_mode == l2g::Mode::kSlidingWindow);
  if (cfg.mode != stored_mode && !sw_on_baseline)
    throw l2g::ConfigError("checkpoint was trained in mode " + l2g::to_string(stored_mode) +
                           ", cannot infer in mode " + l2g::to_string(cfg.mode));
  if (cfg.local_net != ck.config.local_net || cfg.global_net != ck.config.global_net ||
      cfg.gen.num_classes != ck.config.gen.num_classes)
    throw l2g::ConfigError("network or class settings differ from the checkpoint");
  const auto data = l2g::load_or_generate(cfg);
  const auto& samples = split == "val" ? data.val : data.train;
  const fs::path out(cfg.out_dir);
  fs::create_directories(out);
  const auto ev = l2g::evaluate(cfg, cfg.mode, ck.attention_net, samples, &out);
  std::ofstream(out / "eval.csv")
      << l2g::iou_report_csv(ev.report, l2g::class_names(cfg.gen.num_classes));
  std::cout << "inferred " << samples.size() << " samples  miou " << ev.report.mean_iou << "\n";
  return 0;
}

int cmd_eval(const CommonFlags& flags, const std::string& pred_dir, const std::string& split) {
  const auto cfg = flags.resolve();
  const auto data = l2g::load_or_generate(cfg);
  const auto& samples = split == "val" ? data.val : data.train;
  l2g::ConfusionMatrix cm(static_cast<std::size_t>(cfg.gen.num_classes) + 1);
  for (const auto& s : samples) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "%06llu", static_cast<unsigned long long>(s.id));
    const auto pred =
        l2g::read_label_map(fs::path(pred_dir) / (std::string(stem) + ".pgm"),
                            l2g::Provenance::kPseudo);
    const auto gt =
        l2g::crop_labels(s.gt_mask, l2g::eval_rect(s, cfg.geometry.global_size));
    cm.add(pred, gt, stem);
  }
  const auto report = l2g::miou(cm);
  const fs::path out(cfg.out_dir);
  fs::create_directories(out);
  std::ofstream(out / "eval.csv")
      << l2g::iou_report_csv(report, l2g::class_names(cfg.gen.num_classes));
  std::cout << "miou " << report.mean_iou << " over " << samples.size() << " samples\n";
  return 0;
}

int cmd_ablate(const CommonFlags& flags) {
  const auto cfg = flags.resolve();
  const auto data = l2g::load_or_generate(cfg);
  const auto result =
      l2g::run_ablation(cfg, data, [](const std::string& s) { std::cerr << s << "\n"; });
  std::cout << l2g::ablation_csv(result);
  bool ok = true;
  for (const auto& a : result.arms) ok = ok && a.ok;
  return ok ? 0 : 1;
}

int cmd_grad_check() {
  const auto report = l2g::run_grad_check();
  std::cout << l2g::format_report(report);
  return report.passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"L2G attention transfer on synthetic shapes"};
  app.set_version_flag("--version", l2g::version_string());
  app.require_subcommand(1);

  CommonFlags gen_flags, train_flags, infer_flags, eval_flags, ablate_flags;
  auto* gen = app.add_subcommand("gen-data", "generate the synthetic dataset to disk");
  gen_flags.attach(gen);
  auto* train = app.add_subcommand("train", "train one mode and evaluate its pseudo labels");
  train_flags.attach(train);

  auto* infer = app.add_subcommand("infer", "attention maps and pseudo labels from a checkpoint");
  infer_flags.attach(infer);
  std::string checkpoint, infer_split = "train";
  bool single_scale = false;
  infer->add_option("--checkpoint", checkpoint, "checkpoint directory")->required();
  infer->add_option("--split", infer_split, "train|val")->check(CLI::IsMember({"train", "val"}));
  infer->add_flag("--single-scale", single_scale, "disable multi-scale and flip");

  auto* eval = app.add_subcommand("eval", "mIoU of a directory of label maps");
  eval_flags.attach(eval);
  std::string pred_dir, eval_split = "train";
  eval->add_option("--pred-dir", pred_dir, "directory of <id>.pgm label maps")->required();
  eval->add_option("--split", eval_split, "train|val")->check(CLI::IsMember({"train", "val"}));

  auto* ablate = app.add_subcommand("ablate", "five-arm ablation, writes ablation.csv");
  ablate_flags.attach(ablate);
  auto* grad = app.add_subcommand("grad-check", "finite-difference gradient check");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*gen) return cmd_gen_data(gen_flags);
    if (*train) return cmd_train(train_flags);
    if (*infer) return cmd_infer(infer_flags, checkpoint, infer_split, single_scale);
    if (*eval) return cmd_eval(eval_flags, pred_dir, eval_split);
    if (*ablate) return cmd_ablate(ablate_flags);
    if (*grad) return cmd_grad_check();
  } catch (const l2g::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
