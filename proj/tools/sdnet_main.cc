// Copyright 2026 The SD-Net Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// sdnet command-line entry point.
//
//   sdnet generate  [--config F] [--seed S] [--out DIR] [--force]
//   sdnet pretrain  [--config F] [--seed S] --out DIR
//   sdnet scratch   [--config F] [--seed S] --out DIR
//   sdnet finetune  [--config F] [--seed S] --init CKPT --mode normal|ecb --out DIR
//   sdnet evaluate  [--config F] --checkpoint CKPT [--out DIR]
//   sdnet segment   [--config F] --checkpoint CKPT --volume ID --out DIR
//   sdnet gradcheck [--seed S]
//
// Errors go to stderr as a single line: error code=<code> message="<text>".

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sdnet/config.h"
#include "sdnet/gradcheck.h"
#include "sdnet/metrics.h"
#include "sdnet/trainer.h"

namespace fs = std::filesystem;
using namespace sdnet;

namespace {

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> sets;
  std::string out;
  std::string mode = "normal";
  std::string init;
  std::string checkpoint;
  int volume = -1;
  bool force = false;
  bool negate_conv_backward = false;
};

struct CliError : std::runtime_error {
  CliError(std::string c, const std::string& m) : std::runtime_error(m), code(std::move(c)) {}
  std::string code;
};

RunConfig load_config(const Options& o) {
  std::vector<std::pair<std::string, std::string>> overrides;
  for (const std::string& s : o.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError(s, "--set expects key=value");
    overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  if (o.seed) overrides.emplace_back("seed", std::to_string(*o.seed));
  return load_run_config(o.config_path, overrides);
}

fs::path require_out(const Options& o) {
  if (o.out.empty()) throw CliError("usage", "--out is required");
  fs::create_directories(o.out);
  return o.out;
}

Manifest open_dataset(const RunConfig& c) {
  const fs::path manifest = c.data_dir / "manifest.txt";
  if (!fs::exists(manifest)) {
    throw CliError("missing_file", "no dataset manifest at " + manifest.string());
  }
  return read_manifest(manifest);
}

SDNetParameters open_checkpoint(const std::string& path) {
  if (path.empty()) throw CliError("usage", "a checkpoint path is required");
  if (!fs::exists(path)) throw CliError("missing_file", "checkpoint not found: " + path);
  return load_checkpoint(path);
}

EpochCallback progress() {
  auto start = std::make_shared<std::chrono::steady_clock::time_point>(
      std::chrono::steady_clock::now());
  return [start](const EpochLog& e) {
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - *start).count();
    std::printf("%s epoch %d loss %.5f val_mean_dice %.4f lr %g elapsed %.1fs\n", e.phase.c_str(),
                e.epoch, e.loss, e.mean_dice, e.lr, secs);
    std::fflush(stdout);
  };
}

void write_run(const fs::path& out, const TrainResult& r, int num_classes) {
  save_checkpoint(r.best, out / "model.sdck");
  atomic_write(out / "epochs.csv",
               [&](std::ostream& s) { write_epoch_log_csv(s, r.log, num_classes); });
  std::printf("best epoch %d, wrote %s\n", r.best_epoch, (out / "model.sdck").string().c_str());
}

int cmd_generate(const Options& o) {
  const RunConfig c = load_config(o);
  const fs::path root = o.out.empty() ? c.data_dir : fs::path(o.out);
  const Manifest m = generate_dataset(c.dataset, root, o.force);
  std::printf("wrote %zu auxiliary and %zu manual volumes to %s\n",
              m.split.aux_train.size() + m.split.aux_val.size(),
              m.split.train.size() + m.split.val.size() + m.split.test.size(),
              root.string().c_str());
  return 0;
}

int cmd_pretrain(const Options& o) {
  RunConfig c = load_config(o);
  const fs::path out = require_out(o);
  const Manifest m = open_dataset(c);
  c.model.num_classes = m.spec.num_classes;
  const int n = m.spec.num_classes;
  const auto train = load_volume_set(c.data_dir, m.split.aux_train, LabelSource::kAux, n).samples();
  const auto val = load_volume_set(c.data_dir, m.split.aux_val, LabelSource::kAux, n).samples();
  write_run(out, pretrain(c.pretrain, c.model, train, val, progress()), n);
  return 0;
}

int cmd_scratch(const Options& o) {
  RunConfig c = load_config(o);
  const fs::path out = require_out(o);
  const Manifest m = open_dataset(c);
  c.model.num_classes = m.spec.num_classes;
  const int n = m.spec.num_classes;
  const auto train = load_volume_set(c.data_dir, m.split.train, LabelSource::kManual, n).samples();
  const auto val = load_volume_set(c.data_dir, m.split.val, LabelSource::kManual, n).samples();
  write_run(out, train_from_scratch(c.finetune, c.model, train, val, progress()), n);
  return 0;
}

int cmd_finetune(const Options& o) {
  const FineTuneMode mode = [&] {
    try {
      return parse_finetune_mode(o.mode);
    } catch (const std::invalid_argument& e) {
      throw CliError("usage", e.what());
    }
  }();
  const RunConfig c = load_config(o);
  const fs::path out = require_out(o);
  const Manifest m = open_dataset(c);
  const SDNetParameters init = open_checkpoint(o.init);
  const int n = m.spec.num_classes;
  check_num_classes(init, n);
  const auto train = load_volume_set(c.data_dir, m.split.train, LabelSource::kManual, n).samples();
  const auto val = load_volume_set(c.data_dir, m.split.val, LabelSource::kManual, n).samples();
  write_run(out, finetune(c.finetune, init, train, val, mode, progress()), n);
  return 0;
}

int cmd_evaluate(const Options& o) {
  const RunConfig c = load_config(o);
  const Manifest m = open_dataset(c);
  const SDNetParameters params = open_checkpoint(o.checkpoint);
  check_num_classes(params, m.spec.num_classes);
  const VolumeSet test =
      load_volume_set(c.data_dir, m.split.test, LabelSource::kManual, m.spec.num_classes);
  const DiceReport report = evaluate_model(params, test);
  std::printf("test mean dice %.4f +- %.4f, worst class %.4f, %.3fs per volume\n",
              report.overall_mean, report.overall_std, report.min_class_mean(),
              report.seconds.empty() ? 0.0 : report.seconds.front());
  if (!o.out.empty()) {
    const fs::path out = require_out(o);
    atomic_write(out / "report.csv", [&](std::ostream& s) { write_report_csv(s, report); });
  }
  return 0;
}

int cmd_segment(const Options& o) {
  const RunConfig c = load_config(o);
  const fs::path out = require_out(o);
  const Manifest m = open_dataset(c);
  const SDNetParameters params = open_checkpoint(o.checkpoint);
  check_num_classes(params, m.spec.num_classes);
  if (o.volume < 0 || !fs::exists(c.data_dir / volume_dir_name(o.volume))) {
    throw CliError("missing_file", "volume " + std::to_string(o.volume) + " not found in " +
                                       c.data_dir.string());
  }
  const Tensor<float> image = load_image_volume(c.data_dir, o.volume);
  const LabelVolume pred = segment_volume(params, image);
  const fs::path path = out / (volume_dir_name(o.volume) + "_segmentation.sdt");
  save_tensor(path, label_volume_to_tensor(pred));
  std::printf("wrote %s\n", path.string().c_str());
  return 0;
}

int cmd_gradcheck(const Options& o) {
  GradCheckOptions opt;
  if (o.seed) opt.seeds = {*o.seed, *o.seed + 1, *o.seed + 2};
  debug::set_negate_conv_backward(o.negate_conv_backward);
  const GradCheckReport report = run_gradcheck(opt);
  debug::set_negate_conv_backward(false);
  print_gradcheck(std::cout, report);
  if (!report.passed()) {
    std::string ops;
    for (const auto& op : report.failed_ops()) ops += (ops.empty() ? "" : ",") + op;
    throw CliError("gradcheck_failed", "gradient mismatch in " + ops);
  }
  return 0;
}

std::string one_line(std::string s) {
  for (char& ch : s) {
    if (ch == '\n' || ch == '\r') ch = ' ';
    if (ch == '"') ch = '\'';
  }
  return s;
}

int fail(const std::string& code, const std::string& message, int status) {
  std::cerr << "error code=" << code << " message=\"" << one_line(message) << "\"\n";
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SD-Net segmentation: data generation, training, fine-tuning and evaluation"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "key=value configuration file")
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "root random seed (overrides the config)");
    sub->add_option("--set", o.sets, "extra key=value override, repeatable");
  };
  auto* gen = app.add_subcommand("generate", "write a synthetic phantom dataset");
  common(gen);
  gen->add_option("--out", o.out, "dataset directory (default: data.dir)");
  gen->add_flag("--force", o.force, "overwrite a non-empty directory");

  auto* pre = app.add_subcommand("pretrain", "train on auxiliary labels");
  common(pre);
  pre->add_option("--out", o.out, "run directory")->required();

  auto* scr = app.add_subcommand("scratch", "train on manual labels from a random init");
  common(scr);
  scr->add_option("--out", o.out, "run directory")->required();

  auto* ft = app.add_subcommand("finetune", "fine-tune a checkpoint on manual labels");
  common(ft);
  ft->add_option("--out", o.out, "run directory")->required();
  ft->add_option("--init", o.init, "pretrained checkpoint")->required();
  ft->add_option("--mode", o.mode, "normal|ecb");

  auto* ev = app.add_subcommand("evaluate", "per-class Dice on the test volumes");
  common(ev);
  ev->add_option("--checkpoint", o.checkpoint, "model checkpoint")->required();
  ev->add_option("--out", o.out, "directory for report.csv");

  auto* seg = app.add_subcommand("segment", "segment one volume");
  common(seg);
  seg->add_option("--checkpoint", o.checkpoint, "model checkpoint")->required();
  seg->add_option("--volume", o.volume, "volume id")->required();
  seg->add_option("--out", o.out, "output directory")->required();

  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  gc->add_option("--seed", o.seed, "first of three consecutive check seeds");
  gc->add_flag("--negate-conv-backward", o.negate_conv_backward,
               "fault injection: flip the sign of the conv2d gradient");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), 2);
  }

  try {
    if (*gen) return cmd_generate(o);
    if (*pre) return cmd_pretrain(o);
    if (*scr) return cmd_scratch(o);
    if (*ft) return cmd_finetune(o);
    if (*ev) return cmd_evaluate(o);
    if (*seg) return cmd_segment(o);
    if (*gc) return cmd_gradcheck(o);
  } catch (const CliError& e) {
    return fail(e.code, e.what(), e.code == "usage" ? 2 : 1);
  } catch (const ConfigError& e) {
    return fail("config", e.what(), 2);
  } catch (const CheckpointError& e) {
    return fail("checkpoint", e.what(), 3);
  } catch (const FormatError& e) {
    return fail("format", e.what(), 3);
  } catch (const ShapeError& e) {
    return fail("shape_mismatch", e.what(), 3);
  } catch (const NumericError& e) {
    return fail("numeric", e.what(), 4);
  } catch (const std::exception& e) {
    return fail("runtime", e.what(), 1);
  }
  return 0;
}
