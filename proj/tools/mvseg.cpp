// Copyright (c) 2026 mvseg contributors
// SPDX-License-Identifier: Apache-2.0
//
// mvseg: multi-view part segmentation pipeline driver.
//
//   mvseg synth    --out data/
//   mvseg render   --data data/ [--render views/]
//   mvseg pretrain --data data/ --out pt.ckpt
//   mvseg finetune --data data/ [--init pt.ckpt] --out ft.ckpt
//   mvseg infer    --data data/ --checkpoint ft.ckpt --out pred/
//   mvseg eval     --data data/ --pred pred/ [--pred pred2/ ...] --out report.csv
//
// Configuration comes from --config FILE plus repeatable --set key=value
// overrides; `mvseg keys` lists the schema. Exit codes: 0 success, 2 bad
// configuration or usage, 3 missing/invalid data, 4 numeric failure.

#include <cstdio>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mvseg/errors.hpp"
#include "mvseg/kernels.hpp"
#include "mvseg/parallel.hpp"
#include "mvseg/pipeline.hpp"

namespace {

using mvseg::Config;

struct GlobalArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  int threads = 0;
  std::string kernels;
};

Config assemble_config(const GlobalArgs& g) {
  Config cfg;
  if (!g.config_path.empty()) cfg = Config::load(g.config_path);
  for (const std::string& kv : g.overrides) {
    size_t eq = kv.find('=');
    if (eq == std::string::npos)
      throw mvseg::ConfigError("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

void apply_runtime(const GlobalArgs& g) {
  if (g.threads > 0) mvseg::thread_cap() = g.threads;
  if (!g.kernels.empty() && !mvseg::kern::force_variant(g.kernels.c_str())) {
    std::string known;
    size_t n = 0;
    const auto* const* vs = mvseg::kern::available_variants(&n);
    for (size_t i = 0; i < n; ++i)
      known += std::string(i ? ", " : "") + vs[i]->name;
    throw mvseg::ConfigError("unknown kernel variant '" + g.kernels +
                             "' (available: " + known + ")");
  }
}

void print_keys() {
  for (const auto& k : Config::schema())
    std::printf("%-28s %-12s %s\n", k.name, k.default_value, k.doc);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mvseg: multi-view 3D part segmentation pipeline"};
  app.set_version_flag("--version", std::string(mvseg::kVersion));
  app.require_subcommand(1);

  GlobalArgs g;
  app.add_option("--config", g.config_path, "config file (key = value lines)");
  app.add_option("--set", g.overrides, "config override, key=value (repeatable)");
  app.add_option("--threads", g.threads, "worker thread cap (default: all cores)");
  app.add_option("--kernels", g.kernels, "force a kernel variant (scalar, avx2)");

  std::string data, render, out, init, checkpoint;
  std::vector<std::string> preds;

  // the selected stage runs after parsing so global flags always apply
  std::function<void(const Config&)> run;

  // global flags (--set, --config, ...) may appear after the subcommand
  auto add_sub = [&](const char* name, const char* desc) {
    CLI::App* sub = app.add_subcommand(name, desc);
    sub->fallthrough();
    return sub;
  };

  auto* synth = add_sub("synth", "generate a synthetic dataset");
  synth->add_option("--out", out, "dataset directory")->required();
  synth->callback([&] {
    run = [&](const Config& cfg) { mvseg::stage_synth(cfg, out); };
  });

  auto add_data_render = [&](CLI::App* sub) {
    sub->add_option("--data", data, "dataset directory")->required();
    sub->add_option("--render", render,
                    "rendered view cache (default: <data>/render)");
  };

  auto* rend = add_sub("render", "render views of every shape");
  add_data_render(rend);
  rend->callback([&] {
    run = [&](const Config& cfg) { mvseg::stage_render(cfg, data, render); };
  });

  auto* pre = add_sub("pretrain", "self-supervised pre-training of Phi");
  add_data_render(pre);
  pre->add_option("--out", out, "output checkpoint")->required();
  pre->callback([&] {
    run = [&](const Config& cfg) {
      mvseg::stage_pretrain(cfg, data, render, out);
    };
  });

  auto* fine = add_sub("finetune", "few-shot fine-tuning");
  add_data_render(fine);
  fine->add_option("--init", init, "initial checkpoint (skip for scratch)");
  fine->add_option("--out", out, "output checkpoint")->required();
  fine->callback([&] {
    run = [&](const Config& cfg) {
      std::optional<std::string> ic;
      if (!init.empty()) ic = init;
      mvseg::stage_finetune(cfg, data, render, ic, out);
    };
  });

  auto* inf = add_sub("infer", "label the test split");
  add_data_render(inf);
  inf->add_option("--checkpoint", checkpoint, "trained checkpoint")->required();
  inf->add_option("--out", out, "prediction directory")->required();
  inf->callback([&] {
    run = [&](const Config& cfg) {
      mvseg::stage_infer(cfg, data, render, checkpoint, out);
    };
  });

  auto* ev = add_sub("eval", "score predictions against the test split");
  ev->add_option("--data", data, "dataset directory")->required();
  ev->add_option("--pred", preds, "prediction directory (repeatable)")
      ->required();
  ev->add_option("--out", out, "report CSV path")->required();
  ev->callback([&] {
    run = [&](const Config& cfg) {
      auto mious = mvseg::stage_eval(cfg, data, preds, out);
      for (size_t i = 0; i < mious.size(); ++i)
        std::printf("run %zu: mIoU %.4f\n", i, mious[i]);
      std::printf("report: %s\n", out.c_str());
    };
  });

  auto* keys = add_sub("keys", "list config keys and defaults");
  keys->callback([&] { run = [](const Config&) { print_keys(); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;  // bad usage is a config problem
  }

  try {
    if (render.empty()) render = data + "/render";
    Config cfg = assemble_config(g);
    apply_runtime(g);
    run(cfg);
  } catch (const mvseg::ConfigError& e) {
    std::fprintf(stderr, "mvseg: config error: %s\n", e.what());
    return 2;
  } catch (const mvseg::NumericError& e) {
    std::fprintf(stderr, "mvseg: numeric error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "mvseg: error: %s\n", e.what());
    return 3;
  }
  return 0;
}
