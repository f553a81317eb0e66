// Copyright (c) 2026 mvseg contributors
// SPDX-License-Identifier: Apache-2.0
//
// Config parsing, dataset loading, the view cache, and the staged pipeline:
// idempotent rendering, an end-to-end miniature run, and byte-identical
// reruns of the whole chain.
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "json.hpp"
#include "mvseg/errors.hpp"
#include "mvseg/pipeline.hpp"
#include "mvseg/view_io.hpp"
#include "util.hpp"

using namespace mvseg;
namespace fs = std::filesystem;

namespace {

// Small enough to synth+render in well under a second.
const char* kTinyConfig =
    "synth.family = figure\n"
    "synth.min_parts = 4\n"
    "synth.max_parts = 4\n"
    "synth.texture_size = 64\n"
    "synth.n_shapes = 4\n"
    "synth.n_unlabeled = 2\n"
    "synth.n_labeled = 1\n"
    "synth.n_test = 1\n"
    "synth.seed = 7\n"
    "render.n_views = 4\n"
    "render.image_size = 32\n"
    "render.seed = 3\n"
    "train.image_size = 32\n"
    "train.embed_dim = 8\n"
    "train.match_eps = 0.04\n"
    "train.batch_size = 1\n"
    "train.ssl_batch = 1\n"
    "train.iterations = 3\n"
    "loss.n_pairs = 64\n"
    "protocol.k = 1\n";

// Provenance manifests embed the (differing) input paths, so they are
// excluded; everything else must match byte for byte.
std::string dir_fingerprint(const std::string& root) {
  std::vector<std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file() &&
        e.path().filename().string().rfind("provenance.", 0) != 0)
      files.push_back(e.path().string());
  std::sort(files.begin(), files.end());
  std::string fp;
  for (const auto& f : files) {
    fp += f.substr(root.size());
    fp += ':';
    fp += testutil::read_file(f);
    fp += '\n';
  }
  return fp;
}

}  // namespace

TEST_CASE("config parses comments, whitespace and overrides") {
  Config cfg = Config::from_string(
      "# a comment\n"
      "\n"
      "  synth.family =   furniture  \n"
      "train.lr=0.01\n");
  CHECK(cfg.get_string("synth.family", "") == "furniture");
  CHECK(cfg.get_double("train.lr", 0) == 0.01);
  CHECK(cfg.get_int("train.iterations", 123) == 123);  // schema default wins

  cfg.set("train.iterations", "5");
  CHECK(cfg.get_int("train.iterations", 123) == 5);
}

TEST_CASE("config rejects unknown and duplicate keys by name") {
  CHECK_THROWS_WITH(Config::from_string("train.learning_rate = 1\n"),
                    doctest::Contains("train.learning_rate"));
  CHECK_THROWS_WITH(Config::from_string("train.lr = 1\ntrain.lr = 2\n"),
                    doctest::Contains("duplicate config key 'train.lr'"));
  CHECK_THROWS_WITH(Config::from_string("just some text\n"),
                    doctest::Contains("expected key = value"));
  Config cfg;
  CHECK_THROWS_AS(cfg.set("nope", "1"), ConfigError);
}

TEST_CASE("config accessors type-check their values") {
  Config cfg = Config::from_string(
      "train.iterations = twelve\n"
      "train.lr = fast\n"
      "render.use_texture = maybe\n");
  CHECK_THROWS_AS(cfg.get_int("train.iterations", 0), ConfigError);
  CHECK_THROWS_AS(cfg.get_double("train.lr", 0), ConfigError);
  CHECK_THROWS_AS(cfg.get_bool("render.use_texture", true), ConfigError);
}

TEST_CASE("config canonical form and hash are key-order independent") {
  Config a = Config::from_string("train.lr = 0.5\nsynth.seed = 3\n");
  Config b = Config::from_string("synth.seed = 3\ntrain.lr = 0.5\n");
  CHECK(a.canonical() == b.canonical());
  CHECK(a.hash() == b.hash());
  CHECK(a.canonical() == "synth.seed=3\ntrain.lr=0.5\n");

  Config c = Config::from_string("synth.seed = 4\ntrain.lr = 0.5\n");
  CHECK(a.hash() != c.hash());
}

TEST_CASE("config builders surface bad values as ConfigError") {
  Config cfg = Config::from_string("synth.min_parts = 9\n");
  CHECK_THROWS_AS(synth_spec_from(cfg), ConfigError);
  cfg = Config::from_string("train.lr = -1\n");
  CHECK_THROWS_AS(train_config_from(cfg), ConfigError);
  cfg = Config::from_string("synth.family = airplane\n");
  CHECK_THROWS_AS(synth_spec_from(cfg), ConfigError);
  cfg = Config::from_string("train.channels = rgb,sonar\n");
  CHECK_THROWS_AS(train_config_from(cfg), ConfigError);
}

TEST_CASE("every schema default builds its stage struct") {
  Config empty;
  synth_spec_from(empty);
  synth_splits_from(empty);
  view_config_from(empty);
  TrainConfig tc = train_config_from(empty);
  CHECK(tc.loss.tau == 0.07);
  CHECK(tc.loss.lambda_reg == 0.001);
  CHECK(tc.embed_dim == 16);
  FewShotProtocol p = protocol_from(empty);
  CHECK(p.k == 1);
  CHECK(gamma_from(empty) == 20.0);
}

TEST_CASE("load_dataset reports missing pieces") {
  testutil::TempDir tmp;
  CHECK_THROWS_WITH(load_dataset(tmp.file("nowhere"), tmp.file("r")),
                    doctest::Contains("manifest"));

  fs::create_directories(tmp.file("bad"));
  testutil::write_file(tmp.file("bad/manifest.json"), "{not json");
  CHECK_THROWS_WITH(load_dataset(tmp.file("bad"), tmp.file("r")),
                    doctest::Contains("malformed"));

  fs::create_directories(tmp.file("gone/shapes"));
  testutil::write_file(
      tmp.file("gone/manifest.json"),
      R"({"family":"figure","n_classes":4,"textured":true,
          "splits":{"unlabeled":["shape_000"],"labeled":[],"test":[]}})");
  CHECK_THROWS_WITH(load_dataset(tmp.file("gone"), tmp.file("r")),
                    doctest::Contains("mesh.obj"));
}

TEST_CASE("view cache evicts LRU entries but returned views survive") {
  testutil::TempDir tmp;
  Config cfg = Config::from_string(kTinyConfig);
  stage_synth(cfg, tmp.file("d"));
  stage_render(cfg, tmp.file("d"), tmp.file("r"));
  Dataset ds = load_dataset(tmp.file("d"), tmp.file("r"));
  const ShapeEntry& shape = ds.shapes[0];
  REQUIRE(shape.n_views == 4);

  ViewCache cache(2);
  auto v0 = cache.get(shape, 0);
  cache.get(shape, 1);
  CHECK(cache.size() == 2);
  cache.get(shape, 2);  // evicts view 0
  CHECK(cache.size() == 2);
  CHECK(v0->width == 32);  // still alive through the shared_ptr

  // re-request reloads without disturbing correctness
  auto v0b = cache.get(shape, 0);
  CHECK(v0b->tri_id == v0->tri_id);
  CHECK_THROWS(ViewCache(0));
}

TEST_CASE("stage_render is idempotent and refreshes stale caches") {
  testutil::TempDir tmp;
  Config cfg = Config::from_string(kTinyConfig);
  stage_synth(cfg, tmp.file("d"));
  stage_render(cfg, tmp.file("d"), tmp.file("r"));
  std::string first = dir_fingerprint(tmp.file("r"));

  // same config: nothing re-rendered, bytes identical
  stage_render(cfg, tmp.file("d"), tmp.file("r"));
  CHECK(dir_fingerprint(tmp.file("r")) == first);

  // resolution change invalidates everything
  Config half = Config::from_string(kTinyConfig);
  half.set("render.image_size", "16");
  stage_render(half, tmp.file("d"), tmp.file("r"));
  Dataset ds = load_dataset(tmp.file("d"), tmp.file("r"));
  for (const auto& s : ds.shapes) {
    REQUIRE(s.n_views == 4);
    CHECK(load_view(s.view_path(0)).width == 16);
  }

  // fewer views: files beyond the new count disappear
  Config fewer = Config::from_string(kTinyConfig);
  fewer.set("render.n_views", "2");
  stage_render(fewer, tmp.file("d"), tmp.file("r"));
  ds = load_dataset(tmp.file("d"), tmp.file("r"));
  for (const auto& s : ds.shapes) CHECK(s.n_views == 2);

  // back to the original config reproduces the original bytes
  stage_render(cfg, tmp.file("d"), tmp.file("r"));
  CHECK(dir_fingerprint(tmp.file("r")) == first);
}

TEST_CASE("tiny end-to-end pipeline run") {
  testutil::TempDir tmp;
  Config cfg = Config::from_string(kTinyConfig);
  stage_synth(cfg, tmp.file("d"));
  stage_render(cfg, tmp.file("d"), tmp.file("r"));
  stage_pretrain(cfg, tmp.file("d"), tmp.file("r"), tmp.file("out/pt.ckpt"));
  CHECK(fs::exists(tmp.file("out/pt_curve.csv")));
  stage_finetune(cfg, tmp.file("d"), tmp.file("r"), tmp.file("out/pt.ckpt"),
                 tmp.file("out/ft.ckpt"));
  stage_infer(cfg, tmp.file("d"), tmp.file("r"), tmp.file("out/ft.ckpt"),
              tmp.file("out/pred"));

  // every test shape got a full-coverage prediction
  Dataset ds = load_dataset(tmp.file("d"), tmp.file("r"));
  REQUIRE(ds.test.size() == 1);
  const ShapeEntry& shape = ds.shapes[ds.test[0]];
  auto pred = load_labels_file(tmp.file("out/pred/" + shape.id + ".txt"));
  TriMesh mesh = load_obj(shape.mesh_path());
  REQUIRE(pred.size() == mesh.triangles.size());
  for (int32_t l : pred) {
    CHECK(l >= 0);
    CHECK(l < ds.n_classes);
  }

  auto mious = stage_eval(cfg, tmp.file("d"), {tmp.file("out/pred")},
                          tmp.file("out/report.csv"));
  REQUIRE(mious.size() == 1);
  CHECK(mious[0] >= 0.0);
  CHECK(mious[0] <= 1.0);
  std::string report = testutil::read_file(tmp.file("out/report.csv"));
  CHECK(report.find("category,n_runs,mean_miou,std_miou") == 0);
  CHECK(report.find("figure,1,") != std::string::npos);

  // missing predictions fail loudly
  CHECK_THROWS_WITH(stage_eval(cfg, tmp.file("d"), {tmp.file("out/empty")},
                               tmp.file("out/r2.csv")),
                    doctest::Contains("missing prediction"));
}

TEST_CASE("two pipeline runs produce byte-identical artifacts") {
  testutil::TempDir a, b;
  for (const testutil::TempDir* t : {&a, &b}) {
    Config cfg = Config::from_string(kTinyConfig);
    stage_synth(cfg, t->file("d"));
    stage_render(cfg, t->file("d"), t->file("r"));
    stage_pretrain(cfg, t->file("d"), t->file("r"), t->file("o/pt.ckpt"));
    stage_finetune(cfg, t->file("d"), t->file("r"), t->file("o/pt.ckpt"),
                   t->file("o/ft.ckpt"));
    stage_infer(cfg, t->file("d"), t->file("r"), t->file("o/ft.ckpt"),
                t->file("o/pred"));
    stage_eval(cfg, t->file("d"), {t->file("o/pred")}, t->file("o/report.csv"));
  }
  CHECK(dir_fingerprint(a.file("d")) == dir_fingerprint(b.file("d")));
  CHECK(dir_fingerprint(a.file("r")) == dir_fingerprint(b.file("r")));
  CHECK(dir_fingerprint(a.file("o")) == dir_fingerprint(b.file("o")));
}

TEST_CASE("provenance manifests carry the config hash and no timestamps") {
  testutil::TempDir tmp;
  Config cfg = Config::from_string(kTinyConfig);
  stage_synth(cfg, tmp.file("d"));
  stage_render(cfg, tmp.file("d"), tmp.file("r"));

  for (const std::string& p :
       {tmp.file("d/provenance.synth.json"),
        tmp.file("r/provenance.render.json")}) {
    CAPTURE(p);
    REQUIRE(fs::exists(p));
    nlohmann::json j = nlohmann::json::parse(testutil::read_file(p));
    CHECK(j.at("version") == kVersion);
    CHECK(j.at("config_hash").get<std::string>().size() == 16);
    CHECK(j.at("config") == cfg.canonical());
    std::string raw = j.dump();
    CHECK(raw.find("time") == std::string::npos);
    CHECK(raw.find("date") == std::string::npos);
  }
  nlohmann::json r = nlohmann::json::parse(
      testutil::read_file(tmp.file("r/provenance.render.json")));
  CHECK(r.at("inputs").at("data") == tmp.file("d"));
}

TEST_CASE("stage_infer validates its inputs") {
  testutil::TempDir tmp;
  Config cfg = Config::from_string(kTinyConfig);
  stage_synth(cfg, tmp.file("d"));
  stage_render(cfg, tmp.file("d"), tmp.file("r"));
  CHECK_THROWS_AS(stage_infer(cfg, tmp.file("d"), tmp.file("r"),
                              tmp.file("no.ckpt"), tmp.file("pred")),
                  DataError);
}
