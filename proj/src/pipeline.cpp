// Copyright (c) 2026 mvseg contributors
// SPDX-License-Identifier: Apache-2.0
#include "mvseg/pipeline.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "mvseg/bvh.hpp"
#include "mvseg/evalkit.hpp"
#include "mvseg/trainer.hpp"
#include "mvseg/view_io.hpp"

namespace mvseg {
namespace {

namespace fs = std::filesystem;

std::string hash_hex(uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Deterministic manifest describing how an artifact was produced. No
// timestamps: criterion is byte-identical reruns.
void write_provenance(const std::string& dir, const std::string& stage,
                      const Config& cfg,
                      const std::map<std::string, std::string>& inputs) {
  nlohmann::json j;
  j["stage"] = stage;
  j["version"] = kVersion;
  j["config_hash"] = hash_hex(cfg.hash());
  j["config"] = cfg.canonical();
  j["inputs"] = inputs;
  fs::create_directories(dir);
  fs::path tmp = fs::path(dir) / ("provenance." + stage + ".json.tmp");
  {
    std::ofstream out(tmp);
    if (!out) throw DataError("cannot write provenance in " + dir);
    out << j.dump(2) << "\n";
  }
  fs::rename(tmp, fs::path(dir) / ("provenance." + stage + ".json"));
}

std::string curve_path(const std::string& checkpoint) {
  fs::path p(checkpoint);
  fs::path stem = p.parent_path() / p.stem();
  return stem.string() + "_curve.csv";
}

Dataset load_dataset_checked(const std::string& data_dir,
                             const std::string& render_dir) {
  try {
    return load_dataset(data_dir, render_dir);
  } catch (const std::exception& e) {
    throw DataError(e.what());
  }
}

}  // namespace

void stage_synth(const Config& cfg, const std::string& out_dir) {
  SynthSpec spec = synth_spec_from(cfg);
  int n_shapes = synth_n_shapes_from(cfg);
  SplitCounts split = synth_splits_from(cfg);
  try {
    generate_dataset(spec, n_shapes, split, synth_seed_from(cfg), out_dir);
  } catch (const std::exception& e) {
    throw DataError(e.what());
  }
  write_provenance(out_dir, "synth", cfg, {});
}

// Camera placement depends on every sampling parameter (n_views included),
// so cached views are only reusable when all of them match the previous
// render. The stamp records them per shape; it is written after the last
// view, so an interrupted render resumes and a changed config re-renders.
std::string render_stamp(const ViewSamplingConfig& vc, bool use_texture) {
  nlohmann::json j;
  j["n_views"] = vc.n_views;
  j["radius"] = vc.radius;
  j["fov_deg"] = vc.fov_deg;
  j["angle_jitter_deg"] = vc.angle_jitter_deg;
  j["scale_jitter"] = vc.scale_jitter;
  j["closeup_fraction"] = vc.closeup_fraction;
  j["image_size"] = vc.image_size;
  j["seed"] = vc.seed;
  j["use_texture"] = use_texture;
  return j.dump(2) + "\n";
}

void stage_render(const Config& cfg, const std::string& data_dir,
                  const std::string& render_dir) {
  ViewSamplingConfig vc = view_config_from(cfg);
  bool use_texture = render_use_texture_from(cfg);
  Dataset ds = load_dataset_checked(data_dir, render_dir);
  std::string stamp = render_stamp(vc, use_texture);

  for (size_t idx = 0; idx < ds.shapes.size(); ++idx) {
    ShapeEntry& shape = ds.shapes[idx];
    fs::create_directories(shape.view_dir);
    std::string stamp_path = shape.view_dir + "/render.json";

    bool fresh = false;
    if (fs::exists(stamp_path)) {
      std::ifstream in(stamp_path, std::ios::binary);
      std::string prev((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
      fresh = prev == stamp;
    }
    if (!fresh)  // wipe every cached view, stamped or orphaned
      for (const auto& e : fs::directory_iterator(shape.view_dir))
        if (e.path().extension() == ".mvdc") fs::remove(e.path());

    bool all_cached = fresh;
    for (int i = 0; i < vc.n_views && all_cached; ++i)
      all_cached = fs::exists(shape.view_path(i));
    if (all_cached) {
      shape.n_views = vc.n_views;
      continue;
    }

    TriMesh mesh;
    try {
      mesh = normalize(load_obj(shape.mesh_path()));
    } catch (const std::exception& e) {
      throw DataError(e.what());
    }
    std::optional<Texture> texture;
    std::string tex_path = shape.texture_path();
    if (use_texture && !tex_path.empty()) texture = read_png(tex_path);

    Bvh bvh(mesh);
    ViewSamplingConfig per_shape = vc;
    per_shape.seed = mix_seed(vc.seed, idx);
    std::vector<Camera> cams = sample_views(per_shape, &mesh);
    for (int i = 0; i < vc.n_views; ++i) {
      if (fresh && fs::exists(shape.view_path(i))) continue;
      ViewBuffers vb =
          render_view(mesh, bvh, texture ? &*texture : nullptr, cams[i]);
      save_view(shape.view_path(i), vb);
    }
    {
      std::ofstream out(stamp_path + ".tmp", std::ios::binary);
      out << stamp;
    }
    fs::rename(stamp_path + ".tmp", stamp_path);
    shape.n_views = vc.n_views;
  }
  write_provenance(render_dir, "render", cfg, {{"data", data_dir}});
}

void stage_pretrain(const Config& cfg, const std::string& data_dir,
                    const std::string& render_dir,
                    const std::string& out_checkpoint) {
  Dataset ds = load_dataset_checked(data_dir, render_dir);
  TrainConfig tc = train_config_from(cfg);
  fs::path parent = fs::path(out_checkpoint).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
  pretrain(ds, tc, out_checkpoint, curve_path(out_checkpoint));
  write_provenance(parent.empty() ? "." : parent.string(), "pretrain", cfg,
                   {{"data", data_dir}, {"render", render_dir}});
}

void stage_finetune(const Config& cfg, const std::string& data_dir,
                    const std::string& render_dir,
                    const std::optional<std::string>& init_checkpoint,
                    const std::string& out_checkpoint) {
  Dataset ds = load_dataset_checked(data_dir, render_dir);
  TrainConfig tc = train_config_from(cfg);
  FewShotProtocol proto = protocol_from(cfg);
  if (init_checkpoint && !fs::exists(*init_checkpoint))
    throw DataError("init checkpoint does not exist: " + *init_checkpoint);
  fs::path parent = fs::path(out_checkpoint).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
  TrainResult res = finetune(ds, proto, init_checkpoint, tc, out_checkpoint,
                             curve_path(out_checkpoint));
  std::map<std::string, std::string> inputs = {{"data", data_dir},
                                               {"render", render_dir}};
  if (init_checkpoint) inputs["init"] = *init_checkpoint;
  std::string shapes;
  for (const auto& id : res.protocol_shapes)
    shapes += (shapes.empty() ? "" : ",") + id;
  inputs["protocol_shapes"] = shapes;
  write_provenance(parent.empty() ? "." : parent.string(), "finetune", cfg,
                   inputs);
}

ProbMap predict_view(const EmbedNet<float>& phi, const SegHead<float>& head,
                     const ViewBuffers& view,
                     const std::vector<Channel>& channels) {
  auto emb = forward_embed(phi, view, channels);
  auto probs = head.forward(emb);
  ProbMap pm(view.height, view.width, head.n_classes);
  pm.p.assign(probs->value.v.begin(), probs->value.v.end());
  return pm;
}

FaceLabels infer_shape(const ShapeEntry& shape, const TriMesh& mesh,
                       ViewCache& cache, const EmbedNet<float>& phi,
                       const SegHead<float>& head,
                       const std::vector<Channel>& channels, double gamma) {
  if (shape.n_views < 1)
    throw DataError("infer: shape '" + shape.id + "' has no rendered views");
  std::vector<std::shared_ptr<const ViewBuffers>> keep;
  std::vector<ProbMap> prob_store;
  std::vector<const ViewBuffers*> views;
  std::vector<const ProbMap*> probs;
  for (int i = 0; i < shape.n_views; ++i) {
    auto vb = cache.get(shape, i);
    prob_store.push_back(predict_view(phi, head, *vb, channels));
    keep.push_back(std::move(vb));
  }
  for (int i = 0; i < shape.n_views; ++i) {
    views.push_back(keep[i].get());
    probs.push_back(&prob_store[i]);
  }
  AggregateResult agg =
      aggregate_labels(views, probs, mesh.triangles.size(), gamma);
  return fill_occluded(mesh, agg);
}

void stage_infer(const Config& cfg, const std::string& data_dir,
                 const std::string& render_dir, const std::string& checkpoint,
                 const std::string& pred_dir) {
  Dataset ds = load_dataset_checked(data_dir, render_dir);
  TrainConfig tc = train_config_from(cfg);
  double gamma = gamma_from(cfg);

  auto phi = EmbedNet<float>::create(channel_count(tc.channels), tc.embed_dim,
                                     /*seed=*/0);
  auto head = SegHead<float>::create(tc.embed_dim, ds.n_classes, /*seed=*/0);
  TensorMap tensors;
  try {
    tensors = load_checkpoint(checkpoint);
  } catch (const std::exception& e) {
    throw DataError(e.what());
  }
  assign_params(tensors, phi.params, checkpoint);
  assign_params(tensors, head.params, checkpoint);

  if (ds.test.empty()) throw DataError("infer: test split is empty");
  fs::create_directories(pred_dir);
  ViewCache cache;
  for (size_t s : ds.test) {
    const ShapeEntry& shape = ds.shapes[s];
    TriMesh mesh;
    try {
      mesh = normalize(load_obj(shape.mesh_path()));
    } catch (const std::exception& e) {
      throw DataError(e.what());
    }
    FaceLabels pred = infer_shape(shape, mesh, cache, phi, head, tc.channels,
                                  gamma);
    save_labels_file(pred_dir + "/" + shape.id + ".txt", pred.labels);
  }
  write_provenance(pred_dir, "infer", cfg,
                   {{"data", data_dir},
                    {"render", render_dir},
                    {"checkpoint", checkpoint}});
}

std::vector<double> stage_eval(const Config& cfg, const std::string& data_dir,
                               const std::vector<std::string>& pred_dirs,
                               const std::string& out_csv) {
  if (pred_dirs.empty()) throw ConfigError("eval: no prediction dirs given");
  Dataset ds = load_dataset_checked(data_dir, data_dir + "/render-unused");
  if (ds.test.empty()) throw DataError("eval: test split is empty");

  // meshes and ground truth are shared across runs
  std::vector<TriMesh> meshes;
  std::vector<const FaceLabels*> gts;
  for (size_t s : ds.test) {
    const ShapeEntry& shape = ds.shapes[s];
    if (!shape.labels)
      throw DataError("eval: shape '" + shape.id + "' has no labels");
    try {
      meshes.push_back(normalize(load_obj(shape.mesh_path())));
    } catch (const std::exception& e) {
      throw DataError(e.what());
    }
    gts.push_back(&*shape.labels);
  }

  std::vector<double> mious;
  for (const std::string& dir : pred_dirs) {
    ConfusionMatrix cm(ds.n_classes);
    for (size_t i = 0; i < ds.test.size(); ++i) {
      const ShapeEntry& shape = ds.shapes[ds.test[i]];
      std::string pred_path = dir + "/" + shape.id + ".txt";
      if (!fs::exists(pred_path))
        throw DataError("eval: missing prediction " + pred_path);
      FaceLabels pred;
      pred.labels = load_labels_file(pred_path);
      pred.n_classes = ds.n_classes;
      if (pred.labels.size() != meshes[i].triangles.size())
        throw DataError("eval: prediction length mismatch for " + pred_path);
      accumulate(cm, *gts[i], pred, meshes[i]);
    }
    mious.push_back(part_miou(cm));
  }

  std::map<std::string, std::vector<double>> by_cat{{ds.family, mious}};
  fs::path out(out_csv);
  if (!out.parent_path().empty()) fs::create_directories(out.parent_path());
  fs::path tmp = out;
  tmp += ".tmp";
  {
    std::ofstream f(tmp);
    if (!f) throw DataError("cannot write report: " + out_csv);
    f << report_csv(by_cat);
  }
  fs::rename(tmp, out);
  if (!out.parent_path().empty())
    write_provenance(out.parent_path().string(), "eval", cfg,
                     {{"data", data_dir}});
  return mious;
}

}  // namespace mvseg
