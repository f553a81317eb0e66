// Copyright (c) 2026 mvseg contributors
// SPDX-License-Identifier: Apache-2.0
#include "mvseg/trainer.hpp"

#include "mvseg/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <unordered_map>

namespace mvseg {
namespace {

// mix_seed stream ids; every derived Rng gets its own lane
enum : uint64_t {
  kStreamPretrainIter = 0x11,
  kStreamFinetuneIter = 0x12,
  kStreamInitPhi = 0x21,
  kStreamInitHead = 0x22,
  kStreamProtocolViews = 0x31,
};

struct CsvWriter {
  std::ofstream out;
  CsvWriter(const std::string& path, const char* header) : out(path) {
    if (!out) throw DataError("cannot write loss curve: " + path);
    out << header << "\n";
  }
  void row(std::initializer_list<double> vals) {
    char buf[64];
    bool first = true;
    for (double v : vals) {
      std::snprintf(buf, sizeof buf, "%.9g", v);
      out << (first ? "" : ",") << buf;
      first = false;
    }
    out << "\n";
  }
};

void check_views(const ShapeEntry& shape, const ViewBuffers& v,
                 const TrainConfig& cfg) {
  if (v.height != cfg.image_size || v.width != cfg.image_size)
    throw DataError("view of '" + shape.id + "' is " +
                             std::to_string(v.width) + "x" +
                             std::to_string(v.height) +
                             " but config expects image_size " +
                             std::to_string(cfg.image_size));
}

// Per-shape list of usable view pairs, plus the flattened sampling pool.
struct SslPool {
  struct Entry {
    size_t shape;  // index into ds.shapes
    std::vector<std::pair<int, int>> pairs;
  };
  std::vector<Entry> entries;
};

SslPool build_ssl_pool(const Dataset& ds, ViewCache& cache,
                       const TrainConfig& cfg) {
  SslPool pool;
  for (size_t s : ds.unlabeled) {
    const ShapeEntry& shape = ds.shapes[s];
    if (shape.n_views < 2) continue;
    auto pairs =
        eligible_view_pairs(shape, cache, cfg.match_eps, cfg.min_overlap);
    if (!pairs.empty()) pool.entries.push_back({s, std::move(pairs)});
  }
  if (pool.entries.empty())
    throw DataError(
        "no unlabeled shape has a view pair with overlap >= " +
        std::to_string(cfg.min_overlap) + " (eps=" +
        std::to_string(cfg.match_eps) + "); render views first?");
  return pool;
}

// One sampled ssl term: loads the pair, orients it, samples positives.
// `keep` extends the lifetime of everything the loss graph references.
struct SslDraw {
  std::shared_ptr<const ViewBuffers> va, vb;
  PairSample sample;
};

SslDraw draw_ssl_pair(const SslPool& pool, const Dataset& ds, ViewCache& cache,
                      const TrainConfig& cfg, Rng& rng) {
  const auto& entry = pool.entries[rng.index(pool.entries.size())];
  auto [i, j] = entry.pairs[rng.index(entry.pairs.size())];
  if (rng.below(2)) std::swap(i, j);  // either view may anchor

  const ShapeEntry& shape = ds.shapes[entry.shape];
  SslDraw d;
  d.va = cache.get(shape, i);
  d.vb = cache.get(shape, j);
  check_views(shape, *d.va, cfg);
  MatchSet m = build_matches(*d.va, *d.vb, cfg.match_eps);
  d.sample = sample_positive_pairs(m, cfg.loss.n_pairs, rng.next());
  return d;
}

struct SslGraph {
  Ptr<float> loss;
  // keep-alive for the valid masks referenced by the graph builders
  std::vector<std::shared_ptr<std::vector<uint8_t>>> masks;
  std::vector<std::shared_ptr<const ViewBuffers>> views;
};

SslGraph build_ssl_graph(const EmbedNet<float>& phi, const SslPool& pool,
                         const Dataset& ds, ViewCache& cache,
                         const TrainConfig& cfg, Rng& rng, int batch) {
  SslGraph g;
  std::vector<SslTerm<float>> terms;
  for (int b = 0; b < batch; ++b) {
    SslDraw d = draw_ssl_pair(pool, ds, cache, cfg, rng);
    std::shared_ptr<std::vector<uint8_t>> va, vb;
    auto ea = forward_embed(phi, *d.va, cfg.channels, &va);
    auto eb = forward_embed(phi, *d.vb, cfg.channels, &vb);
    g.masks.push_back(va);
    g.masks.push_back(vb);
    g.views.push_back(d.va);
    g.views.push_back(d.vb);
    terms.push_back({ea, eb, std::move(d.sample), va.get(), vb.get()});
  }
  g.loss = ssl_loss_over_batch(terms, cfg.loss.tau);
  return g;
}

double window_mean(const std::vector<double>& v, size_t begin, size_t n) {
  double s = 0;
  for (size_t i = begin; i < begin + n; ++i) s += v[i];
  return s / double(n);
}

}  // namespace

void FewShotProtocol::validate() const {
  if (k < 1) throw ConfigError("protocol: k must be >= 1");
  if (v < 0) throw ConfigError("protocol: v must be >= 1 or 0 (all)");
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("train config: batch_size < 1");
  if (iterations < 0) throw ConfigError("train config: iterations < 0");
  if (!(lr > 0)) throw ConfigError("train config: lr must be > 0");
  if (plateau_window < 1)
    throw ConfigError("train config: plateau_window < 1");
  if (!(plateau_threshold >= 0))
    throw ConfigError("train config: plateau_threshold < 0");
  if (!(lr_decay > 0 && lr_decay <= 1))
    throw ConfigError("train config: lr_decay outside (0,1]");
  if (lr_decay_every < 1)
    throw ConfigError("train config: lr_decay_every < 1");
  loss.validate();
  if (channels.empty()) throw ConfigError("train config: no channels");
  if (image_size < 2 || image_size % 2 != 0)
    throw ConfigError("train config: image_size must be even and >= 2");
  if (embed_dim < 1) throw ConfigError("train config: embed_dim < 1");
  if (!(match_eps > 0)) throw ConfigError("train config: match_eps <= 0");
  if (!(min_overlap >= 0 && min_overlap <= 1))
    throw ConfigError("train config: min_overlap outside [0,1]");
  if (ssl_batch < 1) throw ConfigError("train config: ssl_batch < 1");
  if (checkpoint_every < 1)
    throw ConfigError("train config: checkpoint_every < 1");
}

std::vector<std::pair<int, int>> eligible_view_pairs(const ShapeEntry& shape,
                                                     ViewCache& cache,
                                                     double eps,
                                                     double min_overlap) {
  std::vector<std::pair<int, int>> out;
  for (int i = 0; i < shape.n_views; ++i) {
    auto vi = cache.get(shape, i);
    for (int j = i + 1; j < shape.n_views; ++j) {
      auto vj = cache.get(shape, j);
      if (overlap(*vi, *vj, eps) >= min_overlap) out.emplace_back(i, j);
    }
  }
  return out;
}

std::vector<size_t> select_protocol_shapes(const Dataset& ds,
                                           const FewShotProtocol& protocol) {
  protocol.validate();
  if (ds.labeled.empty())
    throw DataError("finetune: labeled split is empty");
  if (size_t(protocol.k) > ds.labeled.size())
    throw DataError("finetune: protocol asks for k=" +
                             std::to_string(protocol.k) + " but only " +
                             std::to_string(ds.labeled.size()) +
                             " labeled shapes exist");
  Rng rng(mix_seed(protocol.seed, 0x5e1ec7));
  auto picks = rng.sample_without_replacement(ds.labeled.size(), protocol.k);
  std::vector<size_t> out;
  out.reserve(picks.size());
  for (size_t p : picks) out.push_back(ds.labeled[p]);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<int> select_protocol_views(const ShapeEntry& shape,
                                       const FewShotProtocol& protocol,
                                       uint64_t stream) {
  if (protocol.v == 0) {
    std::vector<int> all(shape.n_views);
    for (int i = 0; i < shape.n_views; ++i) all[i] = i;
    return all;
  }
  if (protocol.v > shape.n_views)
    throw DataError("finetune: protocol v=" +
                             std::to_string(protocol.v) + " but shape '" +
                             shape.id + "' has only " +
                             std::to_string(shape.n_views) + " views");
  Rng rng(mix_seed(mix_seed(protocol.seed, kStreamProtocolViews), stream));
  auto picks = rng.sample_without_replacement(shape.n_views, protocol.v);
  std::vector<int> out(picks.begin(), picks.end());
  std::sort(out.begin(), out.end());
  return out;
}

TrainResult pretrain(const Dataset& ds, const TrainConfig& cfg,
                     const std::string& out_checkpoint,
                     const std::string& curve_csv) {
  cfg.validate();
  if (ds.unlabeled.empty())
    throw DataError("pretrain: unlabeled split is empty");

  auto phi = EmbedNet<float>::create(channel_count(cfg.channels),
                                     cfg.embed_dim,
                                     mix_seed(cfg.seed, kStreamInitPhi));
  AdamState<float> adam(phi.params);
  CsvWriter csv(curve_csv, "iteration,loss,lr");

  TrainResult res;
  if (cfg.iterations == 0) {
    save_checkpoint(out_checkpoint, snapshot_params(phi.params));
    return res;
  }

  ViewCache cache(1024);
  SslPool pool = build_ssl_pool(ds, cache, cfg);

  double lr = cfg.lr;
  std::vector<double> losses;
  losses.reserve(cfg.iterations);
  for (int t = 0; t < cfg.iterations; ++t) {
    Rng rng(mix_seed(mix_seed(cfg.seed, kStreamPretrainIter), uint64_t(t)));
    SslGraph g =
        build_ssl_graph(phi, pool, ds, cache, cfg, rng, cfg.batch_size);

    double value = double(g.loss->value.v[0]);
    if (!std::isfinite(value))
      throw NumericError("pretrain: non-finite loss at iteration " +
                               std::to_string(t));
    zero_grad(phi.params);
    backward(g.loss);
    AdamConfig ac;
    ac.lr = lr;
    adam_step(adam, phi.params, ac);

    losses.push_back(value);
    res.curve.push_back({t, value, 0, value, lr});
    csv.row({double(t), value, lr});

    // halve on plateau: trailing window vs the one before it
    size_t w = size_t(cfg.plateau_window);
    if (losses.size() >= 2 * w && losses.size() % w == 0) {
      double prev = window_mean(losses, losses.size() - 2 * w, w);
      double recent = window_mean(losses, losses.size() - w, w);
      if (prev - recent < cfg.plateau_threshold * std::abs(prev)) lr *= 0.5;
    }

    if ((t + 1) % cfg.checkpoint_every == 0)
      save_checkpoint(out_checkpoint, snapshot_params(phi.params));
  }
  save_checkpoint(out_checkpoint, snapshot_params(phi.params));
  return res;
}

TrainResult finetune(const Dataset& ds, const FewShotProtocol& protocol,
                     const std::optional<std::string>& init_checkpoint,
                     const TrainConfig& cfg, const std::string& out_checkpoint,
                     const std::string& curve_csv) {
  cfg.validate();
  protocol.validate();
  if (ds.n_classes < 2)
    throw DataError("finetune: need at least 2 classes");

  auto phi = EmbedNet<float>::create(channel_count(cfg.channels),
                                     cfg.embed_dim,
                                     mix_seed(cfg.seed, kStreamInitPhi));
  auto head = SegHead<float>::create(cfg.embed_dim, ds.n_classes,
                                     mix_seed(cfg.seed, kStreamInitHead));
  if (init_checkpoint) {
    TensorMap tensors = load_checkpoint(*init_checkpoint);
    assign_params(tensors, phi.params, *init_checkpoint);
    if (tensors.count("head.conv.weight") && tensors.count("head.conv.bias"))
      assign_params(tensors, head.params, *init_checkpoint);
  }

  TrainResult res;
  auto selected = select_protocol_shapes(ds, protocol);
  for (size_t s : selected) res.protocol_shapes.push_back(ds.shapes[s].id);

  ViewCache cache(1024);
  // supervised pool: (shape index, view) pairs the protocol allows
  std::vector<std::pair<size_t, int>> sl_pool;
  for (size_t rank = 0; rank < selected.size(); ++rank) {
    const ShapeEntry& shape = ds.shapes[selected[rank]];
    if (!shape.labels)
      throw DataError("finetune: shape '" + shape.id +
                               "' has no labels");
    if (shape.n_views < 1)
      throw DataError("finetune: shape '" + shape.id +
                               "' has no rendered views");
    for (int v : select_protocol_views(shape, protocol, rank))
      sl_pool.emplace_back(selected[rank], v);
  }

  bool use_reg = cfg.loss.lambda_reg > 0;
  SslPool ssl_pool;
  if (use_reg) ssl_pool = build_ssl_pool(ds, cache, cfg);

  std::vector<Ptr<float>> params = phi.params;
  params.insert(params.end(), head.params.begin(), head.params.end());
  AdamState<float> adam(params);
  CsvWriter csv(curve_csv, "iteration,loss,sl,ssl,lr");

  // label maps are small; cache them all
  std::unordered_map<std::string, LabelMap> label_maps;

  if (cfg.iterations == 0) {
    TensorMap merged = snapshot_params(params);
    save_checkpoint(out_checkpoint, merged);
    return res;
  }

  for (int t = 0; t < cfg.iterations; ++t) {
    Rng rng(mix_seed(mix_seed(cfg.seed, kStreamFinetuneIter), uint64_t(t)));
    double lr = cfg.lr * std::pow(cfg.lr_decay, double(t / cfg.lr_decay_every));

    // supervised term: mean CE over a batch of labeled views
    Ptr<float> sl;
    std::vector<std::shared_ptr<const ViewBuffers>> keep;
    for (int b = 0; b < cfg.batch_size; ++b) {
      auto [s, view] = sl_pool[rng.index(sl_pool.size())];
      const ShapeEntry& shape = ds.shapes[s];
      auto vb = cache.get(shape, view);
      check_views(shape, *vb, cfg);
      keep.push_back(vb);
      std::string key = shape.id + "/" + std::to_string(view);
      auto it = label_maps.find(key);
      if (it == label_maps.end())
        it = label_maps.emplace(key, render_label_map(*shape.labels, *vb))
                 .first;
      auto emb = forward_embed(phi, *vb, cfg.channels);
      auto ce = cross_entropy(head.forward(emb), it->second);
      sl = sl ? add(sl, ce) : ce;
    }
    sl = scale(sl, 1.0f / float(cfg.batch_size));

    Ptr<float> total = sl;
    double ssl_value = 0.0;
    SslGraph ssl_graph;
    if (use_reg) {
      ssl_graph = build_ssl_graph(phi, ssl_pool, ds, cache, cfg, rng,
                                  cfg.ssl_batch);
      ssl_value = double(ssl_graph.loss->value.v[0]);
      total = joint_finetune_loss(sl, ssl_graph.loss, cfg.loss.lambda_reg);
    }

    double value = double(total->value.v[0]);
    double sl_value = double(sl->value.v[0]);
    if (!std::isfinite(value))
      throw NumericError("finetune: non-finite loss at iteration " +
                               std::to_string(t));
    zero_grad(params);
    backward(total);
    AdamConfig ac;
    ac.lr = lr;
    adam_step(adam, params, ac);

    res.curve.push_back({t, value, sl_value, ssl_value, lr});
    csv.row({double(t), value, sl_value, ssl_value, lr});

    if ((t + 1) % cfg.checkpoint_every == 0)
      save_checkpoint(out_checkpoint, snapshot_params(params));
  }
  save_checkpoint(out_checkpoint, snapshot_params(params));
  return res;
}

}  // namespace mvseg
