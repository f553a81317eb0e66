// Copyright (c) 2026 mvseg contributors
// SPDX-License-Identifier: Apache-2.0
#include "mvseg/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "mvseg/aggregate.hpp"
#include "mvseg/net.hpp"

namespace mvseg {
namespace {

std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

bool known_key(const std::string& key) {
  for (const ConfigKey& k : Config::schema())
    if (key == k.name) return true;
  return false;
}

}  // namespace

const std::vector<ConfigKey>& Config::schema() {
  static const std::vector<ConfigKey> keys = {
      {"synth.family", "figure", "shape family: figure | furniture"},
      {"synth.min_parts", "4", "minimum part count per shape (4..8)"},
      {"synth.max_parts", "8", "maximum part count per shape (4..8)"},
      {"synth.pose_jitter", "0.10", "relative part placement jitter"},
      {"synth.scale_jitter", "0.20", "relative part size jitter"},
      {"synth.texture_size", "256", "figure texture atlas edge length"},
      {"synth.n_shapes", "8", "total shapes to generate"},
      {"synth.n_unlabeled", "6", "shapes in the unlabeled split"},
      {"synth.n_labeled", "1", "shapes in the labeled split"},
      {"synth.n_test", "1", "shapes in the test split"},
      {"synth.seed", "0", "dataset generation seed"},

      {"render.n_views", "18", "cameras per shape"},
      {"render.radius", "2.0", "far-view camera distance"},
      {"render.fov_deg", "60", "vertical field of view"},
      {"render.angle_jitter_deg", "10", "per-view direction jitter"},
      {"render.scale_jitter", "0.10", "relative fov jitter"},
      {"render.closeup_fraction", "0.10", "fraction of closeup views"},
      {"render.image_size", "128", "square view resolution"},
      {"render.seed", "0", "view sampling seed"},
      {"render.use_texture", "true", "sample textures when the mesh has UVs"},

      {"train.batch_size", "8", "shapes (pretrain) / views (finetune) per step"},
      {"train.iterations", "2000", "optimizer steps"},
      {"train.lr", "0.001", "Adam learning rate"},
      {"train.plateau_window", "200", "pretrain lr plateau window (iterations)"},
      {"train.plateau_threshold", "0.01",
       "relative improvement below which the pretrain lr halves"},
      {"train.lr_decay", "0.99", "finetune exponential lr decay factor"},
      {"train.lr_decay_every", "40", "iterations between finetune lr decays"},
      {"train.channels", "rgb,depth",
       "input channels: comma list of rgb, normal, depth"},
      {"train.image_size", "128", "expected view resolution"},
      {"train.embed_dim", "16", "embedding dimension D"},
      {"train.match_eps", "0.005", "3D correspondence tolerance"},
      {"train.min_overlap", "0.15", "minimum view-pair overlap fraction"},
      {"train.ssl_batch", "2", "regularizer view pairs per finetune step"},
      {"train.checkpoint_every", "500", "iterations between checkpoint writes"},
      {"train.seed", "0", "training seed"},

      {"loss.tau", "0.07", "InfoNCE temperature"},
      {"loss.lambda", "0.001", "fine-tuning regularizer weight"},
      {"loss.n_pairs", "4096", "positive pairs sampled per view pair"},

      {"protocol.k", "1", "labeled shapes used for fine-tuning"},
      {"protocol.v", "0", "labeled views per shape, 0 = all"},
      {"protocol.seed", "0", "labeled shape/view selection seed"},

      {"aggregate.gamma", "20", "entropy weighting exponent"},
  };
  return keys;
}

Config Config::from_string(const std::string& text) {
  Config cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected key = value, got '" + t + "'");
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (!known_key(key))
      throw ConfigError("unknown config key '" + key + "' (line " +
                        std::to_string(line_no) + ")");
    if (cfg.kv_.count(key))
      throw ConfigError("duplicate config key '" + key + "' (line " +
                        std::to_string(line_no) + ")");
    cfg.kv_[key] = value;
  }
  return cfg;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_string(ss.str());
}

void Config::set(const std::string& key, const std::string& value) {
  if (!known_key(key))
    throw ConfigError("unknown config key '" + key + "'");
  kv_[key] = value;
}

std::string Config::get_string(const std::string& key,
                               const std::string& def) const {
  auto it = kv_.find(key);
  return it == kv_.end() ? def : it->second;
}

int Config::get_int(const std::string& key, int def) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return def;
  try {
    size_t pos = 0;
    int v = std::stoi(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': '" + it->second +
                      "' is not an integer");
  }
}

uint64_t Config::get_u64(const std::string& key, uint64_t def) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return def;
  try {
    size_t pos = 0;
    unsigned long long v = std::stoull(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': '" + it->second +
                      "' is not an unsigned integer");
  }
}

double Config::get_double(const std::string& key, double def) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return def;
  try {
    size_t pos = 0;
    double v = std::stod(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': '" + it->second +
                      "' is not a number");
  }
}

bool Config::get_bool(const std::string& key, bool def) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return def;
  const std::string& v = it->second;
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config key '" + key + "': '" + v + "' is not a boolean");
}

std::string Config::canonical() const {
  std::string out;
  for (const auto& [k, v] : kv_) {  // std::map is already sorted
    out += k;
    out += '=';
    out += v;
    out += '\n';
  }
  return out;
}

uint64_t Config::hash() const {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : canonical()) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

template <typename Fn>
auto wrap_config(const char* what, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string(what) + ": " + e.what());
  }
}

}  // namespace

SynthSpec synth_spec_from(const Config& cfg) {
  return wrap_config("synth config", [&] {
    SynthSpec s;
    s.family = parse_family(cfg.get_string("synth.family", "figure"));
    s.min_parts = cfg.get_int("synth.min_parts", 4);
    s.max_parts = cfg.get_int("synth.max_parts", 8);
    s.pose_jitter = cfg.get_double("synth.pose_jitter", 0.10);
    s.scale_jitter = cfg.get_double("synth.scale_jitter", 0.20);
    s.texture_size = cfg.get_int("synth.texture_size", 256);
    s.validate();
    return s;
  });
}

int synth_n_shapes_from(const Config& cfg) {
  int n = cfg.get_int("synth.n_shapes", 8);
  if (n < 1) throw ConfigError("synth.n_shapes must be >= 1");
  return n;
}

SplitCounts synth_splits_from(const Config& cfg) {
  SplitCounts s;
  s.n_unlabeled = cfg.get_int("synth.n_unlabeled", 6);
  s.n_labeled = cfg.get_int("synth.n_labeled", 1);
  s.n_test = cfg.get_int("synth.n_test", 1);
  return s;
}

uint64_t synth_seed_from(const Config& cfg) {
  return cfg.get_u64("synth.seed", 0);
}

ViewSamplingConfig view_config_from(const Config& cfg) {
  return wrap_config("render config", [&] {
    ViewSamplingConfig v;
    v.n_views = cfg.get_int("render.n_views", 18);
    v.radius = cfg.get_double("render.radius", 2.0);
    v.fov_deg = cfg.get_double("render.fov_deg", 60.0);
    v.angle_jitter_deg = cfg.get_double("render.angle_jitter_deg", 10.0);
    v.scale_jitter = cfg.get_double("render.scale_jitter", 0.10);
    v.closeup_fraction = cfg.get_double("render.closeup_fraction", 0.10);
    v.image_size = cfg.get_int("render.image_size", 128);
    v.seed = cfg.get_u64("render.seed", 0);
    v.validate();
    return v;
  });
}

bool render_use_texture_from(const Config& cfg) {
  return cfg.get_bool("render.use_texture", true);
}

TrainConfig train_config_from(const Config& cfg) {
  return wrap_config("train config", [&] {
    TrainConfig t;
    t.batch_size = cfg.get_int("train.batch_size", 8);
    t.iterations = cfg.get_int("train.iterations", 2000);
    t.lr = cfg.get_double("train.lr", 0.001);
    t.plateau_window = cfg.get_int("train.plateau_window", 200);
    t.plateau_threshold = cfg.get_double("train.plateau_threshold", 0.01);
    t.lr_decay = cfg.get_double("train.lr_decay", 0.99);
    t.lr_decay_every = cfg.get_int("train.lr_decay_every", 40);
    t.loss.tau = cfg.get_double("loss.tau", 0.07);
    t.loss.lambda_reg = cfg.get_double("loss.lambda", 0.001);
    t.loss.n_pairs = cfg.get_u64("loss.n_pairs", 4096);
    t.channels = parse_channels(cfg.get_string("train.channels", "rgb,depth"));
    t.image_size = cfg.get_int("train.image_size", 128);
    t.embed_dim = cfg.get_int("train.embed_dim", 16);
    t.match_eps = cfg.get_double("train.match_eps", kDefaultMatchEps);
    t.min_overlap = cfg.get_double("train.min_overlap", 0.15);
    t.ssl_batch = cfg.get_int("train.ssl_batch", 2);
    t.checkpoint_every = cfg.get_int("train.checkpoint_every", 500);
    t.seed = cfg.get_u64("train.seed", 0);
    t.validate();
    return t;
  });
}

FewShotProtocol protocol_from(const Config& cfg) {
  return wrap_config("protocol config", [&] {
    FewShotProtocol p;
    p.k = cfg.get_int("protocol.k", 1);
    p.v = cfg.get_int("protocol.v", 0);
    p.seed = cfg.get_u64("protocol.seed", 0);
    p.validate();
    return p;
  });
}

double gamma_from(const Config& cfg) {
  double g = cfg.get_double("aggregate.gamma", kDefaultGamma);
  if (!(g >= 0)) throw ConfigError("aggregate.gamma must be >= 0");
  return g;
}

}  // namespace mvseg
