// Copyright (c) 2026 mvseg contributors
// SPDX-License-Identifier: Apache-2.0
//
// Key-value pipeline configuration. One flat file drives every stage:
//
//   # comment
//   synth.family = figure
//   train.lr     = 0.001
//
// Keys live in a fixed schema (see Config::schema()); unknown or duplicate
// keys are rejected so typos fail loudly instead of silently using defaults.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mvseg/camera.hpp"
#include "mvseg/errors.hpp"
#include "mvseg/synthgen.hpp"
#include "mvseg/trainer.hpp"

namespace mvseg {

struct ConfigKey {
  const char* name;
  const char* default_value;
  const char* doc;
};

class Config {
 public:
  Config() = default;

  static Config load(const std::string& path);
  static Config from_string(const std::string& text);

  /// CLI override; the key must be in the schema.
  void set(const std::string& key, const std::string& value);

  bool has(const std::string& key) const { return kv_.count(key) != 0; }
  std::string get_string(const std::string& key, const std::string& def) const;
  int get_int(const std::string& key, int def) const;
  uint64_t get_u64(const std::string& key, uint64_t def) const;
  double get_double(const std::string& key, double def) const;
  bool get_bool(const std::string& key, bool def) const;

  /// Sorted "key=value" lines; the provenance hash input.
  std::string canonical() const;
  /// FNV-1a 64 of canonical().
  uint64_t hash() const;

  static const std::vector<ConfigKey>& schema();

 private:
  std::map<std::string, std::string> kv_;
};

// Stage-struct builders. Each reads its keys with schema defaults and calls
// the struct's validate(); failures surface as ConfigError.
SynthSpec synth_spec_from(const Config& cfg);
int synth_n_shapes_from(const Config& cfg);
SplitCounts synth_splits_from(const Config& cfg);
uint64_t synth_seed_from(const Config& cfg);
ViewSamplingConfig view_config_from(const Config& cfg);
bool render_use_texture_from(const Config& cfg);
TrainConfig train_config_from(const Config& cfg);
FewShotProtocol protocol_from(const Config& cfg);
double gamma_from(const Config& cfg);

}  // namespace mvseg
