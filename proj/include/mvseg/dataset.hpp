// Copyright (c) 2026 mvseg contributors
// SPDX-License-Identifier: Apache-2.0
//
// Dataset access for training and inference: the manifest written by the
// synth stage plus the per-shape view directories written by the render
// stage, with a small LRU cache over loaded views.
#pragma once

#include <list>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "mvseg/mesh.hpp"
#include "mvseg/render.hpp"

namespace mvseg {

struct ShapeEntry {
  std::string id;
  std::string shape_dir;  // mesh.obj, labels.txt, optional texture.png
  std::string view_dir;   // view_%03d.mvdc, may not exist before rendering
  int n_views = 0;
  std::optional<FaceLabels> labels;

  std::string mesh_path() const;
  std::string labels_path() const;
  std::string texture_path() const;  // empty when absent
  std::string view_path(int view) const;
};

struct Dataset {
  std::vector<ShapeEntry> shapes;
  // indices into `shapes` per split
  std::vector<size_t> unlabeled, labeled, test;
  int n_classes = 0;
  bool textured = false;
  std::string family;
};

/// Reads manifest.json from data_dir and scans render_dir for per-shape view
/// files. Shapes that are not rendered yet get n_views = 0; labels are loaded
/// for every shape whose labels.txt exists. Throws on a malformed manifest,
/// unknown split members, or labels inconsistent with n_classes.
Dataset load_dataset(const std::string& data_dir,
                     const std::string& render_dir);

/// LRU over loaded views. Entries are shared_ptr so a returned view outlives
/// its eviction.
class ViewCache {
 public:
  explicit ViewCache(size_t capacity = 256);

  std::shared_ptr<const ViewBuffers> get(const ShapeEntry& shape, int view);
  size_t size() const { return map_.size(); }

 private:
  struct Slot {
    std::string key;
    std::shared_ptr<const ViewBuffers> view;
  };
  size_t capacity_;
  std::list<Slot> lru_;  // front = most recent
  std::unordered_map<std::string, std::list<Slot>::iterator> map_;
};

}  // namespace mvseg
