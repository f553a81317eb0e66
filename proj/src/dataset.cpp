// Copyright (c) 2026 mvseg contributors
// SPDX-License-Identifier: Apache-2.0
#include "mvseg/dataset.hpp"

#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "mvseg/view_io.hpp"

namespace mvseg {

namespace fs = std::filesystem;

std::string ShapeEntry::mesh_path() const { return shape_dir + "/mesh.obj"; }
std::string ShapeEntry::labels_path() const { return shape_dir + "/labels.txt"; }

std::string ShapeEntry::texture_path() const {
  std::string p = shape_dir + "/texture.png";
  return fs::exists(p) ? p : std::string();
}

std::string ShapeEntry::view_path(int view) const {
  return view_dir + "/" + view_stem(view) + ".mvdc";
}

namespace {

int count_views(const std::string& view_dir) {
  int n = 0;
  while (fs::exists(view_dir + "/" + view_stem(n) + ".mvdc")) ++n;
  return n;
}

}  // namespace

Dataset load_dataset(const std::string& data_dir,
                     const std::string& render_dir) {
  std::ifstream in(data_dir + "/manifest.json");
  if (!in)
    throw std::runtime_error("cannot open manifest: " + data_dir +
                             "/manifest.json");
  nlohmann::json m;
  try {
    in >> m;
  } catch (const std::exception& e) {
    throw std::runtime_error("malformed manifest in " + data_dir + ": " +
                             e.what());
  }

  Dataset ds;
  ds.family = m.at("family").get<std::string>();
  ds.n_classes = m.at("n_classes").get<int>();
  ds.textured = m.value("textured", false);
  if (ds.n_classes < 1)
    throw std::runtime_error("manifest: n_classes must be >= 1");

  const auto& splits = m.at("splits");
  const char* split_names[3] = {"unlabeled", "labeled", "test"};
  std::vector<size_t>* split_vecs[3] = {&ds.unlabeled, &ds.labeled, &ds.test};
  for (int s = 0; s < 3; ++s) {
    for (const auto& id_json : splits.at(split_names[s])) {
      ShapeEntry e;
      e.id = id_json.get<std::string>();
      e.shape_dir = data_dir + "/shapes/" + e.id;
      if (!fs::exists(e.shape_dir + "/mesh.obj"))
        throw std::runtime_error("manifest lists '" + e.id +
                                 "' but " + e.shape_dir + "/mesh.obj is missing");
      e.view_dir = render_dir + "/" + e.id;
      e.n_views = count_views(e.view_dir);
      if (fs::exists(e.labels_path())) {
        FaceLabels l;
        l.labels = load_labels_file(e.labels_path());
        l.n_classes = ds.n_classes;
        l.validate(l.labels.size(), /*allow_unlabeled=*/true);
        e.labels = std::move(l);
      }
      split_vecs[s]->push_back(ds.shapes.size());
      ds.shapes.push_back(std::move(e));
    }
  }
  return ds;
}

ViewCache::ViewCache(size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw std::runtime_error("ViewCache: capacity 0");
}

std::shared_ptr<const ViewBuffers> ViewCache::get(const ShapeEntry& shape,
                                                  int view) {
  std::string key = shape.id + "/" + std::to_string(view);
  auto it = map_.find(key);
  if (it != map_.end()) {
    lru_.splice(lru_.begin(), lru_, it->second);
    return it->second->view;
  }
  auto loaded =
      std::make_shared<ViewBuffers>(load_view(shape.view_path(view)));
  lru_.push_front({key, loaded});
  map_[key] = lru_.begin();
  if (map_.size() > capacity_) {
    map_.erase(lru_.back().key);
    lru_.pop_back();
  }
  return loaded;
}

}  // namespace mvseg
