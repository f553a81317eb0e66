// Copyright (c) 2026 mvseg contributors
// SPDX-License-Identifier: Apache-2.0

#include "mvseg/mesh.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace mvseg {
namespace {

[[noreturn]] void parse_error(const std::string& path, int line,
                              const std::string& what) {
  throw std::runtime_error(path + ":" + std::to_string(line) + ": " + what);
}

// Resolves an OBJ index (1-based, negative = relative) to 0-based.
int resolve_index(long idx, size_t count, const std::string& path, int line) {
  long r = idx > 0 ? idx - 1 : static_cast<long>(count) + idx;
  if (r < 0 || r >= static_cast<long>(count))
    parse_error(path, line, "index out of range: " + std::to_string(idx));
  return static_cast<int>(r);
}

}  // namespace

void TriMesh::validate(bool check_degenerate) const {
  int nv = static_cast<int>(vertices.size());
  for (size_t t = 0; t < triangles.size(); ++t)
    for (int k = 0; k < 3; ++k)
      if (triangles[t][k] < 0 || triangles[t][k] >= nv)
        throw std::runtime_error("triangle " + std::to_string(t) +
                                 " references vertex out of range");
  if (!uvs.empty() && uvs.size() != vertices.size())
    throw std::runtime_error("uv count does not match vertex count");
  if (!tri_tex.empty() && tri_tex.size() != triangles.size())
    throw std::runtime_error("tri_tex count does not match triangle count");
  if (check_degenerate)
    for (size_t t = 0; t < triangles.size(); ++t)
      if (triangle_area(static_cast<int>(t)) <= 1e-12)
        throw std::runtime_error("degenerate triangle " + std::to_string(t));
}

void FaceLabels::validate(size_t triangle_count, bool allow_unlabeled) const {
  if (labels.size() != triangle_count)
    throw std::runtime_error(
        "label count " + std::to_string(labels.size()) +
        " does not match triangle count " + std::to_string(triangle_count));
  for (size_t i = 0; i < labels.size(); ++i) {
    int32_t l = labels[i];
    if (l == kUnlabeled && allow_unlabeled) continue;
    if (l < 0 || l >= n_classes)
      throw std::runtime_error("label " + std::to_string(l) + " at triangle " +
                               std::to_string(i) + " outside [0, " +
                               std::to_string(n_classes) + ")");
  }
}

TriMesh load_obj(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open mesh: " + path);

  TriMesh mesh;
  std::vector<Vec2> vt_pool;
  // uv index recorded per vertex; OBJ keys UVs per face corner, synthetic
  // meshes here emit a 1:1 v/vt pairing so per-vertex storage is lossless
  std::vector<int> vert_uv;
  bool saw_material = false;

  std::string line_str;
  int line_no = 0;
  while (std::getline(in, line_str)) {
    ++line_no;
    std::istringstream ss(line_str);
    std::string tag;
    if (!(ss >> tag) || tag.empty() || tag[0] == '#') continue;

    if (tag == "v") {
      Vec3 v;
      if (!(ss >> v.x >> v.y >> v.z))
        parse_error(path, line_no, "malformed vertex");
      mesh.vertices.push_back(v);
      vert_uv.push_back(-1);
    } else if (tag == "vt") {
      Vec2 t;
      if (!(ss >> t.u >> t.v)) parse_error(path, line_no, "malformed vt");
      vt_pool.push_back(t);
    } else if (tag == "usemtl") {
      saw_material = true;
    } else if (tag == "f") {
      std::vector<int> face, face_uv;
      std::string corner;
      while (ss >> corner) {
        // v, v/vt, v//vn or v/vt/vn
        long vi = 0, ti = 0;
        bool has_t = false;
        const char* p = corner.c_str();
        const char* end = p + corner.size();
        auto res = std::from_chars(p, end, vi);
        if (res.ec != std::errc())
          parse_error(path, line_no, "malformed face corner '" + corner + "'");
        p = res.ptr;
        if (p < end && *p == '/') {
          ++p;
          if (p < end && *p != '/') {
            res = std::from_chars(p, end, ti);
            if (res.ec != std::errc())
              parse_error(path, line_no, "malformed vt index in '" + corner + "'");
            has_t = true;
          }
        }
        int v = resolve_index(vi, mesh.vertices.size(), path, line_no);
        face.push_back(v);
        face_uv.push_back(
            has_t ? resolve_index(ti, vt_pool.size(), path, line_no) : -1);
      }
      if (face.size() < 3) parse_error(path, line_no, "face with < 3 vertices");
      for (size_t k = 0; k < face.size(); ++k)
        if (face_uv[k] >= 0) vert_uv[face[k]] = face_uv[k];
      for (size_t k = 1; k + 1 < face.size(); ++k)
        mesh.triangles.push_back({face[0], face[k], face[k + 1]});
    }
    // vn, o, g, s, mtllib: ignored
  }

  bool any_uv = false;
  for (int idx : vert_uv) any_uv |= idx >= 0;
  if (any_uv) {
    mesh.uvs.resize(mesh.vertices.size());
    for (size_t i = 0; i < vert_uv.size(); ++i)
      if (vert_uv[i] >= 0) mesh.uvs[i] = vt_pool[vert_uv[i]];
  }
  if (saw_material) mesh.tri_tex.assign(mesh.triangles.size(), 0);
  mesh.validate();
  return mesh;
}

void save_obj(const std::string& path, const TriMesh& mesh) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write mesh: " + path);
  char buf[160];
  for (const auto& v : mesh.vertices) {
    std::snprintf(buf, sizeof buf, "v %.9g %.9g %.9g\n", v.x, v.y, v.z);
    out << buf;
  }
  for (const auto& t : mesh.uvs) {
    std::snprintf(buf, sizeof buf, "vt %.9g %.9g\n", t.u, t.v);
    out << buf;
  }
  bool uv = mesh.has_uvs();
  for (const auto& t : mesh.triangles) {
    if (uv)
      std::snprintf(buf, sizeof buf, "f %d/%d %d/%d %d/%d\n", t[0] + 1,
                    t[0] + 1, t[1] + 1, t[1] + 1, t[2] + 1, t[2] + 1);
    else
      std::snprintf(buf, sizeof buf, "f %d %d %d\n", t[0] + 1, t[1] + 1,
                    t[2] + 1);
    out << buf;
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<int32_t> load_labels_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open labels: " + path);
  std::vector<int32_t> labels;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    long v = 0;
    auto res = std::from_chars(line.data(), line.data() + line.size(), v);
    if (res.ec != std::errc())
      parse_error(path, line_no, "malformed label '" + line + "'");
    labels.push_back(static_cast<int32_t>(v));
  }
  return labels;
}

void save_labels_file(const std::string& path,
                      const std::vector<int32_t>& labels) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write labels: " + path);
  for (int32_t l : labels) out << l << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::pair<TriMesh, std::optional<FaceLabels>> load_mesh(
    const std::string& path, const std::optional<std::string>& labels_path) {
  TriMesh mesh = load_obj(path);
  std::optional<FaceLabels> labels;
  if (labels_path) {
    FaceLabels fl;
    fl.labels = load_labels_file(*labels_path);
    int32_t max_label = -1;
    for (int32_t l : fl.labels) max_label = std::max(max_label, l);
    fl.n_classes = max_label + 1;
    if (fl.labels.size() != mesh.triangles.size())
      throw std::runtime_error(
          *labels_path + ": " + std::to_string(fl.labels.size()) +
          " labels for " + std::to_string(mesh.triangles.size()) + " triangles");
    fl.validate(mesh.triangles.size());
    labels = std::move(fl);
  }
  return {std::move(mesh), std::move(labels)};
}

TriMesh normalize(const TriMesh& mesh) {
  if (mesh.vertices.empty()) throw std::runtime_error("normalize: empty mesh");
  Vec3 lo = mesh.vertices[0], hi = mesh.vertices[0];
  for (const auto& v : mesh.vertices) {
    lo = min(lo, v);
    hi = max(hi, v);
  }
  Vec3 center = (lo + hi) * 0.5;
  double max_norm = 0.0;
  for (const auto& v : mesh.vertices)
    max_norm = std::max(max_norm, (v - center).norm());
  if (max_norm <= 0.0)
    throw std::runtime_error("normalize: mesh collapses to a point");
  TriMesh out = mesh;
  double inv = 1.0 / max_norm;
  for (auto& v : out.vertices) v = (v - center) * inv;
  return out;
}

int32_t nearest_labeled_triangle(const TriMesh& mesh, const FaceLabels& labels,
                                 int query_triangle) {
  labels.validate(mesh.triangles.size(), /*allow_unlabeled=*/true);
  Vec3 q = mesh.triangle_centroid(query_triangle);
  double best_d = std::numeric_limits<double>::infinity();
  int32_t best_label = kUnlabeled;
  for (size_t t = 0; t < mesh.triangles.size(); ++t) {
    if (labels.labels[t] == kUnlabeled) continue;
    double d = (mesh.triangle_centroid(static_cast<int>(t)) - q).norm2();
    if (d < best_d) {  // strict: ties keep the lowest index
      best_d = d;
      best_label = labels.labels[t];
    }
  }
  if (best_label == kUnlabeled)
    throw std::runtime_error("nearest_labeled_triangle: no labeled triangles");
  return best_label;
}

}  // namespace mvseg
