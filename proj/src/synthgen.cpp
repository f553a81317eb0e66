// Copyright (c) 2026 mvseg contributors
// SPDX-License-Identifier: Apache-2.0
#include "mvseg/synthgen.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "json.hpp"
#include "mvseg/rng.hpp"

namespace mvseg {
namespace {

namespace fs = std::filesystem;

// ---------------------------------------------------------------- geometry

// The 256x256 atlas is a 4x2 grid of tiles, part id k -> tile (k%4, k/4).
constexpr int kAtlasCols = 4;
constexpr int kAtlasRows = 2;

struct UvRect {
  double u0, v0, u1, v1;
};

UvRect part_tile(int part) {
  double tw = 1.0 / kAtlasCols, th = 1.0 / kAtlasRows;
  double u0 = (part % kAtlasCols) * tw;
  double v0 = (part / kAtlasCols) * th;
  // inset keeps bilinear lookups off neighboring tiles
  return {u0 + 0.04 * tw, v0 + 0.04 * th, u0 + 0.96 * tw, v0 + 0.96 * th};
}

struct Builder {
  TriMesh mesh;
  std::vector<int32_t> labels;
  bool textured = false;

  int add_vertex(const Vec3& p, const Vec2& uv) {
    mesh.vertices.push_back(p);
    if (textured) mesh.uvs.push_back(uv);
    return static_cast<int>(mesh.vertices.size()) - 1;
  }
  void add_tri(int a, int b, int c, int part) {
    mesh.triangles.push_back({a, b, c});
    labels.push_back(part);
  }
  Vec2 tile_uv(int part, double s, double t) const {
    if (!textured) return {};
    UvRect r = part_tile(part);
    return {r.u0 + s * (r.u1 - r.u0), r.v0 + t * (r.v1 - r.v0)};
  }
};

void add_box(Builder& b, int part, const Vec3& c, const Vec3& h) {
  Vec3 p[8];
  for (int i = 0; i < 8; ++i)
    p[i] = {c.x + ((i & 1) ? h.x : -h.x), c.y + ((i & 2) ? h.y : -h.y),
            c.z + ((i & 4) ? h.z : -h.z)};
  // corner order gives outward CCW winding per face
  static const int kFaces[6][4] = {{1, 3, 7, 5}, {0, 4, 6, 2}, {2, 6, 7, 3},
                                   {0, 1, 5, 4}, {4, 5, 7, 6}, {0, 2, 3, 1}};
  static const double kSt[4][2] = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  for (const auto& f : kFaces) {
    int v[4];
    for (int k = 0; k < 4; ++k)
      v[k] = b.add_vertex(p[f[k]], b.tile_uv(part, kSt[k][0], kSt[k][1]));
    b.add_tri(v[0], v[1], v[2], part);
    b.add_tri(v[0], v[2], v[3], part);
  }
}

void add_cylinder(Builder& b, int part, const Vec3& p0, const Vec3& p1,
                  double radius, int nseg = 12) {
  Vec3 d = (p1 - p0).normalized();
  Vec3 a = std::abs(d.z) < 0.9 ? Vec3{0, 0, 1} : Vec3{1, 0, 0};
  Vec3 u = d.cross(a).normalized();
  Vec3 v = d.cross(u);  // (u, v, d) right-handed
  auto ring = [&](int i, double t) {
    double th = 2.0 * M_PI * i / nseg;
    return (t == 0.0 ? p0 : p1) + u * (radius * std::cos(th)) +
           v * (radius * std::sin(th));
  };
  // side, seam duplicated so the texture wraps cleanly
  std::vector<int> bot(nseg + 1), top(nseg + 1);
  for (int i = 0; i <= nseg; ++i) {
    double s = double(i) / nseg;
    bot[i] = b.add_vertex(ring(i, 0.0), b.tile_uv(part, s, 0.0));
    top[i] = b.add_vertex(ring(i, 1.0), b.tile_uv(part, s, 1.0));
  }
  for (int i = 0; i < nseg; ++i) {
    b.add_tri(bot[i], bot[i + 1], top[i + 1], part);
    b.add_tri(bot[i], top[i + 1], top[i], part);
  }
  // caps: fan around duplicated ring vertices with disc UVs
  for (int cap = 0; cap < 2; ++cap) {
    double t = cap ? 1.0 : 0.0;
    int center = b.add_vertex(cap ? p1 : p0, b.tile_uv(part, 0.5, 0.5));
    std::vector<int> rim(nseg + 1);
    for (int i = 0; i <= nseg; ++i) {
      double th = 2.0 * M_PI * i / nseg;
      rim[i] = b.add_vertex(ring(i, t),
                            b.tile_uv(part, 0.5 + 0.5 * std::cos(th),
                                      0.5 + 0.5 * std::sin(th)));
    }
    for (int i = 0; i < nseg; ++i) {
      if (cap)
        b.add_tri(center, rim[i], rim[i + 1], part);
      else
        b.add_tri(center, rim[i + 1], rim[i], part);
    }
  }
}

void add_sphere(Builder& b, int part, const Vec3& c, double radius,
                int slices = 12, int stacks = 8) {
  std::vector<int> grid((stacks + 1) * (slices + 1));
  for (int i = 0; i <= stacks; ++i) {
    double phi = M_PI * i / stacks;
    for (int j = 0; j <= slices; ++j) {
      double th = 2.0 * M_PI * j / slices;
      Vec3 p = c + Vec3{std::sin(phi) * std::cos(th),
                        std::sin(phi) * std::sin(th), std::cos(phi)} *
                       radius;
      grid[i * (slices + 1) + j] = b.add_vertex(
          p, b.tile_uv(part, double(j) / slices, double(i) / stacks));
    }
  }
  auto at = [&](int i, int j) { return grid[i * (slices + 1) + j]; };
  for (int i = 0; i < stacks; ++i) {
    for (int j = 0; j < slices; ++j) {
      int a = at(i, j), a1 = at(i, j + 1);
      int d = at(i + 1, j), d1 = at(i + 1, j + 1);
      // pole bands collapse one triangle of the quad
      if (i > 0) b.add_tri(a, d1, a1, part);
      if (i + 1 < stacks) b.add_tri(a, d, d1, part);
    }
  }
}

// -------------------------------------------------------------- assemblies

// Positional jitter draws are made even for excluded parts where convenient;
// only the code order below defines the stream, and it is fixed.
struct Jitter {
  Rng& rng;
  double scale, pose;
  double len(double base) { return base * (1.0 + scale * rng.uniform(-1, 1)); }
  double shift() { return pose * rng.uniform(-1, 1); }
};

// furniture: 0 top, 1 legs, 2 back, 3 stretcher, 4 apron, 5 shelf,
//            6 armrest, 7 knob
void build_furniture(Builder& b, const SynthSpec& spec, int n_parts, Rng& rng) {
  Jitter j{rng, spec.scale_jitter, spec.pose_jitter};
  double h = j.len(1.0);         // top surface height
  double tx = j.len(0.55);       // top half extents
  double ty = j.len(0.42);
  double tt = j.len(0.045);
  bool round_legs = rng.below(2) != 0;
  double leg_r = j.len(0.05);
  double back_h = j.len(0.55);
  double back_t = j.len(0.035);
  double stretch_z = rng.uniform(0.15, 0.4) * h;

  add_box(b, 0, {j.shift(), j.shift(), h - tt}, {tx, ty, tt});

  double lx = tx - 2.0 * leg_r, ly = ty - 2.0 * leg_r, lh = h - 2.0 * tt;
  for (int sx = -1; sx <= 1; sx += 2)
    for (int sy = -1; sy <= 1; sy += 2) {
      Vec3 base{sx * lx, sy * ly, 0.0};
      if (round_legs)
        add_cylinder(b, 1, base, {base.x, base.y, lh}, leg_r);
      else
        add_box(b, 1, {base.x, base.y, lh / 2}, {leg_r, leg_r, lh / 2});
    }

  if (n_parts > 2)
    add_box(b, 2, {j.shift(), -ty + back_t, h + back_h / 2},
            {tx * 0.92, back_t, back_h / 2});
  if (n_parts > 3)
    for (int sy = -1; sy <= 1; sy += 2)
      add_cylinder(b, 3, {-lx, sy * ly, stretch_z}, {lx, sy * ly, stretch_z},
                   leg_r * 0.6);
  if (n_parts > 4)
    add_box(b, 4, {0, 0, lh - 0.05}, {tx * 0.8, ty * 0.8, 0.03});
  if (n_parts > 5)
    add_box(b, 5, {0, 0, 0.45 * h}, {tx * 0.75, ty * 0.75, 0.025});
  if (n_parts > 6)
    for (int sx = -1; sx <= 1; sx += 2)
      add_box(b, 6, {sx * (tx + 0.04), 0, h + 0.22},
              {0.035, ty * 0.75, 0.03});
  if (n_parts > 7)
    add_sphere(b, 7, {0, -ty + back_t, h + back_h + 0.05}, 0.06);
}

// figure: 0 head, 1 torso, 2 arms, 3 legs, 4 hands, 5 feet, 6 hat, 7 belt
void build_figure(Builder& b, const SynthSpec& spec, int n_parts, Rng& rng) {
  Jitter j{rng, spec.scale_jitter, spec.pose_jitter};
  double leg_h = j.len(0.62);
  double leg_r = j.len(0.07);
  double hip_x = j.len(0.13);
  double torso_h = j.len(0.62);
  double torso_hx = j.len(0.24);
  double torso_hy = j.len(0.14);
  bool round_torso = rng.below(2) != 0;
  double head_r = j.len(0.17);
  double arm_r = j.len(0.055);
  double arm_len = j.len(0.5);
  double arm_angle = rng.uniform(0.15, 0.9);  // radians off straight-down

  double shoulder_z = leg_h + torso_h - 1.5 * arm_r;
  Vec3 head_c{j.shift() * 0.3, j.shift() * 0.3,
              leg_h + torso_h + 1.05 * head_r};

  add_sphere(b, 0, head_c, head_r);

  if (round_torso)
    add_cylinder(b, 1, {0, 0, leg_h}, {0, 0, leg_h + torso_h}, torso_hx);
  else
    add_box(b, 1, {0, 0, leg_h + torso_h / 2}, {torso_hx, torso_hy, torso_h / 2});

  Vec3 hand[2];
  for (int s = -1, k = 0; s <= 1; s += 2, ++k) {
    Vec3 p0{s * torso_hx, 0.0, shoulder_z};
    Vec3 p1 = p0 + Vec3{s * std::sin(arm_angle), j.shift() * 0.5,
                        -std::cos(arm_angle)} *
                       arm_len;
    add_cylinder(b, 2, p0, p1, arm_r);
    hand[k] = p1;
  }

  for (int s = -1; s <= 1; s += 2) {
    Vec3 top{s * hip_x, 0.0, leg_h};
    add_cylinder(b, 3, {top.x + j.shift() * 0.4, top.y, 0.0}, top, leg_r);
  }

  if (n_parts > 4)
    for (int k = 0; k < 2; ++k) add_sphere(b, 4, hand[k], arm_r * 1.4);
  if (n_parts > 5) {
    double foot_len = j.len(0.12);
    for (int s = -1; s <= 1; s += 2)
      add_box(b, 5, {s * hip_x, foot_len * 0.4, 0.035},
              {leg_r * 1.1, foot_len, 0.035});
  }
  if (n_parts > 6)
    add_cylinder(b, 6, head_c + Vec3{0, 0, 0.6 * head_r},
                 head_c + Vec3{0, 0, 1.25 * head_r}, head_r * 0.8);
  if (n_parts > 7)
    add_box(b, 7, {0, 0, leg_h + 0.05},
            {torso_hx * 1.08, torso_hy * 1.08, 0.03});
}

// ---------------------------------------------------------------- textures

enum class Pattern { kSolid, kChecker, kStripes };

// Fixed pattern type per figure part id; this, not geometry, is what lets a
// segmenter identify figure parts from RGB.
Pattern part_pattern(int part) {
  static const Pattern kTable[8] = {Pattern::kSolid,   Pattern::kStripes,
                                    Pattern::kChecker, Pattern::kSolid,
                                    Pattern::kChecker, Pattern::kStripes,
                                    Pattern::kSolid,   Pattern::kStripes};
  return kTable[part % 8];
}

void hsv_to_rgb(double h, double s, double v, float* rgb) {
  h = h - std::floor(h);
  double c = v * s;
  double hp = h * 6.0;
  double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, bl = 0;
  switch (static_cast<int>(hp) % 6) {
    case 0: r = c, g = x; break;
    case 1: r = x, g = c; break;
    case 2: g = c, bl = x; break;
    case 3: g = x, bl = c; break;
    case 4: r = x, bl = c; break;
    default: r = c, bl = x; break;
  }
  double m = v - c;
  rgb[0] = float(r + m);
  rgb[1] = float(g + m);
  rgb[2] = float(bl + m);
}

Texture paint_atlas(const SynthSpec& spec, int n_parts, Rng& rng) {
  int n = spec.texture_size;
  Texture tex(n, n);
  for (auto& p : tex.pixels) p = 0.5f;

  int tw = n / kAtlasCols, th = n / kAtlasRows;
  // cell size keeps sub-part detail resolvable in closeup views
  int cell = std::max(2, n / 32);
  for (int part = 0; part < n_parts; ++part) {
    double hue = part / 8.0 + rng.uniform(-0.06, 0.06);
    double val = rng.uniform(0.75, 0.95);
    float ca[3], cb[3];
    hsv_to_rgb(hue, 0.65, val, ca);
    hsv_to_rgb(hue, 0.65, 0.35 * val, cb);
    Pattern pat = part_pattern(part);
    int x0 = (part % kAtlasCols) * tw, y0 = (part / kAtlasCols) * th;
    for (int y = 0; y < th; ++y)
      for (int x = 0; x < tw; ++x) {
        bool alt = false;
        if (pat == Pattern::kChecker)
          alt = ((x / cell) + (y / cell)) % 2 != 0;
        else if (pat == Pattern::kStripes)
          alt = (y / cell) % 2 != 0;
        const float* c = alt ? cb : ca;
        float* px = tex.at(x0 + x, y0 + y);
        px[0] = c[0], px[1] = c[1], px[2] = c[2];
      }
  }
  return tex;
}

bool covers_all_parts(const FaceLabels& labels, int n_parts) {
  std::vector<bool> seen(n_parts, false);
  for (int32_t l : labels.labels)
    if (l >= 0 && l < n_parts) seen[l] = true;
  for (bool s : seen)
    if (!s) return false;
  return true;
}

}  // namespace

Family parse_family(const std::string& name) {
  if (name == "furniture") return Family::kFurniture;
  if (name == "figure") return Family::kFigure;
  throw std::runtime_error("unknown shape family: " + name);
}

std::string family_name(Family f) {
  return f == Family::kFurniture ? "furniture" : "figure";
}

void SynthSpec::validate() const {
  if (min_parts < 4 || max_parts > 8 || min_parts > max_parts)
    throw std::runtime_error("synth: part count range must lie in [4, 8]");
  if (pose_jitter < 0 || scale_jitter < 0 || scale_jitter >= 0.5)
    throw std::runtime_error("synth: jitter out of range");
  if (texture_size < 32)
    throw std::runtime_error("synth: texture_size must be >= 32");
}

GeneratedShape generate_shape(const SynthSpec& spec, uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  int n_parts =
      spec.min_parts +
      static_cast<int>(rng.below(uint64_t(spec.max_parts - spec.min_parts) + 1));

  Builder b;
  b.textured = spec.family == Family::kFigure;
  if (spec.family == Family::kFurniture)
    build_furniture(b, spec, n_parts, rng);
  else
    build_figure(b, spec, n_parts, rng);

  GeneratedShape out;
  out.mesh = normalize(b.mesh);
  out.labels.labels = std::move(b.labels);
  // class space is the family's configured id range, not this instance's
  out.labels.n_classes = spec.max_parts;
  if (b.textured) out.texture = paint_atlas(spec, n_parts, rng);

  out.mesh.validate(true);
  out.labels.validate(out.mesh.triangles.size());
  return out;
}

void generate_dataset(const SynthSpec& spec, int n_shapes,
                      const SplitCounts& split, uint64_t seed,
                      const std::string& out_dir) {
  spec.validate();
  if (split.n_unlabeled < 0 || split.n_labeled < 0 || split.n_test < 0 ||
      split.n_unlabeled + split.n_labeled + split.n_test != n_shapes)
    throw std::runtime_error("generate_dataset: split counts must be "
                             "non-negative and sum to n_shapes");

  fs::create_directories(fs::path(out_dir) / "shapes");

  nlohmann::json manifest;
  manifest["family"] = family_name(spec.family);
  manifest["n_classes"] = spec.max_parts;
  manifest["textured"] = spec.family == Family::kFigure;
  manifest["seed"] = seed;
  std::vector<std::string> names[3];

  uint64_t draw = 0;
  for (int i = 0; i < n_shapes; ++i) {
    int s = i < split.n_unlabeled
                ? 0
                : (i < split.n_unlabeled + split.n_labeled ? 1 : 2);
    GeneratedShape shape;
    for (;;) {
      shape = generate_shape(spec, mix_seed(seed, draw++));
      // labeled shapes must expose every class for few-shot training
      if (s != 1 || covers_all_parts(shape.labels, spec.max_parts)) break;
      if (draw > uint64_t(n_shapes) * 1000 + 1000)
        throw std::runtime_error("generate_dataset: resampling stuck");
    }

    char buf[32];
    std::snprintf(buf, sizeof buf, "shape_%03d", i);
    names[s].push_back(buf);
    fs::path dir = fs::path(out_dir) / "shapes" / buf;
    fs::create_directories(dir);
    save_obj((dir / "mesh.obj").string(), shape.mesh);
    save_labels_file((dir / "labels.txt").string(), shape.labels.labels);
    if (shape.texture) write_png((dir / "texture.png").string(), *shape.texture);
  }

  manifest["splits"] = {{"unlabeled", names[0]},
                        {"labeled", names[1]},
                        {"test", names[2]}};

  fs::path tmp = fs::path(out_dir) / "manifest.json.tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write manifest: " + out_dir);
    out << manifest.dump(2) << "\n";
  }
  fs::rename(tmp, fs::path(out_dir) / "manifest.json");
}

}  // namespace mvseg
